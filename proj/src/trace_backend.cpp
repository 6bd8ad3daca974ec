#include "cgr/trace_backend.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cgr/error.hpp"

namespace cgr {

using nlohmann::json;

TraceBackend::TraceBackend(Vocabulary vocab, SpecialTokens specials,
                           std::vector<TokenDistribution> steps)
    : vocab_(std::move(vocab)), specials_(std::move(specials)), steps_(std::move(steps)) {}

TokenDistribution TraceBackend::next_distribution(ContextView context, std::size_t top_k) const {
  if (top_k == 0) throw InputError("top_k must be at least 1");
  if (context.tokens.size() > max_context()) throw ContextOverflow("context exceeds maximum length");
  const std::size_t step = context.step();
  TokenDistribution dist;
  if (step < steps_.size()) {
    dist = steps_[step];
  } else {
    dist.candidates = {{specials_.end_of_sequence, 1.0}};
  }
  dist.step_index = step;
  canonicalize(dist, top_k);
  return dist;
}

namespace {

Token token_from(const json& j, const Vocabulary& vocab, std::size_t line) {
  if (!j.is_number_integer()) throw TraceFormatError("token id must be an integer", line);
  const auto id = j.get<TokenId>();
  if (!vocab.contains(id)) throw TraceFormatError("token id " + std::to_string(id) + " not in vocab", line);
  return vocab.token(id);
}

SpecialTokens specials_from(const json& j, const Vocabulary& vocab, std::size_t line) {
  if (!j.is_object()) throw TraceFormatError("header 'specials' must be an object", line);
  SpecialTokens s;
  if (!j.contains("end_think") || !j.contains("end_of_sequence")) {
    throw TraceFormatError("specials need end_think and end_of_sequence", line);
  }
  s.end_think = token_from(j.at("end_think"), vocab, line);
  s.end_of_sequence = token_from(j.at("end_of_sequence"), vocab, line);
  if (s.end_think.id == s.end_of_sequence.id) {
    throw TraceFormatError("end_think and end_of_sequence must differ", line);
  }
  s.wait_text = j.value("wait_text", s.wait_text);
  s.answer_prefix_text = j.value("answer_prefix_text", s.answer_prefix_text);
  s.answer_close_text = j.value("answer_close_text", s.answer_close_text);
  return s;
}

}  // namespace

std::shared_ptr<TraceBackend> load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceFormatError("cannot open " + path.string(), 0);

  std::optional<Vocabulary> vocab;
  SpecialTokens specials;
  std::vector<TokenDistribution> steps;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw TraceFormatError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw TraceFormatError("record must be a JSON object", line_no);

    if (!vocab) {
      if (!j.contains("vocab") || !j.at("vocab").is_array()) {
        throw TraceFormatError("first record must be a header with a 'vocab' array", line_no);
      }
      try {
        vocab.emplace(j.at("vocab").get<std::vector<std::string>>());
      } catch (const std::exception& e) {
        throw TraceFormatError(std::string("bad vocab: ") + e.what(), line_no);
      }
      specials = specials_from(j.value("specials", json::object()), *vocab, line_no);
      continue;
    }

    if (!j.contains("step") || !j.at("step").is_number_integer()) {
      throw TraceFormatError("record needs an integer 'step'", line_no);
    }
    if (j.at("step").get<std::int64_t>() != static_cast<std::int64_t>(steps.size())) {
      throw TraceFormatError("expected step " + std::to_string(steps.size()), line_no);
    }
    if (!j.contains("candidates") || !j.at("candidates").is_array()) {
      throw TraceFormatError("record needs a 'candidates' array", line_no);
    }
    TokenDistribution dist;
    dist.step_index = steps.size();
    for (const auto& c : j.at("candidates")) {
      if (!c.is_object() || !c.contains("id") || !c.contains("p") || !c.at("p").is_number()) {
        throw TraceFormatError("candidate needs 'id' and numeric 'p'", line_no);
      }
      Token tok = token_from(c.at("id"), *vocab, line_no);
      if (c.contains("text") && c.at("text") != tok.text) {
        throw TraceFormatError("candidate text does not match vocab entry " + std::to_string(tok.id), line_no);
      }
      const double p = c.at("p").get<double>();
      if (!(p >= 0.0 && p <= 1.0)) {
        throw TraceFormatError("probability outside [0, 1]", line_no);
      }
      dist.candidates.push_back({std::move(tok), p});
    }
    canonicalize(dist, dist.candidates.size());
    if (auto problem = validate(dist); !problem.empty()) throw TraceFormatError(problem, line_no);
    steps.push_back(std::move(dist));
  }
  if (!vocab) throw TraceFormatError("missing header line", line_no + 1);
  return std::make_shared<TraceBackend>(std::move(*vocab), std::move(specials), std::move(steps));
}

void write_trace(const std::filesystem::path& path, const Vocabulary& vocab,
                 const SpecialTokens& specials, const std::vector<TokenDistribution>& steps) {
  std::ostringstream out;
  json header = {{"vocab", vocab.texts()},
                 {"specials",
                  {{"end_think", specials.end_think.id},
                   {"end_of_sequence", specials.end_of_sequence.id},
                   {"wait_text", specials.wait_text},
                   {"answer_prefix_text", specials.answer_prefix_text},
                   {"answer_close_text", specials.answer_close_text}}}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < steps.size(); ++i) {
    json cands = json::array();
    for (const auto& c : steps[i].candidates) {
      cands.push_back({{"id", c.token.id}, {"text", c.token.text}, {"p", c.probability}});
    }
    out << json{{"step", i}, {"candidates", cands}}.dump() << '\n';
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("cannot write " + path.string());
  file << out.str();
}

std::vector<TokenDistribution> record_distributions(const Backend& backend,
                                                    std::span<const TokenId> prompt,
                                                    std::size_t steps, std::size_t top_k) {
  std::vector<TokenId> ctx(prompt.begin(), prompt.end());
  std::vector<TokenDistribution> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    auto dist = backend.next_distribution({ctx, prompt.size()}, top_k);
    ctx.push_back(dist.argmax().token.id);
    out.push_back(std::move(dist));
  }
  return out;
}

}  // namespace cgr
