#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "cgr/error.hpp"
#include "cgr/harness.hpp"

namespace cgr {

using nlohmann::json;

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf, ptr);
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

namespace {

const char* const kRecordColumns[] = {
    "question_id", "seed",           "threshold",   "predicted", "truth",
    "correct",     "abstained",      "thinking_tokens_used",     "tokens_saved",
    "final_certainty", "stop_reason", "mode",       "budget"};

std::string stop_text(const StopReason& r) {
  return std::string(to_string(r.kind)) + "(" + std::to_string(r.step) + ")";
}

StopReason parse_stop_text(const std::string& text) {
  const auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')') {
    throw InputError("bad stop_reason '" + text + "'");
  }
  StopReason r;
  r.kind = parse_stop_kind(text.substr(0, open));
  r.step = std::stoll(text.substr(open + 1, text.size() - open - 2));
  return r;
}

json answer_json(const AnswerDecode& a) {
  json digits = json::array();
  for (const auto& t : a.digit_tokens) {
    digits.push_back({{"id", t.token.id}, {"text", t.token.text}, {"p", t.argmax_probability}});
  }
  return {{"digit_tokens", digits},
          {"parsed_value", a.parsed_value ? json(*a.parsed_value) : json(nullptr)}};
}

AnswerDecode answer_from(const json& j) {
  AnswerDecode a;
  for (const auto& d : j.at("digit_tokens")) {
    a.digit_tokens.push_back({{d.at("id").get<TokenId>(), d.at("text").get<std::string>()},
                              d.at("p").get<double>()});
  }
  if (!j.at("parsed_value").is_null()) a.parsed_value = j.at("parsed_value").get<int>();
  return a;
}

}  // namespace

std::string records_to_csv(const std::vector<EvalRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < std::size(kRecordColumns); ++i) {
    if (i) out += ',';
    out += kRecordColumns[i];
  }
  out += '\n';
  for (const auto& r : records) {
    out += csv_field(r.question_id);
    out += ',' + std::to_string(r.seed);
    out += ',' + format_real(r.threshold);
    out += ',' + (r.predicted ? std::to_string(*r.predicted) : std::string("abstain"));
    out += ',' + std::to_string(r.truth);
    out += r.correct ? ",true" : ",false";
    out += r.abstained ? ",true" : ",false";
    out += ',' + std::to_string(r.thinking_tokens_used);
    out += ',' + std::to_string(r.tokens_saved);
    out += ',' + format_real(r.final_certainty);
    out += ',' + stop_text(r.stop_reason);
    out += ',' + std::string(to_string(r.mode));
    out += ',' + std::to_string(r.budget);
    out += '\n';
  }
  return out;
}

std::vector<EvalRecord> records_from_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw InputError("records CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() != std::size(kRecordColumns)) throw InputError("unexpected records CSV header");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] != kRecordColumns[i]) throw InputError("unexpected column '" + header[i] + "'");
  }
  std::vector<EvalRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw InputError("records CSV line " + std::to_string(line_no) + " has wrong field count");
    }
    try {
      EvalRecord r;
      r.question_id = f[0];
      r.seed = std::stoull(f[1]);
      r.threshold = std::stod(f[2]);
      if (f[3] != "abstain") r.predicted = std::stoi(f[3]);
      r.truth = std::stoi(f[4]);
      r.correct = f[5] == "true";
      r.abstained = f[6] == "true";
      r.thinking_tokens_used = std::stoll(f[7]);
      r.tokens_saved = std::stoll(f[8]);
      r.final_certainty = std::stod(f[9]);
      r.stop_reason = parse_stop_text(f[10]);
      r.mode = parse_mode(f[11]);
      r.budget = std::stoll(f[12]);
      out.push_back(std::move(r));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw InputError("records CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string trace_to_jsonl(const ReasoningTrace& t, std::uint64_t seed, int truth,
                           bool include_tokens, std::int64_t job_index) {
  json head = {{"question_id", t.question_id},
               {"job_index", job_index},
               {"seed", seed},
               {"truth", truth},
               {"mode", to_string(t.mode)},
               {"budget", t.budget},
               {"threshold", t.threshold},
               {"thinking_tokens_used", t.thinking_tokens_used},
               {"forced_wait_count", t.forced_wait_count},
               {"probe_overhead_tokens", t.probe_overhead_tokens},
               {"stop_reason", {{"kind", to_string(t.stop_reason.kind)}, {"step", t.stop_reason.step}}},
               {"final_answer", answer_json(t.final_answer)},
               {"final_certainty", t.final_certainty},
               {"wait_truncated", t.wait_truncated},
               {"abstainable", t.abstainable}};
  std::string out = head.dump() + '\n';
  for (const auto& p : t.probe_events) {
    json probe = {{"step", p.step},
                  {"trigger", to_string(p.trigger)},
                  {"certainty", p.certainty},
                  {"overhead_tokens", p.overhead_tokens},
                  {"answer", answer_json(p.answer)}};
    out += json{{"probe", probe}}.dump() + '\n';
  }
  if (include_tokens) {
    std::string line = "{\"tokens\":[";
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      if (i) line += ',';
      line += std::to_string(t.tokens[i].id);
    }
    out += line + "]}\n";
  }
  return out;
}

LoadedTrace trace_from_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  LoadedTrace out;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = json::parse(line);
      if (line_no == 1) {
        auto& t = out.trace;
        t.question_id = j.at("question_id").get<std::string>();
        out.job_index = j.value("job_index", std::int64_t{-1});
        out.seed = j.at("seed").get<std::uint64_t>();
        out.truth = j.at("truth").get<int>();
        t.mode = parse_mode(j.at("mode").get<std::string>());
        t.budget = j.at("budget").get<std::int64_t>();
        t.threshold = j.at("threshold").get<double>();
        t.thinking_tokens_used = j.at("thinking_tokens_used").get<std::int64_t>();
        t.forced_wait_count = j.at("forced_wait_count").get<std::int64_t>();
        t.probe_overhead_tokens = j.at("probe_overhead_tokens").get<std::int64_t>();
        t.stop_reason.kind = parse_stop_kind(j.at("stop_reason").at("kind").get<std::string>());
        t.stop_reason.step = j.at("stop_reason").at("step").get<std::int64_t>();
        t.final_answer = answer_from(j.at("final_answer"));
        t.final_certainty = j.at("final_certainty").get<double>();
        t.wait_truncated = j.value("wait_truncated", false);
        t.abstainable = j.at("abstainable").get<bool>();
      } else if (j.contains("probe")) {
        const auto& p = j.at("probe");
        ProbeResult r;
        r.step = p.at("step").get<std::int64_t>();
        const auto trig = p.at("trigger").get<std::string>();
        r.trigger = trig == "StopAttempt" ? ProbeTrigger::StopAttempt
                    : trig == "Final"     ? ProbeTrigger::Final
                                          : ProbeTrigger::Interval;
        r.certainty = p.at("certainty").get<double>();
        r.overhead_tokens = p.at("overhead_tokens").get<std::size_t>();
        r.answer = answer_from(p.at("answer"));
        out.trace.probe_events.push_back(std::move(r));
      } else if (j.contains("tokens")) {
        for (const auto& id : j.at("tokens")) out.trace.tokens.push_back({id.get<TokenId>(), {}});
      }
    }
  } catch (const json::exception& e) {
    throw TraceFormatError(e.what(), line_no);
  }
  if (line_no == 0) throw TraceFormatError("empty trace file", 1);
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

}  // namespace cgr
