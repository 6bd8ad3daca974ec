#include "cgr/mock_backend.hpp"

#include <algorithm>
#include <cmath>

#include "cgr/detail/mix.hpp"
#include "cgr/error.hpp"

namespace cgr {

namespace {

constexpr std::uint64_t kFillerSalt = 0x6d6f636b66696c6cULL;
constexpr std::uint64_t kNoiseSalt = 0x6e6f697365303031ULL;
// How far back from the context end the answer prefix is searched for.
constexpr std::size_t kAnswerWindow = 16;

const char* const kFillerWords[] = {
    " the",   " so",     " we",       " compute", " check", " therefore", " sum",
    " mod",   " case",   " let",      " equation", " Hmm",  " thus",      " square",
    " prime", " factor", " triangle", " count",   " then",  " If",        " wait",
};

}  // namespace

void MockProfile::validate() const {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!in_unit(pre_certainty) || pre_certainty >= 1.0) {
    throw InvalidProfile("pre_certainty must lie in [0, 1)");
  }
  if (!in_unit(post_certainty)) throw InvalidProfile("post_certainty must lie in [0, 1]");
  if (crossing_step) {
    if (*crossing_step <= 0) throw InvalidProfile("crossing_step must be positive");
    if (!(pre_certainty < post_certainty)) {
      throw InvalidProfile("pre_certainty must be below post_certainty when crossing_step is set");
    }
  }
  for (auto s : stop_attempt_steps) {
    if (s <= 0) throw InvalidProfile("stop_attempt_steps must be positive");
  }
  if (!std::isfinite(noise_amplitude) || noise_amplitude < 0.0) {
    throw InvalidProfile("noise_amplitude must be finite and non-negative");
  }
  if (answer_digits.empty() || answer_digits.size() > 3) {
    throw InvalidProfile("answer_digits must hold 1 to 3 digits");
  }
  for (int d : answer_digits) {
    if (d < 0 || d > 9) throw InvalidProfile("answer digit out of range 0..9");
  }
}

Vocabulary default_vocabulary() {
  std::vector<std::string> texts;
  for (char c = '0'; c <= '9'; ++c) texts.emplace_back(1, c);
  texts.emplace_back("</think>");
  texts.emplace_back("<|eos|>");
  texts.emplace_back("\nWait");
  texts.emplace_back("Final Answer: \\boxed{");
  texts.emplace_back("}");
  for (int c = 0x20; c <= 0x7e; ++c) {
    if ((c >= '0' && c <= '9') || c == '}') continue;
    texts.emplace_back(1, static_cast<char>(c));
  }
  texts.emplace_back("\n");
  texts.emplace_back("\t");
  for (const char* w : kFillerWords) texts.emplace_back(w);
  return Vocabulary(std::move(texts));
}

SpecialTokens default_specials(const Vocabulary& vocab) {
  SpecialTokens s;
  const TokenId end_think = vocab.find("</think>");
  const TokenId eos = vocab.find("<|eos|>");
  if (end_think < 0 || eos < 0) throw InvalidProfile("vocabulary lacks </think> or <|eos|>");
  s.end_think = vocab.token(end_think);
  s.end_of_sequence = vocab.token(eos);
  return s;
}

MockBackend::MockBackend(std::uint64_t seed, MockProfile profile, Vocabulary vocab,
                         SpecialTokens specials, std::size_t max_context)
    : seed_(seed),
      profile_(std::move(profile)),
      vocab_(std::move(vocab)),
      specials_(std::move(specials)),
      max_context_(max_context),
      stop_steps_(profile_.stop_attempt_steps.begin(), profile_.stop_attempt_steps.end()) {
  profile_.validate();
  auto require = [&](const Token& t, const char* what) {
    if (!vocab_.contains(t.id) || vocab_.text(t.id) != t.text) {
      throw InvalidProfile(std::string("vocabulary does not contain the ") + what + " token");
    }
  };
  require(specials_.end_think, "end_think");
  require(specials_.end_of_sequence, "end_of_sequence");
  if (specials_.end_think.id == specials_.end_of_sequence.id) {
    throw InvalidProfile("end_think and end_of_sequence must differ");
  }
  for (char c = '0'; c <= '9'; ++c) {
    const TokenId id = vocab_.find(std::string(1, c));
    if (id < 0) throw InvalidProfile("vocabulary lacks digit token " + std::string(1, c));
    digit_ids_.push_back(id);
  }
  close_id_ = vocab_.find(specials_.answer_close_text);
  if (close_id_ < 0) throw InvalidProfile("answer_close_text must be a single vocabulary token");
  prefix_id_ = vocab_.find(specials_.answer_prefix_text);
  if (prefix_id_ < 0) throw InvalidProfile("answer_prefix_text must be a single vocabulary token");
  try {
    if (vocab_.tokenize(specials_.wait_text).empty()) throw InvalidProfile("wait_text is empty");
  } catch (const TokenizationError&) {
    throw InvalidProfile("wait_text cannot be tokenized");
  }

  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    if (id == specials_.end_think.id || id == specials_.end_of_sequence.id || id == close_id_ ||
        id == prefix_id_ || std::find(digit_ids_.begin(), digit_ids_.end(), id) != digit_ids_.end()) {
      continue;
    }
    fillers_.push_back(id);
  }
  if (fillers_.size() < 2) throw InvalidProfile("vocabulary needs at least two filler tokens");
}

double MockBackend::digit_probability(std::int64_t step, std::size_t k) const {
  double p = profile_.level_at(step);
  if (profile_.noise_amplitude > 0.0) {
    const double u = detail::unit_interval(
        detail::mix64(seed_ ^ kNoiseSalt, static_cast<std::uint64_t>(step), k));
    p += profile_.noise_amplitude * (2.0 * u - 1.0);
  }
  return std::clamp(p, 0.0, 1.0);
}

TokenDistribution MockBackend::thinking_distribution(std::int64_t step) const {
  TokenDistribution dist;
  const std::uint64_t h = detail::mix64(seed_ ^ kFillerSalt, static_cast<std::uint64_t>(step));
  const TokenId first = fillers_[h % fillers_.size()];
  TokenId second = fillers_[(h >> 20) % fillers_.size()];
  if (second == first) second = fillers_[(h % fillers_.size() + 1) % fillers_.size()];

  if (stop_steps_.contains(step)) {
    dist.candidates = {{specials_.end_think, 0.9},
                       {vocab_.token(first), 0.06},
                       {vocab_.token(second), 0.02}};
  } else {
    const double p = 0.45 + 0.5 * detail::unit_interval(h);
    dist.candidates = {{vocab_.token(first), p},
                       {vocab_.token(second), (1.0 - p) * 0.6},
                       {specials_.end_think, (1.0 - p) * 0.3}};
  }
  return dist;
}

TokenDistribution MockBackend::answer_distribution(std::int64_t step, std::size_t k) const {
  TokenDistribution dist;
  if (k >= profile_.answer_digits.size()) {
    dist.candidates = {{vocab_.token(close_id_), 1.0}};
    return dist;
  }
  const int d = profile_.answer_digits[k];
  const double p = digit_probability(step, k);
  dist.candidates.push_back({vocab_.token(digit_ids_[static_cast<std::size_t>(d)]), p});
  // Runner-up digits share at most 90% of p, so the answer digit stays the argmax.
  const double rest = std::min(1.0 - p, 0.9 * p);
  const int offsets[] = {1, 2, 5};
  const double shares[] = {0.5, 0.3, 0.2};
  for (int j = 0; j < 3; ++j) {
    const double q = rest * shares[j];
    if (q <= 0.0) continue;
    dist.candidates.push_back({vocab_.token(digit_ids_[static_cast<std::size_t>((d + offsets[j]) % 10)]), q});
  }
  return dist;
}

TokenDistribution MockBackend::next_distribution(ContextView context, std::size_t top_k) const {
  if (top_k == 0) throw InputError("top_k must be at least 1");
  if (context.tokens.size() > max_context_) {
    throw ContextOverflow("context of " + std::to_string(context.tokens.size()) +
                          " tokens exceeds maximum " + std::to_string(max_context_));
  }
  const auto gen = context.generated();
  TokenDistribution dist;
  bool answering = false;
  const std::size_t lowest = gen.size() > kAnswerWindow ? gen.size() - kAnswerWindow : 0;
  for (std::size_t j = gen.size(); j-- > lowest;) {
    if (gen[j] != prefix_id_) continue;
    std::size_t start = j;
    if (start > 0 && gen[start - 1] == specials_.end_think.id) --start;
    dist = answer_distribution(static_cast<std::int64_t>(start), gen.size() - 1 - j);
    answering = true;
    break;
  }
  if (!answering) dist = thinking_distribution(static_cast<std::int64_t>(gen.size()));
  dist.step_index = gen.size();
  canonicalize(dist, top_k);
  return dist;
}

std::shared_ptr<MockBackend> build_mock(std::uint64_t seed, const MockProfile& profile,
                                        const Vocabulary& vocab, const SpecialTokens& specials) {
  return std::make_shared<MockBackend>(seed, profile, vocab, specials);
}

std::shared_ptr<MockBackend> build_mock(std::uint64_t seed, const MockProfile& profile) {
  auto vocab = default_vocabulary();
  auto specials = default_specials(vocab);
  return std::make_shared<MockBackend>(seed, profile, std::move(vocab), std::move(specials));
}

}  // namespace cgr
