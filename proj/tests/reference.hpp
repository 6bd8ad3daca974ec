#pragma once

// Straight-line reference interpreters used as test oracles. They talk to the
// Backend interface directly and share no code with the decoder, the answer
// forcing or the certainty scoring under test.

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgr/backend.hpp"
#include "cgr/decoder.hpp"
#include "cgr/mock_backend.hpp"

namespace ref {

struct Outcome {
  cgr::StopReason::Kind kind;
  std::int64_t step;
  std::int64_t waits = 0;
};

inline cgr::Candidate greedy(const cgr::Backend& m, const std::vector<cgr::TokenId>& o,
                             std::size_t prompt_len) {
  const auto d = m.next_distribution({o, prompt_len}, 16);
  cgr::Candidate best = d.candidates.at(0);
  for (const auto& c : d.candidates) {
    if (c.probability > best.probability ||
        (c.probability == best.probability && c.token.id < best.token.id)) {
      best = c;
    }
  }
  return best;
}

inline double probe(const cgr::Backend& m, std::vector<cgr::TokenId> f, std::size_t prompt_len) {
  const auto& sp = m.specials();
  if (std::find(f.begin() + static_cast<std::ptrdiff_t>(prompt_len), f.end(), sp.end_think.id) == f.end()) {
    f.push_back(sp.end_think.id);
  }
  for (const auto& tok : m.tokenize(sp.answer_prefix_text)) f.push_back(tok.id);
  std::string text;
  double lowest = 1.0;
  for (int i = 0; i < 4; ++i) {
    const auto c = greedy(m, f, prompt_len);
    if (c.token.id == sp.end_of_sequence.id || c.token.text == sp.answer_close_text) break;
    f.push_back(c.token.id);
    if (c.token.id == sp.end_think.id) continue;
    text += c.token.text;
    lowest = std::min(lowest, c.probability);
  }
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
    return 0.0;
  }
  const auto nz = text.find_first_not_of('0');
  if (nz != std::string::npos && text.size() - nz > 3) return 0.0;
  return lowest;
}

inline cgr::TokenId single_wait(const cgr::Backend& m) {
  const auto w = m.tokenize(m.specials().wait_text);
  if (w.size() != 1) throw std::logic_error("reference interpreter needs a one-token wait cue");
  return w[0].id;
}

// Certainty-guided reasoning with interval probing; a natural stop ends the loop.
inline Outcome cgr_loop(const cgr::Backend& m, const std::vector<cgr::TokenId>& q, std::int64_t B,
                        double theta, std::int64_t I) {
  std::vector<cgr::TokenId> o = q;
  std::int64_t t = 0;
  while (t < B) {
    const auto x = greedy(m, o, q.size()).token.id;
    o.push_back(x);
    t = t + 1;
    if (x == m.specials().end_think.id) return {cgr::StopReason::Kind::NaturalStop, t};
    if (t % I == 0 && probe(m, o, q.size()) >= theta) {
      return {cgr::StopReason::Kind::EarlyExitCertainty, t};
    }
  }
  return {cgr::StopReason::Kind::BudgetExhausted, t};
}

// Certainty-guided reasoning with budget forcing.
inline Outcome cgr_forcing_loop(const cgr::Backend& m, const std::vector<cgr::TokenId>& q,
                                std::int64_t B, double theta, std::int64_t I) {
  const auto wait = single_wait(m);
  std::vector<cgr::TokenId> o = q;
  std::int64_t t = 0;
  std::int64_t waits = 0;
  while (t < B) {
    auto x = greedy(m, o, q.size()).token.id;
    if (x == m.specials().end_think.id) {
      if (probe(m, o, q.size()) >= theta) {
        return {cgr::StopReason::Kind::NaturalStopCertified, t, waits};
      }
      x = wait;
      ++waits;
    }
    o.push_back(x);
    t = t + 1;
    if (t % I == 0 && probe(m, o, q.size()) >= theta) {
      return {cgr::StopReason::Kind::EarlyExitCertainty, t, waits};
    }
  }
  return {cgr::StopReason::Kind::BudgetExhausted, t, waits};
}

// Plain budget forcing: every end of thinking becomes the wait cue.
inline Outcome forcing_loop(const cgr::Backend& m, const std::vector<cgr::TokenId>& q, std::int64_t B) {
  const auto wait = single_wait(m);
  std::vector<cgr::TokenId> o = q;
  std::int64_t t = 0;
  std::int64_t waits = 0;
  while (t < B) {
    auto x = greedy(m, o, q.size()).token.id;
    if (x == m.specials().end_think.id) {
      x = wait;
      ++waits;
    }
    o.push_back(x);
    t = t + 1;
  }
  return {cgr::StopReason::Kind::BudgetExhausted, t, waits};
}

inline cgr::MockProfile random_profile(std::mt19937_64& rng, std::int64_t budget) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  cgr::MockProfile p;
  if (u(rng) < 0.75) p.crossing_step = 1 + static_cast<std::int64_t>(u(rng) * 1.2 * static_cast<double>(budget));
  p.pre_certainty = 0.2 + 0.65 * u(rng);
  p.post_certainty = 0.9 + 0.1 * u(rng);
  const int attempts = static_cast<int>(u(rng) * 4.0);
  for (int i = 0; i < attempts; ++i) {
    p.stop_attempt_steps.push_back(1 + static_cast<std::int64_t>(u(rng) * static_cast<double>(budget)));
  }
  p.noise_amplitude = u(rng) < 0.5 ? 0.0 : 0.02 * u(rng);
  const int digits = 1 + static_cast<int>(u(rng) * 3.0);
  p.answer_digits.clear();
  for (int i = 0; i < digits; ++i) p.answer_digits.push_back(static_cast<int>(u(rng) * 10.0));
  return p;
}

inline std::vector<cgr::TokenId> prompt_ids(const cgr::Backend& m, const std::string& text = "Q: 2+2?") {
  return cgr::ids_of(m.tokenize(text));
}

}  // namespace ref
