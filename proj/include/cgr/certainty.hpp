#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgr/answer.hpp"
#include "cgr/backend.hpp"

namespace cgr {

/// Numerically stable softmax (max-subtracted). Throws NumericalError on
/// empty or non-finite input.
std::vector<double> softmax(std::span<const double> logits);

/// Min over answer positions of each position's greedy probability; 0 when
/// the decode failed to parse.
double answer_certainty(const AnswerDecode& answer);

enum class ProbeTrigger { Interval, StopAttempt, Final };

struct ProbeResult {
  std::int64_t step = 0;
  AnswerDecode answer;
  double certainty = 0.0;
  ProbeTrigger trigger = ProbeTrigger::Interval;
  std::size_t overhead_tokens = 0;

  friend bool operator==(const ProbeResult&, const ProbeResult&) = default;
};

/// Forces an answer on a fork of `context` via `probe_backend` and scores it.
/// `step` is recorded as the thinking-token count at probe time.
ProbeResult certainty_probe(ContextView context, const Backend& probe_backend, std::int64_t step,
                            ProbeTrigger trigger = ProbeTrigger::Interval,
                            std::size_t max_answer_tokens = 4);

const char* to_string(ProbeTrigger trigger);

}  // namespace cgr
