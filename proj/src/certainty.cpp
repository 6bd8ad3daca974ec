#include "cgr/certainty.hpp"

#include <algorithm>
#include <cmath>

#include "cgr/error.hpp"

namespace cgr {

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw NumericalError("softmax of an empty vector");
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericalError("softmax input is not finite");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double answer_certainty(const AnswerDecode& answer) {
  if (answer.parse_failed() || answer.digit_tokens.empty()) return 0.0;
  double lowest = 1.0;
  for (const auto& t : answer.digit_tokens) lowest = std::min(lowest, t.argmax_probability);
  return std::clamp(lowest, 0.0, 1.0);
}

ProbeResult certainty_probe(ContextView context, const Backend& probe_backend, std::int64_t step,
                            ProbeTrigger trigger, std::size_t max_answer_tokens) {
  if (context.tokens.empty()) throw InputError("certainty probe needs a non-empty context");
  auto forced = force_answer_detailed(context, probe_backend, max_answer_tokens);
  ProbeResult r;
  r.step = step;
  r.certainty = answer_certainty(forced.answer);
  r.answer = std::move(forced.answer);
  r.trigger = trigger;
  r.overhead_tokens = forced.tokens_spent;
  return r;
}

const char* to_string(ProbeTrigger trigger) {
  switch (trigger) {
    case ProbeTrigger::Interval: return "Interval";
    case ProbeTrigger::StopAttempt: return "StopAttempt";
    case ProbeTrigger::Final: return "Final";
  }
  return "?";
}

}  // namespace cgr
