#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgr/answer.hpp"
#include "cgr/backend.hpp"
#include "cgr/certainty.hpp"
#include "cgr/error.hpp"

namespace cgr {

enum class DecodingMode { Baseline, BudgetForcing, Cgr, CgrWithForcing };

const char* to_string(DecodingMode mode);
/// Accepts the canonical names plus lowercase aliases ("baseline", "bf",
/// "cgr", "cgr+bf"). Throws ConfigError.
DecodingMode parse_mode(std::string_view name);

inline bool probes_enabled(DecodingMode mode) {
  return mode == DecodingMode::Cgr || mode == DecodingMode::CgrWithForcing;
}
inline bool forces_continuation(DecodingMode mode) {
  return mode == DecodingMode::BudgetForcing || mode == DecodingMode::CgrWithForcing;
}

struct StopReason {
  enum class Kind { BudgetExhausted, EarlyExitCertainty, NaturalStopCertified, NaturalStop };
  Kind kind = Kind::BudgetExhausted;
  /// Thinking-token count when the loop exited.
  std::int64_t step = 0;

  friend bool operator==(const StopReason&, const StopReason&) = default;
};

const char* to_string(StopReason::Kind kind);
StopReason::Kind parse_stop_kind(std::string_view name);

struct DecodeConfig {
  std::int64_t budget = 32000;
  double threshold = 0.97;
  std::int64_t probe_interval = 1000;
  std::size_t top_k = 1;
  std::size_t max_answer_tokens = 4;
};

/// Full record of one decoding run.
struct ReasoningTrace {
  std::string question_id;
  DecodingMode mode = DecodingMode::Baseline;
  /// Thinking region only; the forced answer suffix is not included.
  std::vector<Token> tokens;
  std::int64_t thinking_tokens_used = 0;
  std::int64_t budget = 0;
  double threshold = 0.0;
  std::int64_t forced_wait_count = 0;
  std::vector<ProbeResult> probe_events;
  StopReason stop_reason;
  AnswerDecode final_answer;
  double final_certainty = 0.0;
  std::int64_t probe_overhead_tokens = 0;
  /// A forced wait was cut short by the budget.
  bool wait_truncated = false;
  /// The run has no certified answer: it parsed nothing, or a certainty mode
  /// ran out of budget.
  bool abstainable = false;
};

/// Thrown when a backend fails mid-run; carries everything decoded so far.
class DecodeInterrupted : public BackendUnavailable {
 public:
  DecodeInterrupted(const BackendUnavailable& cause, ReasoningTrace partial)
      : BackendUnavailable(cause.what(), cause.status()),
        partial_(std::make_shared<const ReasoningTrace>(std::move(partial))) {}
  const ReasoningTrace& partial_trace() const { return *partial_; }

 private:
  std::shared_ptr<const ReasoningTrace> partial_;
};

/// Runs one decoding controller over `question` (the prompt tokens).
///
/// Interval probes fire when the thinking-token count is a positive multiple
/// of probe_interval. Probe tokens are charged to probe_overhead_tokens, not
/// to the budget. The final answer is forced through `gen_backend`; probes
/// use `probe_backend`, which may be the same instance.
ReasoningTrace decode(std::span<const TokenId> question, const Backend& gen_backend,
                      const Backend& probe_backend, DecodingMode mode, const DecodeConfig& config,
                      std::string question_id = {});

}  // namespace cgr
