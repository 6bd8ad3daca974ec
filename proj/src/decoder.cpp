#include "cgr/decoder.hpp"

#include <cctype>

namespace cgr {

const char* to_string(DecodingMode mode) {
  switch (mode) {
    case DecodingMode::Baseline: return "Baseline";
    case DecodingMode::BudgetForcing: return "BudgetForcing";
    case DecodingMode::Cgr: return "CGR";
    case DecodingMode::CgrWithForcing: return "CGRWithForcing";
  }
  return "?";
}

DecodingMode parse_mode(std::string_view name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "baseline") return DecodingMode::Baseline;
  if (lower == "budgetforcing" || lower == "bf" || lower == "budget-forcing") {
    return DecodingMode::BudgetForcing;
  }
  if (lower == "cgr") return DecodingMode::Cgr;
  if (lower == "cgrwithforcing" || lower == "cgr+bf" || lower == "cgr-bf") {
    return DecodingMode::CgrWithForcing;
  }
  throw ConfigError("unknown decoding mode '" + std::string(name) + "'");
}

const char* to_string(StopReason::Kind kind) {
  switch (kind) {
    case StopReason::Kind::BudgetExhausted: return "BudgetExhausted";
    case StopReason::Kind::EarlyExitCertainty: return "EarlyExitCertainty";
    case StopReason::Kind::NaturalStopCertified: return "NaturalStopCertified";
    case StopReason::Kind::NaturalStop: return "NaturalStop";
  }
  return "?";
}

StopReason::Kind parse_stop_kind(std::string_view name) {
  for (auto k : {StopReason::Kind::BudgetExhausted, StopReason::Kind::EarlyExitCertainty,
                 StopReason::Kind::NaturalStopCertified, StopReason::Kind::NaturalStop}) {
    if (name == to_string(k)) return k;
  }
  throw InputError("unknown stop reason '" + std::string(name) + "'");
}

ReasoningTrace decode(std::span<const TokenId> question, const Backend& gen_backend,
                      const Backend& probe_backend, DecodingMode mode, const DecodeConfig& config,
                      std::string question_id) {
  if (config.budget < 1) throw InputError("budget must be at least 1");
  if (!(config.threshold >= 0.0 && config.threshold <= 1.0)) {
    throw InputError("threshold must lie in [0, 1]");
  }
  if (config.probe_interval < 1) throw InputError("probe_interval must be at least 1");
  if (config.top_k < 1) throw InputError("top_k must be at least 1");
  if (question.empty()) throw InputError("question must be non-empty");

  const SpecialTokens& sp = gen_backend.specials();
  const std::size_t prompt_length = question.size();
  std::vector<TokenId> ctx(question.begin(), question.end());
  ctx.reserve(prompt_length + static_cast<std::size_t>(config.budget) + 16);

  ReasoningTrace trace;
  trace.question_id = std::move(question_id);
  trace.mode = mode;
  trace.budget = config.budget;
  trace.threshold = config.threshold;

  std::vector<Token> wait_tokens;
  if (forces_continuation(mode)) {
    wait_tokens = gen_backend.tokenize(sp.wait_text);
    if (wait_tokens.empty()) throw InputError("wait_text tokenizes to nothing");
  }

  std::int64_t t = 0;
  auto view = [&] { return ContextView{ctx, prompt_length}; };
  auto append = [&](const Token& tok) {
    ctx.push_back(tok.id);
    trace.tokens.push_back(tok);
    ++t;
  };
  // Runs a probe at the current step; true when it certifies.
  auto certified = [&](ProbeTrigger trigger) {
    auto r = certainty_probe(view(), probe_backend, t, trigger, config.max_answer_tokens);
    trace.probe_overhead_tokens += static_cast<std::int64_t>(r.overhead_tokens);
    const bool ok = r.certainty >= config.threshold;
    trace.probe_events.push_back(std::move(r));
    return ok;
  };
  auto interval_due = [&] {
    return probes_enabled(mode) && t > 0 && t % config.probe_interval == 0;
  };

  std::optional<StopReason> stop;
  try {
    while (t < config.budget && !stop) {
      const auto dist = gen_backend.next_distribution(view(), config.top_k);
      const Token& x = dist.argmax().token;
      const bool ends_thinking = x.id == sp.end_think.id;
      if (ends_thinking || x.id == sp.end_of_sequence.id) {
        if (!forces_continuation(mode)) {
          if (ends_thinking) append(x);
          stop = StopReason{StopReason::Kind::NaturalStop, t};
          break;
        }
        if (mode == DecodingMode::CgrWithForcing && certified(ProbeTrigger::StopAttempt)) {
          stop = StopReason{StopReason::Kind::NaturalStopCertified, t};
          break;
        }
        ++trace.forced_wait_count;
        for (const auto& w : wait_tokens) {
          if (t >= config.budget) {
            trace.wait_truncated = true;
            break;
          }
          append(w);
          if (interval_due() && certified(ProbeTrigger::Interval)) {
            stop = StopReason{StopReason::Kind::EarlyExitCertainty, t};
            break;
          }
        }
        continue;
      }
      append(x);
      if (interval_due() && certified(ProbeTrigger::Interval)) {
        stop = StopReason{StopReason::Kind::EarlyExitCertainty, t};
      }
    }
    trace.stop_reason = stop.value_or(StopReason{StopReason::Kind::BudgetExhausted, t});
    trace.thinking_tokens_used = t;

    auto final = force_answer_detailed(view(), gen_backend, config.max_answer_tokens);
    trace.final_answer = std::move(final.answer);
  } catch (const BackendUnavailable& e) {
    trace.thinking_tokens_used = t;
    throw DecodeInterrupted(e, std::move(trace));
  }
  trace.final_certainty = answer_certainty(trace.final_answer);
  trace.abstainable = trace.final_answer.parse_failed() ||
                      (probes_enabled(mode) &&
                       trace.stop_reason.kind == StopReason::Kind::BudgetExhausted);
  return trace;
}

}  // namespace cgr
