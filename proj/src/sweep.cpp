#include "cgr/sweep.hpp"

#include <ostream>

namespace cgr {

ThresholdSweep sweep_thresholds(const SweepSource& source, std::span<const double> thresholds,
                                const DecodeConfig& config) {
  if (source.gen_backend == nullptr) throw InputError("sweep source has no generation backend");
  const Backend& gen = *source.gen_backend;
  const Backend& probe = source.probe_backend ? *source.probe_backend : gen;
  if (!gen.deterministic() || !probe.deterministic()) {
    throw SweepUnsupported("threshold sweeps need deterministic backends");
  }

  ThresholdSweep sweep;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double th = thresholds[i];
    if (!(th >= 0.0 && th <= 1.0)) throw InputError("sweep thresholds must lie in [0, 1]");
    if (i > 0 && !(thresholds[i - 1] <= th)) throw InputError("sweep thresholds must be ascending");
    if (th < 0.90) {
      sweep.warnings.push_back("threshold " + std::to_string(th) +
                               " is below 0.90; low thresholds tend to certify wrong answers");
    }
  }

  for (double th : thresholds) {
    DecodeConfig cfg = config;
    cfg.threshold = th;
    const auto trace = decode(source.question, gen, probe, source.mode, cfg);
    SweepPoint point;
    point.threshold = th;
    point.stop_step = trace.thinking_tokens_used;
    point.tokens_saved = cfg.budget - trace.thinking_tokens_used;
    point.answer = extract_answer(trace.final_answer);
    if (source.truth) point.correct = point.answer && *point.answer == *source.truth;
    sweep.points.push_back(point);
  }
  return sweep;
}

void write_sweep_csv(std::ostream& out, const ThresholdSweep& sweep) {
  out << "threshold,stop_step,tokens_saved,answer,correct\n";
  for (const auto& p : sweep.points) {
    out << p.threshold << ',' << p.stop_step << ',' << p.tokens_saved << ',';
    if (p.answer) out << *p.answer;
    out << ',';
    if (p.correct) out << (*p.correct ? "true" : "false");
    out << '\n';
  }
}

}  // namespace cgr
