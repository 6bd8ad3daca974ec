#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgr/decoder.hpp"

namespace cgr {

/// A deterministic decoding setup that can be replayed under several thresholds.
struct SweepSource {
  std::span<const TokenId> question;
  const Backend* gen_backend = nullptr;
  const Backend* probe_backend = nullptr;
  DecodingMode mode = DecodingMode::CgrWithForcing;
  std::optional<int> truth;
};

struct SweepPoint {
  double threshold = 0.0;
  std::int64_t stop_step = 0;
  std::int64_t tokens_saved = 0;
  Prediction answer;
  std::optional<bool> correct;
};

struct ThresholdSweep {
  std::vector<SweepPoint> points;
  std::vector<std::string> warnings;
};

/// Replays the source once per threshold. Thresholds must be ascending and in
/// [0, 1]; values below 0.90 add a warning. Throws SweepUnsupported when
/// either backend is non-deterministic, InputError on bad thresholds.
ThresholdSweep sweep_thresholds(const SweepSource& source, std::span<const double> thresholds,
                                const DecodeConfig& config);

/// CSV with header: threshold,stop_step,tokens_saved,answer,correct
void write_sweep_csv(std::ostream& out, const ThresholdSweep& sweep);

}  // namespace cgr
