#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "cgr/backend.hpp"

namespace cgr {

/// Replays recorded distributions by step index.
///
/// Step i (the length of the generated suffix) returns recorded distribution
/// i regardless of context content. Past the end of the recording the
/// backend returns end_of_sequence with probability 1.
class TraceBackend final : public Backend {
 public:
  TraceBackend(Vocabulary vocab, SpecialTokens specials, std::vector<TokenDistribution> steps);

  std::vector<Token> tokenize(std::string_view text) const override { return vocab_.tokenize(text); }
  std::string detokenize(std::span<const TokenId> ids) const override { return vocab_.detokenize(ids); }
  TokenDistribution next_distribution(ContextView context, std::size_t top_k) const override;
  const SpecialTokens& specials() const override { return specials_; }
  bool deterministic() const override { return true; }

  const Vocabulary& vocabulary() const { return vocab_; }
  const std::vector<TokenDistribution>& steps() const { return steps_; }

 private:
  Vocabulary vocab_;
  SpecialTokens specials_;
  std::vector<TokenDistribution> steps_;
};

/// Parses a trace file. Throws TraceFormatError carrying the 1-based line number.
std::shared_ptr<TraceBackend> load_trace(const std::filesystem::path& path);

void write_trace(const std::filesystem::path& path, const Vocabulary& vocab,
                 const SpecialTokens& specials, const std::vector<TokenDistribution>& steps);

/// Greedily runs `backend` from `prompt` for `steps` tokens, recording each
/// distribution. The recording continues through end_think.
std::vector<TokenDistribution> record_distributions(const Backend& backend,
                                                    std::span<const TokenId> prompt,
                                                    std::size_t steps, std::size_t top_k);

}  // namespace cgr
