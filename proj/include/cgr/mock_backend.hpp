#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_set>
#include <vector>

#include "cgr/backend.hpp"

namespace cgr {

/// Synthetic certainty trajectory for the seeded mock backend.
struct MockProfile {
  /// Thinking step at which probe certainty jumps to post_certainty.
  std::optional<std::int64_t> crossing_step;
  double pre_certainty = 0.5;
  double post_certainty = 0.99;
  /// Steps at which the mock emits end_think as its greedy token.
  std::vector<std::int64_t> stop_attempt_steps;
  double noise_amplitude = 0.0;
  /// Digits (each 0..9) of the answer produced under answer forcing; 1 to 3 entries.
  std::vector<int> answer_digits{0};

  /// Throws InvalidProfile on any violated invariant.
  void validate() const;

  /// Noise-free certainty level at a thinking step.
  double level_at(std::int64_t step) const {
    return crossing_step && step >= *crossing_step ? post_certainty : pre_certainty;
  }
};

/// Default vocabulary: digits, specials, answer scaffolding, printable ASCII
/// and a handful of multi-character filler words.
Vocabulary default_vocabulary();

/// Special tokens resolved against `vocab` using the default surface forms
/// "</think>" and "<|eos|>".
SpecialTokens default_specials(const Vocabulary& vocab);

/// Deterministic mock model that replays a certainty trajectory.
///
/// The generated stream depends only on (seed, step): filler tokens while
/// thinking, end_think at each stop-attempt step. When the context ends in
/// the answer prefix (optionally preceded by end_think) followed by k < n
/// answer tokens, the k-th answer digit is emitted with probability
/// level_at(s) + noise(seed, s, k), clamped to [0, 1], where s is the number
/// of thinking tokens before the forced suffix.
class MockBackend final : public Backend {
 public:
  MockBackend(std::uint64_t seed, MockProfile profile, Vocabulary vocab, SpecialTokens specials,
              std::size_t max_context = std::size_t{1} << 22);

  std::vector<Token> tokenize(std::string_view text) const override { return vocab_.tokenize(text); }
  std::string detokenize(std::span<const TokenId> ids) const override { return vocab_.detokenize(ids); }
  TokenDistribution next_distribution(ContextView context, std::size_t top_k) const override;
  const SpecialTokens& specials() const override { return specials_; }
  bool deterministic() const override { return true; }
  std::size_t max_context() const override { return max_context_; }

  const MockProfile& profile() const { return profile_; }
  std::uint64_t seed() const { return seed_; }

  /// Certainty the k-th answer digit receives when probed at `step`.
  double digit_probability(std::int64_t step, std::size_t k) const;

 private:
  TokenDistribution thinking_distribution(std::int64_t step) const;
  TokenDistribution answer_distribution(std::int64_t step, std::size_t k) const;

  std::uint64_t seed_;
  MockProfile profile_;
  Vocabulary vocab_;
  SpecialTokens specials_;
  std::size_t max_context_;
  std::unordered_set<std::int64_t> stop_steps_;
  std::vector<TokenId> fillers_;
  TokenId prefix_id_ = -1;
  TokenId close_id_ = -1;
  std::vector<TokenId> digit_ids_;
};

/// Validates the profile and vocabulary, then constructs a mock backend.
std::shared_ptr<MockBackend> build_mock(std::uint64_t seed, const MockProfile& profile,
                                        const Vocabulary& vocab, const SpecialTokens& specials);

/// Same, with the default vocabulary and specials.
std::shared_ptr<MockBackend> build_mock(std::uint64_t seed, const MockProfile& profile);

}  // namespace cgr
