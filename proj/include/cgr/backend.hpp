#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cgr {

using TokenId = std::int32_t;

/// A vocabulary entry: numeric id plus its surface form.
struct Token {
  TokenId id = 0;
  std::string text;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Candidate {
  Token token;
  double probability = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Top-k next-token candidates at one decoding step.
///
/// Candidates are ordered by descending probability, ties broken by ascending
/// token id, so candidates[0] is the greedy choice. Probabilities are raw
/// (no renormalisation after truncation) and may sum to less than one.
struct TokenDistribution {
  std::vector<Candidate> candidates;
  std::size_t step_index = 0;

  const Candidate& argmax() const { return candidates.front(); }

  friend bool operator==(const TokenDistribution&, const TokenDistribution&) = default;
};

/// Sorts candidates into canonical order and truncates to top_k.
void canonicalize(TokenDistribution& dist, std::size_t top_k);

/// Checks ordering, probability range, mass and non-emptiness. Returns an
/// empty string when valid, otherwise a description of the first violation.
std::string validate(const TokenDistribution& dist);

struct SpecialTokens {
  Token end_think;
  Token end_of_sequence;
  std::string wait_text = "\nWait";
  // "</think>" is prepended by answer forcing while the thinking region is open.
  std::string answer_prefix_text = "Final Answer: \\boxed{";
  std::string answer_close_text = "}";
};

/// Read-only view of a decoding context: prompt tokens followed by the
/// generated suffix.
struct ContextView {
  std::span<const TokenId> tokens;
  std::size_t prompt_length = 0;

  std::span<const TokenId> generated() const { return tokens.subspan(prompt_length); }
  std::size_t step() const { return tokens.size() - prompt_length; }
};

/// Id-indexed vocabulary with greedy longest-match tokenization.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> texts);

  std::size_t size() const { return texts_.size(); }
  const std::string& text(TokenId id) const;
  Token token(TokenId id) const { return {id, text(id)}; }
  /// Id of an exact surface form, or -1.
  TokenId find(std::string_view text) const;
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < texts_.size(); }
  const std::vector<std::string>& texts() const { return texts_; }

  /// Throws TokenizationError when some suffix of the input cannot be matched.
  std::vector<Token> tokenize(std::string_view text) const;
  std::string detokenize(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> texts_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t max_piece_ = 0;
};

/// Abstract next-token-distribution source driven by the decoder.
///
/// Implementations are immutable after construction and safe to call from
/// several threads with independent contexts.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::vector<Token> tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const TokenId> ids) const = 0;

  /// Top-k distribution for the token following `context`.
  /// Throws ContextOverflow past max_context(), BackendUnavailable on transport failure.
  virtual TokenDistribution next_distribution(ContextView context, std::size_t top_k) const = 0;

  virtual const SpecialTokens& specials() const = 0;

  /// True when identical contexts always yield identical distributions.
  virtual bool deterministic() const = 0;

  virtual std::size_t max_context() const { return std::size_t{1} << 22; }
};

std::vector<TokenId> ids_of(std::span<const Token> tokens);

}  // namespace cgr
