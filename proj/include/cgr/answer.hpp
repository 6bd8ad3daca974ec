#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "cgr/backend.hpp"

namespace cgr {

struct AnswerToken {
  Token token;
  double argmax_probability = 0.0;

  friend bool operator==(const AnswerToken&, const AnswerToken&) = default;
};

/// Result of forcing the model to write its boxed answer.
struct AnswerDecode {
  /// Greedy tokens decoded after the answer prefix, closing brace excluded.
  std::vector<AnswerToken> digit_tokens;
  /// Integer reading in [0, 999]; nullopt means the decode failed to parse.
  std::optional<int> parsed_value;

  bool parse_failed() const { return !parsed_value.has_value(); }

  friend bool operator==(const AnswerDecode&, const AnswerDecode&) = default;
};

/// A predicted integer, or nullopt for abstention.
using Prediction = std::optional<int>;

/// Reads a boxed answer: surrounding whitespace and leading zeros are
/// ignored, anything other than 1-3 significant decimal digits (or zero)
/// yields nullopt.
std::optional<int> parse_answer_text(std::string_view text);

struct ForcedAnswer {
  AnswerDecode answer;
  /// Prefix tokens appended plus tokens decoded.
  std::size_t tokens_spent = 0;
};

/// Forks the context, appends the answer prefix (preceded by end_think when
/// the thinking region is still open) and greedily decodes up to
/// max_answer_tokens tokens, stopping at the closing text or
/// end_of_sequence. An end_think decoded here is skipped but still consumes
/// one of the max_answer_tokens.
ForcedAnswer force_answer_detailed(ContextView context, const Backend& backend,
                                   std::size_t max_answer_tokens = 4);

AnswerDecode force_answer(ContextView context, const Backend& backend,
                          std::size_t max_answer_tokens = 4);

/// Parsed value when in [0, 999], abstention otherwise.
Prediction extract_answer(const AnswerDecode& decode);

}  // namespace cgr
