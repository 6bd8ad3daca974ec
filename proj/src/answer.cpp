#include "cgr/answer.hpp"

#include <algorithm>
#include <cctype>

#include "cgr/error.hpp"

namespace cgr {

std::optional<int> parse_answer_text(std::string_view text) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (!std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  while (text.size() > 1 && text.front() == '0') text.remove_prefix(1);
  if (text.size() > 3) return std::nullopt;
  int value = 0;
  for (char c : text) value = value * 10 + (c - '0');
  return value;
}

ForcedAnswer force_answer_detailed(ContextView context, const Backend& backend,
                                   std::size_t max_answer_tokens) {
  if (max_answer_tokens == 0) throw InputError("max_answer_tokens must be at least 1");
  const auto& sp = backend.specials();

  std::vector<TokenId> fork(context.tokens.begin(), context.tokens.end());
  const auto gen = context.generated();
  const bool region_open = std::find(gen.begin(), gen.end(), sp.end_think.id) == gen.end();
  ForcedAnswer out;
  if (region_open) {
    fork.push_back(sp.end_think.id);
    ++out.tokens_spent;
  }
  for (const auto& t : backend.tokenize(sp.answer_prefix_text)) {
    fork.push_back(t.id);
    ++out.tokens_spent;
  }

  std::string text;
  for (std::size_t i = 0; i < max_answer_tokens; ++i) {
    const auto dist = backend.next_distribution({fork, context.prompt_length}, 1);
    const Candidate& best = dist.argmax();
    ++out.tokens_spent;
    if (best.token.id == sp.end_of_sequence.id || best.token.text == sp.answer_close_text) break;
    fork.push_back(best.token.id);
    if (best.token.id == sp.end_think.id) continue;
    out.answer.digit_tokens.push_back({best.token, best.probability});
    text += best.token.text;
  }
  out.answer.parsed_value = parse_answer_text(text);
  return out;
}

AnswerDecode force_answer(ContextView context, const Backend& backend,
                          std::size_t max_answer_tokens) {
  return force_answer_detailed(context, backend, max_answer_tokens).answer;
}

Prediction extract_answer(const AnswerDecode& decode) {
  if (decode.parsed_value && *decode.parsed_value >= 0 && *decode.parsed_value <= 999) {
    return decode.parsed_value;
  }
  return std::nullopt;
}

}  // namespace cgr
