#include "cgr/backend.hpp"

#include <algorithm>
#include <cmath>

#include "cgr/error.hpp"

namespace cgr {

namespace {

bool canonical_less(const Candidate& a, const Candidate& b) {
  if (a.probability != b.probability) return a.probability > b.probability;
  return a.token.id < b.token.id;
}

}  // namespace

void canonicalize(TokenDistribution& dist, std::size_t top_k) {
  std::sort(dist.candidates.begin(), dist.candidates.end(), canonical_less);
  if (dist.candidates.size() > top_k) dist.candidates.resize(top_k);
}

std::string validate(const TokenDistribution& dist) {
  if (dist.candidates.empty()) return "no candidates";
  double mass = 0.0;
  for (std::size_t i = 0; i < dist.candidates.size(); ++i) {
    const double p = dist.candidates[i].probability;
    if (!(p >= 0.0 && p <= 1.0)) return "probability outside [0, 1]";
    mass += p;
    if (i > 0 && !canonical_less(dist.candidates[i - 1], dist.candidates[i])) {
      return "candidates not in descending probability / ascending id order";
    }
  }
  if (mass > 1.0 + 1e-9) return "probabilities sum above 1";
  return {};
}

Vocabulary::Vocabulary(std::vector<std::string> texts) : texts_(std::move(texts)) {
  index_.reserve(texts_.size());
  for (std::size_t i = 0; i < texts_.size(); ++i) {
    if (texts_[i].empty()) throw InputError("vocabulary entry " + std::to_string(i) + " is empty");
    auto [it, inserted] = index_.emplace(texts_[i], static_cast<TokenId>(i));
    if (!inserted) throw InputError("duplicate vocabulary entry '" + texts_[i] + "'");
    max_piece_ = std::max(max_piece_, texts_[i].size());
  }
}

const std::string& Vocabulary::text(TokenId id) const {
  if (!contains(id)) throw TokenizationError("unknown token id " + std::to_string(id));
  return texts_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::find(std::string_view text) const {
  auto it = index_.find(std::string(text));
  return it == index_.end() ? -1 : it->second;
}

std::vector<Token> Vocabulary::tokenize(std::string_view text) const {
  std::vector<Token> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = std::min(max_piece_, text.size() - pos);
    TokenId hit = -1;
    for (; len > 0; --len) {
      auto it = index_.find(std::string(text.substr(pos, len)));
      if (it != index_.end()) {
        hit = it->second;
        break;
      }
    }
    if (hit < 0) {
      throw TokenizationError("no vocabulary entry matches input at byte " + std::to_string(pos));
    }
    out.push_back({hit, texts_[static_cast<std::size_t>(hit)]});
    pos += len;
  }
  return out;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) out += text(id);
  return out;
}

std::vector<TokenId> ids_of(std::span<const Token> tokens) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(t.id);
  return ids;
}

}  // namespace cgr
