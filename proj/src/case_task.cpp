#include "kwmhn/case_task.hpp"

#include <numeric>
#include <ostream>

#include "kwmhn/errors.hpp"

namespace kwmhn {

std::uint32_t encode(Token t, std::uint32_t L) {
  if (t.letter >= L) throw ConfigError("letter type out of range");
  switch (t.kind) {
    case TokenKind::Lower: return t.letter;
    case TokenKind::Upper: return L + t.letter;
    case TokenKind::Query: return 2 * L + t.letter;
  }
  throw ConfigError("bad token kind");
}

Token decode(std::uint32_t index, std::uint32_t L) {
  if (L == 0 || index >= 3 * L) throw ConfigError("token index out of range");
  return Token{index % L, static_cast<TokenKind>(index / L)};
}

std::vector<double> CaseSequence::one_hot(std::size_t t) const {
  std::vector<double> v(dim(), 0.0);
  v[t < context.size() ? context[t] : query] = 1.0;
  return v;
}

CaseSequence gen_sequence(std::uint32_t L, std::uint32_t C, Rng& rng) {
  if (L < 1 || C < 1) throw ConfigError("L and C must be positive");
  if (C > L) throw ConfigError("context length C exceeds letter count L");
  std::vector<std::uint32_t> types(L);
  std::iota(types.begin(), types.end(), 0u);
  for (std::uint32_t i = 0; i < C; ++i) {
    const auto j = static_cast<std::uint32_t>(i + rng.below(L - i));
    std::swap(types[i], types[j]);
  }
  CaseSequence s;
  s.L = L;
  std::vector<bool> upper(C);
  for (std::uint32_t t = 0; t < C; ++t) {
    upper[t] = (rng() >> 63) != 0;
    s.context.push_back(encode({types[t], upper[t] ? TokenKind::Upper : TokenKind::Lower}, L));
  }
  const auto pos = static_cast<std::uint32_t>(rng.below(C));
  s.query = encode({types[pos], TokenKind::Query}, L);
  s.target = upper[pos] ? std::array<double, 2>{0.0, 1.0} : std::array<double, 2>{1.0, 0.0};
  return s;
}

std::vector<CaseSequence> gen_batch(std::uint32_t L, std::uint32_t C, std::uint32_t B, Rng& rng) {
  if (B < 1) throw ConfigError("batch size must be positive");
  std::vector<CaseSequence> out;
  out.reserve(B);
  for (std::uint32_t b = 0; b < B; ++b) out.push_back(gen_sequence(L, C, rng));
  return out;
}

void write_batch_csv(std::ostream& os, const std::vector<CaseSequence>& batch) {
  os << "seq_id,position,token_index,target\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const CaseSequence& s = batch[i];
    const int target = s.target[1] > s.target[0] ? 1 : 0;
    for (std::size_t t = 0; t < s.context.size(); ++t) {
      os << i << ',' << t << ',' << s.context[t] << ',' << target << '\n';
    }
    os << i << ',' << s.context.size() << ',' << s.query << ',' << target << '\n';
  }
}

}  // namespace kwmhn
