#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "kwmhn/rng.hpp"

namespace kwmhn {

enum class TokenKind { Lower, Upper, Query };

struct Token {
  std::uint32_t letter = 0;
  TokenKind kind = TokenKind::Lower;
  bool operator==(const Token&) const = default;
};

/// One-hot layout over D = 3L: [0, L) lowercase, [L, 2L) uppercase,
/// [2L, 3L) case-free query names.
std::uint32_t encode(Token t, std::uint32_t L);
Token decode(std::uint32_t index, std::uint32_t L);

/// Tokens are stored as one-hot indices.
struct CaseSequence {
  std::uint32_t L = 0;
  std::vector<std::uint32_t> context;
  std::uint32_t query = 0;
  std::array<double, 2> target{1.0, 0.0};  // [1, 0] lowercase, [0, 1] uppercase

  std::uint32_t dim() const { return 3 * L; }
  /// Dense one-hot column for context position t, or the query when t == C.
  std::vector<double> one_hot(std::size_t t) const;
};

/// C distinct letter types in uniformly random order, each cased with
/// probability 1/2, queried uniformly among the context types.
CaseSequence gen_sequence(std::uint32_t L, std::uint32_t C, Rng& rng);
std::vector<CaseSequence> gen_batch(std::uint32_t L, std::uint32_t C, std::uint32_t B, Rng& rng);

/// Rows seq_id,position,token_index,target; the query sits at position C and
/// target is 0 for lowercase, 1 for uppercase.
void write_batch_csv(std::ostream& os, const std::vector<CaseSequence>& batch);

}  // namespace kwmhn
