#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kwmhn/rng.hpp"

namespace kwmhn {

/// Binary vector of length n stored as the sorted indices of its 1-bits.
/// Partial cues reuse the type with fewer active bits.
struct Pattern {
  std::uint32_t n = 0;
  std::vector<std::uint32_t> active;

  std::size_t k() const { return active.size(); }
  std::vector<std::uint64_t> bitset() const;
  std::vector<float> dense() const;
  bool operator==(const Pattern&) const = default;
};

/// Number of active bits for sparsity s_v. Throws ConfigError when the count
/// rounds to 0, exceeds n_v, or rounding moves the sparsity by more than 1%.
std::uint32_t active_count(std::uint32_t n_v, double s_v);

/// k distinct indices drawn uniformly from [0, n), sorted ascending.
std::vector<std::uint32_t> sample_indices(std::uint32_t n, std::uint32_t k, Rng& rng);

/// Size of the intersection of two patterns' supports.
std::uint32_t overlap(const Pattern& a, const Pattern& b);

Pattern gen_random_pattern(std::uint32_t n_v, double s_v, Rng& rng);

/// Moves b uniformly chosen 1-bits to b uniformly chosen 0-bits. b = 0 copies.
Pattern bit_flipped(const Pattern& p, std::uint32_t b, Rng& rng);

/// Keeps round(c * k) uniformly chosen 1-bits of p.
Pattern partial_cue(const Pattern& p, double c, Rng& rng);

struct SimilarityStats {
  double mean_overlap = 0.0;  // raw dot product
  double mean_similarity = 0.0;  // dot product / k_v
  std::uint64_t pairs = 0;
};

/// Mean over unordered pairs. All patterns must share n and k (k_v).
SimilarityStats pairwise_similarity(const std::vector<Pattern>& patterns);
double mean_pairwise_similarity(const std::vector<Pattern>& patterns);

/// Text format: '#' comment lines, then one pattern per line as
/// whitespace-separated sorted active indices. A "# n_v <n>" comment fixes
/// the vector length.
void write_patterns(std::ostream& os, const std::vector<Pattern>& patterns);
std::vector<Pattern> read_patterns(std::istream& is);

}  // namespace kwmhn
