#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "kwmhn/patterns.hpp"

namespace kwmhn {

struct TreeNode {
  Pattern pattern;
  std::int64_t parent = -1;
  std::vector<std::uint32_t> children;
  std::uint64_t size = 1;  // 1 + number of descendants
};

struct PatternTree {
  std::vector<TreeNode> nodes;
  std::uint32_t root = 0;

  std::vector<std::uint32_t> leaf_indices() const;
  std::vector<Pattern> leaves() const;
};

/// Tree-generating Chinese restaurant process. Each new node descends from the
/// root; at node X it enters existing child l with probability N_l / size(X)
/// and stops to become a new child of X with probability 1 / size(X), where
/// N_l is the child's subtree size. A new child is bit_flipped(X, b).
PatternTree tgcrp_generate(std::uint32_t num_data, std::uint32_t n_v, double s_v,
                           std::uint32_t b, Rng& rng);

/// Edge list as "child parent" lines.
void write_edges(std::ostream& os, const PatternTree& tree);

}  // namespace kwmhn
