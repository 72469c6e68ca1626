#include "kwmhn/tgcrp.hpp"

#include <ostream>

#include "kwmhn/errors.hpp"

namespace kwmhn {

std::vector<std::uint32_t> PatternTree::leaf_indices() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].children.empty()) out.push_back(i);
  }
  return out;
}

std::vector<Pattern> PatternTree::leaves() const {
  std::vector<Pattern> out;
  for (std::uint32_t i : leaf_indices()) out.push_back(nodes[i].pattern);
  return out;
}

PatternTree tgcrp_generate(std::uint32_t num_data, std::uint32_t n_v, double s_v,
                           std::uint32_t b, Rng& rng) {
  if (num_data < 1) throw ConfigError("num_data must be at least 1");
  const std::uint32_t k = active_count(n_v, s_v);
  if (b > k || b > n_v - k) throw ConfigError("flip count b out of range");

  PatternTree tree;
  tree.nodes.reserve(num_data);
  tree.nodes.push_back(TreeNode{gen_random_pattern(n_v, s_v, rng), -1, {}, 1});

  std::vector<std::uint32_t> path;
  while (tree.nodes.size() < num_data) {
    path.clear();
    std::uint32_t x = tree.root;
    for (;;) {
      path.push_back(x);
      const TreeNode& node = tree.nodes[x];
      std::uint64_t u = rng.below(node.size);
      std::int64_t next = -1;
      for (std::uint32_t c : node.children) {
        const std::uint64_t n_l = tree.nodes[c].size;
        if (u < n_l) {
          next = c;
          break;
        }
        u -= n_l;
      }
      if (next < 0) break;
      x = static_cast<std::uint32_t>(next);
    }
    const auto id = static_cast<std::uint32_t>(tree.nodes.size());
    Pattern child = bit_flipped(tree.nodes[x].pattern, b, rng);
    tree.nodes.push_back(TreeNode{std::move(child), x, {}, 1});
    tree.nodes[x].children.push_back(id);
    for (std::uint32_t v : path) ++tree.nodes[v].size;
  }
  return tree;
}

void write_edges(std::ostream& os, const PatternTree& tree) {
  for (std::uint32_t i = 0; i < tree.nodes.size(); ++i) {
    if (tree.nodes[i].parent >= 0) os << i << ' ' << tree.nodes[i].parent << '\n';
  }
}

}  // namespace kwmhn
