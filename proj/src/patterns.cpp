#include "kwmhn/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "kwmhn/errors.hpp"
#include "kwmhn/simd/kernels.hpp"

namespace kwmhn {

std::vector<std::uint64_t> Pattern::bitset() const {
  std::vector<std::uint64_t> words((n + 63) / 64, 0);
  for (std::uint32_t i : active) words[i >> 6] |= std::uint64_t{1} << (i & 63);
  return words;
}

std::vector<float> Pattern::dense() const {
  std::vector<float> v(n, 0.0f);
  for (std::uint32_t i : active) v[i] = 1.0f;
  return v;
}

std::uint32_t active_count(std::uint32_t n_v, double s_v) {
  if (n_v == 0) throw ConfigError("n_v must be positive");
  if (!(s_v > 0.0 && s_v <= 1.0)) throw ConfigError("s_v must lie in (0, 1]");
  const double exact = s_v * n_v;
  const double k = std::round(exact);
  if (k < 1.0 || k > n_v) {
    throw ConfigError("s_v * n_v rounds to " + std::to_string(static_cast<long long>(k)) +
                      " active bits");
  }
  if (std::abs(k - exact) > 0.01 * exact) {
    throw ConfigError("s_v * n_v = " + std::to_string(exact) + " is not close to an integer");
  }
  return static_cast<std::uint32_t>(k);
}

std::vector<std::uint32_t> sample_indices(std::uint32_t n, std::uint32_t k, Rng& rng) {
  if (k > n) throw ConfigError("cannot sample more indices than available");
  // Floyd's algorithm followed by a sort.
  std::vector<char> taken(n, 0);
  std::vector<std::uint32_t> out;
  out.reserve(k);
  for (std::uint32_t j = n - k; j < n; ++j) {
    auto t = static_cast<std::uint32_t>(rng.below(std::uint64_t{j} + 1));
    if (taken[t]) t = j;
    taken[t] = 1;
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint32_t overlap(const Pattern& a, const Pattern& b) {
  std::uint32_t count = 0;
  auto i = a.active.begin();
  auto j = b.active.begin();
  while (i != a.active.end() && j != b.active.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

Pattern gen_random_pattern(std::uint32_t n_v, double s_v, Rng& rng) {
  const std::uint32_t k = active_count(n_v, s_v);
  return Pattern{n_v, sample_indices(n_v, k, rng)};
}

Pattern bit_flipped(const Pattern& p, std::uint32_t b, Rng& rng) {
  const auto k = static_cast<std::uint32_t>(p.k());
  if (b > k || b > p.n - k) throw ConfigError("flip count b out of range");
  if (b == 0) return p;

  std::vector<std::uint32_t> inactive;
  inactive.reserve(p.n - k);
  {
    auto it = p.active.begin();
    for (std::uint32_t i = 0; i < p.n; ++i) {
      if (it != p.active.end() && *it == i) {
        ++it;
      } else {
        inactive.push_back(i);
      }
    }
  }
  const auto off = sample_indices(k, b, rng);
  const auto on = sample_indices(static_cast<std::uint32_t>(inactive.size()), b, rng);

  std::vector<std::uint32_t> bits;
  bits.reserve(k);
  std::size_t o = 0;
  for (std::uint32_t i = 0; i < k; ++i) {
    if (o < off.size() && off[o] == i) {
      ++o;
      continue;
    }
    bits.push_back(p.active[i]);
  }
  for (std::uint32_t idx : on) bits.push_back(inactive[idx]);
  std::sort(bits.begin(), bits.end());
  return Pattern{p.n, std::move(bits)};
}

Pattern partial_cue(const Pattern& p, double c, Rng& rng) {
  if (!(c > 0.0 && c <= 1.0)) throw ConfigError("cue fraction must lie in (0, 1]");
  const double kept = std::round(c * static_cast<double>(p.k()));
  if (kept < 1.0) throw ConfigError("cue keeps no active bits");
  const auto m = static_cast<std::uint32_t>(kept);
  if (m == p.k()) return p;
  const auto pick = sample_indices(static_cast<std::uint32_t>(p.k()), m, rng);
  Pattern out{p.n, {}};
  out.active.reserve(m);
  for (std::uint32_t i : pick) out.active.push_back(p.active[i]);
  return out;
}

SimilarityStats pairwise_similarity(const std::vector<Pattern>& patterns) {
  if (patterns.size() < 2) throw InsufficientData("similarity needs at least two patterns");
  const std::uint32_t n = patterns.front().n;
  const std::size_t k = patterns.front().k();
  for (const Pattern& p : patterns) {
    if (p.n != n || p.k() != k) throw ConfigError("patterns differ in length or activity");
  }
  if (k == 0) throw ConfigError("patterns have no active bits");

  const std::size_t words = (n + 63) / 64;
  std::vector<std::uint64_t> packed(words * patterns.size());
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    const auto w = patterns[i].bitset();
    std::copy(w.begin(), w.end(), packed.begin() + static_cast<std::ptrdiff_t>(i * words));
  }
  const auto& kern = simd::active();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    const std::uint64_t* a = packed.data() + i * words;
    for (std::size_t j = i + 1; j < patterns.size(); ++j) {
      total += kern.and_popcount(a, packed.data() + j * words, words);
    }
  }
  SimilarityStats s;
  s.pairs = static_cast<std::uint64_t>(patterns.size()) * (patterns.size() - 1) / 2;
  s.mean_overlap = static_cast<double>(total) / static_cast<double>(s.pairs);
  s.mean_similarity = s.mean_overlap / static_cast<double>(k);
  return s;
}

double mean_pairwise_similarity(const std::vector<Pattern>& patterns) {
  return pairwise_similarity(patterns).mean_similarity;
}

void write_patterns(std::ostream& os, const std::vector<Pattern>& patterns) {
  const std::uint32_t n = patterns.empty() ? 0 : patterns.front().n;
  os << "# n_v " << n << '\n';
  for (const Pattern& p : patterns) {
    for (std::size_t i = 0; i < p.active.size(); ++i) {
      if (i) os << ' ';
      os << p.active[i];
    }
    os << '\n';
  }
}

std::vector<Pattern> read_patterns(std::istream& is) {
  std::vector<Pattern> out;
  std::uint32_t n = 0;
  bool have_n = false;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      if (hs >> key && key == "n_v" && hs >> n) have_n = true;
      continue;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Pattern p;
    long long v;
    while (ls >> v) {
      if (v < 0) throw IntegrityError("negative index in pattern file");
      p.active.push_back(static_cast<std::uint32_t>(v));
    }
    if (!ls.eof()) throw IntegrityError("non-numeric token in pattern file");
    if (!std::is_sorted(p.active.begin(), p.active.end()) ||
        std::adjacent_find(p.active.begin(), p.active.end()) != p.active.end()) {
      throw IntegrityError("pattern indices must be strictly increasing");
    }
    out.push_back(std::move(p));
  }
  if (!have_n) throw IntegrityError("pattern file lacks an n_v header");
  for (Pattern& p : out) {
    if (!p.active.empty() && p.active.back() >= n) throw IntegrityError("index exceeds n_v");
    p.n = n;
  }
  return out;
}

}  // namespace kwmhn
