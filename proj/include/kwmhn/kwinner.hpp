#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kwmhn/patterns.hpp"
#include "kwmhn/rng.hpp"

namespace kwmhn {

struct KWinnerConfig {
  std::uint32_t n_v = 1000;
  double s_v = 0.1;
  std::uint32_t n_h = 100;
  std::uint32_t k_h = 1;
  double f = 1.0;
  double epsilon = 1.0;

  /// Throws ConfigError on any violated constraint.
  void validate() const;
  std::uint32_t k_v() const;
  std::uint32_t fan_in() const;
  /// Learnable weights: 2 * n_h * f * n_v.
  std::uint64_t parameter_count() const;
};

/// Indices of the k largest entries of v, sorted ascending. Ties go to the
/// lower index.
std::vector<std::uint32_t> kwta(const std::vector<float>& v, std::uint32_t k);

struct Retrieval {
  Pattern output;                    // k_v winners of W' z
  std::vector<std::uint32_t> hidden;  // k_h winners of W x
};

/// K-winner modern Hopfield network. Dense-matrix semantics with
/// W = M (.) F and W' = M' (.) F^T; masked weights are neither stored nor
/// touched.
class KWinnerMHN {
 public:
  KWinnerMHN(const KWinnerConfig& config, Rng& rng);

  const KWinnerConfig& config() const { return cfg_; }

  Retrieval retrieve(const Pattern& x) const;

  /// Stores x with the local update rule and returns the hidden winners.
  std::vector<std::uint32_t> learn(const Pattern& x);

  /// Retrieval-only mode; learn() throws std::logic_error afterwards.
  void freeze() { frozen_ = true; }
  void unfreeze() { frozen_ = false; }
  bool frozen() const { return frozen_; }

  std::uint64_t learn_calls() const { return learn_calls_; }
  /// Retrievals whose hidden drive was identically zero, so the winners were
  /// decided by index alone.
  std::uint64_t degenerate_activations() const {
    return degenerate_.load(std::memory_order_relaxed);
  }

  /// Dense views, for tests and checkpoints. Masked entries read as 0.
  float m(std::uint32_t i, std::uint32_t j) const;       // M_ij, i < n_h, j < n_v
  float m_back(std::uint32_t j, std::uint32_t i) const;  // M'_ji
  bool mask(std::uint32_t i, std::uint32_t j) const;
  const std::vector<std::uint32_t>& fan_in_row(std::uint32_t i) const { return fanin_[i]; }

  /// Header `n_h n_v f epsilon k_h`, then M (n_h rows), M' (n_v rows) and F
  /// (n_h rows) as whitespace-separated numbers.
  void write_checkpoint(std::ostream& os) const;

 private:
  std::vector<float> hidden_drive(const Pattern& x) const;
  std::vector<std::uint32_t> winners(const Pattern& x) const;

  KWinnerConfig cfg_;
  std::uint32_t k_v_;
  std::vector<std::vector<std::uint32_t>> fanin_;  // F row i as sorted indices
  std::vector<float> fmask_;  // F, n_h x n_v, 0/1
  std::vector<float> wt_;     // W^T, n_v x n_h
  std::vector<float> wr_;     // W'^T, n_h x n_v: row i is column i of W'
  bool frozen_ = false;
  std::uint64_t learn_calls_ = 0;
  mutable std::atomic<std::uint64_t> degenerate_{0};
};

}  // namespace kwmhn
