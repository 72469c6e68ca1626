#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kwmhn/case_task.hpp"
#include "kwmhn/matrix.hpp"
#include "kwmhn/rng.hpp"

namespace kwmhn {

enum class Variant { Baseline, FixedWK, MhnWK, QKAlign };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct SlowWeights {
  Matrix wq;  // N x D
  Matrix wk;  // N x D
  Matrix wv;  // 2 x D
};

struct FastWeights {
  Matrix hk;  // n_h x N, stored keys in rows
  Matrix vh;  // 2 x n_h, stored values in columns
  Matrix ih;  // D x n_h, stored items in columns
  Matrix hi;  // n_h x D input projection; empty when disabled

  double checksum() const;
};

/// Fixed input projection. With n_h >= 2L the first 2L x 2L block is the
/// identity. With L <= n_h < 2L hidden unit l receives both cases of letter
/// l, so distinct context letters still get distinct units.
Matrix input_projection(std::uint32_t n_h, std::uint32_t L);

/// Fresh per-sequence fast weights: W_VH, W_IH ~ U[0, 1); W_HK ~ U[0, hk_hi)
/// without projections and 0 with them.
FastWeights init_fast(std::uint32_t n_h, std::uint32_t N, std::uint32_t L, bool proj, Rng& rng,
                      double hk_hi = 0.5);

/// Index of the largest entry; ties go to the lower index.
std::uint32_t argmax_lowest(const std::vector<double>& v);
std::vector<double> softmax(const std::vector<double>& logits);

// ---- baseline transformer ------------------------------------------------

struct BaselineCache {
  std::vector<double> q;
  std::vector<std::vector<double>> keys;
  std::vector<std::array<double, 2>> values;
  std::vector<double> s;
  std::array<double, 2> yhat{};
};

/// y_hat = sum_t softmax(beta q^T k_t) v_t over the context positions.
BaselineCache baseline_forward(const SlowWeights& w, const CaseSequence& seq, double beta);

struct Gradients {
  Matrix wq, wk, wv;
  static Gradients zeros_like(const SlowWeights& w);
};

/// Adds this sequence's gradients of ||y_hat - y||^2 to g.
void baseline_grads(const SlowWeights& w, const CaseSequence& seq, const BaselineCache& c,
                    double beta, Gradients& g);
double sq_error(const std::array<double, 2>& yhat, const std::array<double, 2>& y);

// ---- fast-weight MHN variants ---------------------------------------------

/// One context step: winner = 1-WTA(W_HK k + W_HI x); the winner's key row,
/// value column and item column are overwritten. Returns the winner.
std::uint32_t fast_store_step(FastWeights& f, const std::vector<double>& k,
                              const std::array<double, 2>& v, std::uint32_t x_index);

/// Stores every context item of seq using the current slow weights.
std::vector<std::uint32_t> store_context(const SlowWeights& w, FastWeights& f,
                                         const CaseSequence& seq);

struct QueryCache {
  std::vector<double> q;
  std::vector<double> s;       // softmax(W_HK q)
  std::vector<double> x_tilde;  // W_IH s
  std::array<double, 2> yhat{};  // W_V x_tilde, trained
  std::array<double, 2> yval{};  // W_VH s, reported
};

QueryCache query_forward(const SlowWeights& w, const FastWeights& f, std::uint32_t x_q);

/// Adds gradients of ||W_V x_tilde - y||^2 for W_Q and W_V; fast weights are
/// constants.
void mhn_grads_qv(const SlowWeights& w, const FastWeights& f, const CaseSequence& seq,
                  const QueryCache& c, Gradients& g);

/// L_K = ||W_VH softmax(W_HK W_K x_tilde) - y||^2 with fast weights and
/// x_tilde held constant. Adds dL_K/dW_K to g and returns L_K.
double wk_grad_mhn(const SlowWeights& w, const FastWeights& f, const CaseSequence& seq,
                   const QueryCache& c, Gradients& g);

/// L_K = ||W_K x_tilde - q||^2 with q a constant target. Adds dL_K/dW_K to g
/// and returns L_K.
double wk_grad_qk(const SlowWeights& w, const QueryCache& c, Gradients& g);

/// Loss functions for finite-difference checks (fast weights fixed).
double mhn_loss_qv(const SlowWeights& w, const FastWeights& f, const CaseSequence& seq);
double mhn_loss_wk(const SlowWeights& w, const FastWeights& f, const CaseSequence& seq,
                   const std::vector<double>& x_tilde);
double qk_loss(const SlowWeights& w, const std::vector<double>& x_tilde,
               const std::vector<double>& q);

// ---- training -------------------------------------------------------------

struct TrainConfig {
  Variant variant = Variant::Baseline;
  bool proj = false;
  std::uint32_t L = 4;
  std::uint32_t C = 4;
  std::uint32_t batch = 64;
  std::uint32_t iterations = 5000;
  std::uint32_t N = 10;
  std::uint32_t n_h = 0;
  double eta_q = 1e-3;
  double eta_k = 1e-3;
  double eta_v = 1e-3;
  double qk_init_sd = 0.0;  // 0 selects the variant default
  double wv_init_hi = 0.1;
  double hk_init_hi = 0.5;
  double beta = 0.0;        // baseline only; 0 selects 1/sqrt(N)
  std::uint32_t snapshot_every = 100;
  double divergence_limit = 1e6;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Published hyperparameters for a variant.
TrainConfig train_preset(Variant v, bool proj);

struct BlockStats {
  double on_mean = 0.0;
  double off_mean = 0.0;
};

struct StructureReport {
  Matrix wv_letters;    // 2 x 2L
  Matrix key_upper_lower;  // (W_K^T W_K)[upper l, lower m]
  Matrix query_lower;   // (W_Q^T W_K)[query l, lower m]
  Matrix query_upper;   // (W_Q^T W_K)[query l, upper m]
  BlockStats key_stats, query_lower_stats, query_upper_stats;
  double wv_case_distance = 0.0;  // mean over letter columns of ||col - case one-hot||
};

StructureReport probe_structure(const SlowWeights& w, std::uint32_t L);
BlockStats block_stats(const Matrix& m);

struct TrainTrace {
  std::vector<double> acc;         // on y_val (y_hat for the baseline)
  std::vector<double> loss;        // summed squared error on the reported output
  std::vector<double> train_loss;  // summed squared error on the trained output
  std::vector<double> k_loss;      // summed L_K (mhn-wk, qk-align)
  std::vector<std::pair<std::uint32_t, StructureReport>> snapshots;
  std::uint64_t argmax_ties = 0;

  /// First iteration (0-based) with accuracy above thr, or -1.
  std::int64_t first_above(double thr) const;
  double mean_acc_last(std::size_t n) const;
  double mean_loss_last(std::size_t n) const;
};

struct TrainResult {
  TrainTrace trace;
  SlowWeights weights;
};

SlowWeights init_slow(const TrainConfig& cfg, Rng& rng);

/// Batch gradient descent with freshly sampled batches. Throws
/// std::runtime_error when the loss exceeds the divergence limit.
TrainResult train(const TrainConfig& cfg);

/// One training step on a batch; returns {accuracy, loss, train_loss, k_loss}
/// and updates w in place. Exposed for tests.
std::array<double, 4> train_step(const TrainConfig& cfg, SlowWeights& w,
                                 const std::vector<CaseSequence>& batch, Rng& fast_rng,
                                 std::uint64_t* ties = nullptr);

/// Order in which case structure (W_V) and letter identity (W_K^T W_K) emerge.
struct LearningOrder {
  std::int64_t acc_cross = -1;         // first iteration above 95% accuracy
  std::uint32_t snapshot_iter = 0;     // snapshot used for the comparison
  double wv_progress = 0.0;            // fraction of final W_V gain reached
  double key_progress = 0.0;           // fraction of final key-contrast gain reached
  std::int64_t wv_half_iter = -1;      // first snapshot with half the final W_V gain
  std::int64_t key_half_iter = -1;     // same for the key contrast
};

LearningOrder learning_order(const TrainTrace& trace);

// ---- W_V convergence with frozen queries and keys -------------------------

struct WvCheckConfig {
  std::uint32_t L = 4;
  std::uint32_t C = 2;
  std::uint32_t N = 200;
  std::uint32_t batch = 1024;
  std::uint32_t iterations = 2000;
  double eta = 0.5;
  std::uint64_t seed = 1;
};

struct WvCheckResult {
  std::vector<double> column_distance;  // per letter column
  double max_distance = 0.0;
  double min_like_dot = 0.0;       // over like-case pairs of centred columns
  double max_opposite_dot = 0.0;   // over opposite-case pairs of centred columns
  double eta_bound = 0.0;          // C^2 / (2 gamma d)
  Matrix wv;
};

/// Baseline transformer with beta = 1 and W_Q, W_K frozen at N(0, 1/N)
/// entries; only W_V is trained on the batch-mean loss (1/2B) sum ||.||^2.
WvCheckResult wv_convergence_check(const WvCheckConfig& cfg);

}  // namespace kwmhn
