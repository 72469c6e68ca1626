#include "kwmhn/attention.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kwmhn/errors.hpp"

namespace kwmhn {
namespace {

using Vec2 = std::array<double, 2>;

void add_to_col(Matrix& m, std::size_t j, double alpha, const std::vector<double>& v) {
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) += alpha * v[i];
}

Vec2 wv_times(const Matrix& wv, const std::vector<double>& x) {
  const auto r = matvec(wv, x);
  return {r[0], r[1]};
}

int argmax2(const Vec2& v) {
  if (v[0] == v[1]) return -1;
  return v[0] > v[1] ? 0 : 1;
}

double uniform_in(Rng& rng, double hi) { return hi * rng.uniform(); }

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::FixedWK: return "fixed-wk";
    case Variant::MhnWK: return "mhn-wk";
    case Variant::QKAlign: return "qk-align";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (Variant v : {Variant::Baseline, Variant::FixedWK, Variant::MhnWK, Variant::QKAlign}) {
    if (variant_name(v) == key) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

double FastWeights::checksum() const {
  double s = 0.0;
  double w = 1.0;
  for (const Matrix* m : {&hk, &vh, &ih, &hi}) {
    for (double v : m->data()) {
      s += w * v;
      w += 1.0;
    }
  }
  return s;
}

Matrix input_projection(std::uint32_t n_h, std::uint32_t L) {
  if (n_h < L) throw ConfigError("input projections need n_h >= L");
  Matrix hi(n_h, 3 * L, 0.0);
  if (n_h >= 2 * L) {
    for (std::uint32_t i = 0; i < 2 * L; ++i) hi(i, i) = 1.0;
  } else {
    for (std::uint32_t l = 0; l < L; ++l) {
      hi(l, l) = 1.0;
      hi(l, L + l) = 1.0;
    }
  }
  return hi;
}

FastWeights init_fast(std::uint32_t n_h, std::uint32_t N, std::uint32_t L, bool proj, Rng& rng,
                      double hk_hi) {
  const std::uint32_t D = 3 * L;
  FastWeights f;
  f.vh = Matrix(2, n_h);
  f.ih = Matrix(D, n_h);
  f.hk = Matrix(n_h, N, 0.0);
  for (double& v : f.vh.data()) v = rng.uniform();
  for (double& v : f.ih.data()) v = rng.uniform();
  if (proj) {
    f.hi = input_projection(n_h, L);
  } else {
    for (double& v : f.hk.data()) v = uniform_in(rng, hk_hi);
  }
  return f;
}

std::uint32_t argmax_lowest(const std::vector<double>& v) {
  std::uint32_t best = 0;
  for (std::uint32_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> s(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = std::exp(logits[i] - mx);
    z += s[i];
  }
  for (double& v : s) v /= z;
  return s;
}

double sq_error(const Vec2& yhat, const Vec2& y) {
  const double a = yhat[0] - y[0];
  const double b = yhat[1] - y[1];
  return a * a + b * b;
}

Gradients Gradients::zeros_like(const SlowWeights& w) {
  return Gradients{Matrix(w.wq.rows(), w.wq.cols()), Matrix(w.wk.rows(), w.wk.cols()),
                   Matrix(w.wv.rows(), w.wv.cols())};
}

BaselineCache baseline_forward(const SlowWeights& w, const CaseSequence& seq, double beta) {
  BaselineCache c;
  c.q = w.wq.col(seq.query);
  std::vector<double> logits;
  for (std::uint32_t x : seq.context) {
    c.keys.push_back(w.wk.col(x));
    c.values.push_back({w.wv(0, x), w.wv(1, x)});
    logits.push_back(beta * dot(c.q, c.keys.back()));
  }
  c.s = softmax(logits);
  c.yhat = {0.0, 0.0};
  for (std::size_t t = 0; t < c.s.size(); ++t) {
    c.yhat[0] += c.s[t] * c.values[t][0];
    c.yhat[1] += c.s[t] * c.values[t][1];
  }
  return c;
}

void baseline_grads(const SlowWeights& w, const CaseSequence& seq, const BaselineCache& c,
                    double beta, Gradients& g) {
  (void)w;
  const Vec2 e{c.yhat[0] - seq.target[0], c.yhat[1] - seq.target[1]};
  for (std::size_t i = 0; i < seq.context.size(); ++i) {
    const std::uint32_t x = seq.context[i];
    g.wv(0, x) += 2.0 * c.s[i] * e[0];
    g.wv(1, x) += 2.0 * c.s[i] * e[1];
    const double u = 2.0 * c.s[i] *
                     (e[0] * (c.values[i][0] - c.yhat[0]) + e[1] * (c.values[i][1] - c.yhat[1]));
    add_to_col(g.wk, x, u * beta, c.q);
    add_to_col(g.wq, seq.query, u * beta, c.keys[i]);
  }
}

std::uint32_t fast_store_step(FastWeights& f, const std::vector<double>& k, const Vec2& v,
                              std::uint32_t x_index) {
  std::vector<double> drive = matvec(f.hk, k);
  if (!f.hi.empty()) {
    for (std::size_t r = 0; r < drive.size(); ++r) drive[r] += f.hi(r, x_index);
  }
  const std::uint32_t r = argmax_lowest(drive);
  std::copy(k.begin(), k.end(), f.hk.row(r));
  f.vh(0, r) = v[0];
  f.vh(1, r) = v[1];
  for (std::size_t d = 0; d < f.ih.rows(); ++d) f.ih(d, r) = d == x_index ? 1.0 : 0.0;
  return r;
}

std::vector<std::uint32_t> store_context(const SlowWeights& w, FastWeights& f,
                                         const CaseSequence& seq) {
  std::vector<std::uint32_t> winners;
  for (std::uint32_t x : seq.context) {
    winners.push_back(fast_store_step(f, w.wk.col(x), {w.wv(0, x), w.wv(1, x)}, x));
  }
  return winners;
}

QueryCache query_forward(const SlowWeights& w, const FastWeights& f, std::uint32_t x_q) {
  QueryCache c;
  c.q = w.wq.col(x_q);
  c.s = softmax(matvec(f.hk, c.q));
  c.x_tilde = matvec(f.ih, c.s);
  c.yhat = wv_times(w.wv, c.x_tilde);
  c.yval = wv_times(f.vh, c.s);
  return c;
}

void mhn_grads_qv(const SlowWeights& w, const FastWeights& f, const CaseSequence& seq,
                  const QueryCache& c, Gradients& g) {
  const std::vector<double> e{c.yhat[0] - seq.target[0], c.yhat[1] - seq.target[1]};
  add_outer(g.wv, 2.0, e, c.x_tilde);
  const std::size_t n_h = f.hk.rows();
  std::vector<double> coef(n_h);
  for (std::size_t m = 0; m < n_h; ++m) {
    const std::vector<double> item = f.ih.col(m);
    const Vec2 pv = wv_times(w.wv, item);
    coef[m] = 2.0 * c.s[m] * (e[0] * (pv[0] - c.yhat[0]) + e[1] * (pv[1] - c.yhat[1]));
  }
  add_to_col(g.wq, seq.query, 1.0, matvec_t(f.hk, coef));
}

double wk_grad_mhn(const SlowWeights& w, const FastWeights& f, const CaseSequence& seq,
                   const QueryCache& c, Gradients& g) {
  const std::vector<double> k_tilde = matvec(w.wk, c.x_tilde);
  const std::vector<double> s_k = softmax(matvec(f.hk, k_tilde));
  const Vec2 y_k = wv_times(f.vh, s_k);
  const Vec2 e{y_k[0] - seq.target[0], y_k[1] - seq.target[1]};
  const std::size_t n_h = f.hk.rows();
  std::vector<double> coef(n_h);
  for (std::size_t m = 0; m < n_h; ++m) {
    coef[m] = 2.0 * s_k[m] * (e[0] * (f.vh(0, m) - y_k[0]) + e[1] * (f.vh(1, m) - y_k[1]));
  }
  add_outer(g.wk, 1.0, matvec_t(f.hk, coef), c.x_tilde);
  return e[0] * e[0] + e[1] * e[1];
}

double wk_grad_qk(const SlowWeights& w, const QueryCache& c, Gradients& g) {
  std::vector<double> r = matvec(w.wk, c.x_tilde);
  double loss = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] -= c.q[i];
    loss += r[i] * r[i];
  }
  add_outer(g.wk, 2.0, r, c.x_tilde);
  return loss;
}

double mhn_loss_qv(const SlowWeights& w, const FastWeights& f, const CaseSequence& seq) {
  return sq_error(query_forward(w, f, seq.query).yhat, seq.target);
}

double mhn_loss_wk(const SlowWeights& w, const FastWeights& f, const CaseSequence& seq,
                   const std::vector<double>& x_tilde) {
  const std::vector<double> s_k = softmax(matvec(f.hk, matvec(w.wk, x_tilde)));
  return sq_error(wv_times(f.vh, s_k), seq.target);
}

double qk_loss(const SlowWeights& w, const std::vector<double>& x_tilde,
               const std::vector<double>& q) {
  const std::vector<double> k = matvec(w.wk, x_tilde);
  double loss = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) loss += (k[i] - q[i]) * (k[i] - q[i]);
  return loss;
}

void TrainConfig::validate() const {
  if (L < 1 || C < 1 || C > L) throw ConfigError("need 1 <= C <= L");
  if (batch < 1 || N < 1) throw ConfigError("batch size and N must be positive");
  if (variant != Variant::Baseline) {
    if (n_h < 1) throw ConfigError("MHN variants need n_h >= 1");
    if (proj && n_h < L) throw ConfigError("input projections need n_h >= L");
  } else if (proj) {
    throw ConfigError("the baseline transformer has no input projections");
  }
  if (eta_q < 0 || eta_k < 0 || eta_v < 0) throw ConfigError("learning rates must be >= 0");
  if (snapshot_every < 1) throw ConfigError("snapshot interval must be positive");
}

TrainConfig train_preset(Variant v, bool proj) {
  TrainConfig c;
  c.variant = v;
  c.proj = proj;
  switch (v) {
    case Variant::Baseline:
      c.N = 10;
      c.eta_q = c.eta_k = c.eta_v = 1e-3;
      c.proj = false;
      break;
    case Variant::FixedWK:
      c.N = 50;
      c.n_h = 10;
      c.eta_q = c.eta_v = 1e-3;
      c.eta_k = 0.0;
      break;
    case Variant::MhnWK:
      c.N = 50;
      c.n_h = 16;
      c.eta_q = c.eta_k = c.eta_v = 5e-3;
      break;
    case Variant::QKAlign:
      c.N = 50;
      c.n_h = 16;
      c.eta_q = c.eta_v = 5e-3;
      c.eta_k = 1e-4;
      break;
  }
  return c;
}

BlockStats block_stats(const Matrix& m) {
  BlockStats b;
  double on = 0.0, off = 0.0;
  std::size_t n_on = 0, n_off = 0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (i == j) {
        on += m(i, j);
        ++n_on;
      } else {
        off += m(i, j);
        ++n_off;
      }
    }
  }
  b.on_mean = n_on ? on / static_cast<double>(n_on) : 0.0;
  b.off_mean = n_off ? off / static_cast<double>(n_off) : 0.0;
  return b;
}

StructureReport probe_structure(const SlowWeights& w, std::uint32_t L) {
  if (w.wk.cols() != 3 * L) throw ConfigError("weights do not match L");
  const Matrix kk = gram(w.wk, w.wk);
  const Matrix qk = gram(w.wq, w.wk);
  StructureReport r;
  r.wv_letters = Matrix(2, 2 * L);
  r.key_upper_lower = Matrix(L, L);
  r.query_lower = Matrix(L, L);
  r.query_upper = Matrix(L, L);
  double dist = 0.0;
  for (std::uint32_t j = 0; j < 2 * L; ++j) {
    r.wv_letters(0, j) = w.wv(0, j);
    r.wv_letters(1, j) = w.wv(1, j);
    const double t0 = j < L ? 1.0 : 0.0;
    dist += std::hypot(w.wv(0, j) - t0, w.wv(1, j) - (1.0 - t0));
  }
  r.wv_case_distance = dist / (2.0 * L);
  for (std::uint32_t l = 0; l < L; ++l) {
    for (std::uint32_t m = 0; m < L; ++m) {
      r.key_upper_lower(l, m) = kk(L + l, m);
      r.query_lower(l, m) = qk(2 * L + l, m);
      r.query_upper(l, m) = qk(2 * L + l, L + m);
    }
  }
  r.key_stats = block_stats(r.key_upper_lower);
  r.query_lower_stats = block_stats(r.query_lower);
  r.query_upper_stats = block_stats(r.query_upper);
  return r;
}

std::int64_t TrainTrace::first_above(double thr) const {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (acc[i] > thr) return static_cast<std::int64_t>(i);
  }
  return -1;
}

double TrainTrace::mean_acc_last(std::size_t n) const {
  n = std::min(n, acc.size());
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = acc.size() - n; i < acc.size(); ++i) s += acc[i];
  return s / static_cast<double>(n);
}

double TrainTrace::mean_loss_last(std::size_t n) const {
  n = std::min(n, loss.size());
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = loss.size() - n; i < loss.size(); ++i) s += loss[i];
  return s / static_cast<double>(n);
}

SlowWeights init_slow(const TrainConfig& cfg, Rng& rng) {
  const std::uint32_t D = 3 * cfg.L;
  double sd = cfg.qk_init_sd;
  if (sd <= 0.0) {
    sd = cfg.variant == Variant::Baseline ? 1.0 / (4.0 * std::sqrt(static_cast<double>(cfg.N)))
                                          : 1.0 / std::sqrt(static_cast<double>(cfg.N));
  }
  SlowWeights w{Matrix(cfg.N, D), Matrix(cfg.N, D), Matrix(2, D)};
  for (double& v : w.wq.data()) v = rng.normal(0.0, sd);
  for (double& v : w.wk.data()) v = rng.normal(0.0, sd);
  for (double& v : w.wv.data()) v = uniform_in(rng, cfg.wv_init_hi);
  return w;
}

std::array<double, 4> train_step(const TrainConfig& cfg, SlowWeights& w,
                                 const std::vector<CaseSequence>& batch, Rng& fast_rng,
                                 std::uint64_t* ties) {
  Gradients g = Gradients::zeros_like(w);
  double correct = 0.0, loss = 0.0, train_loss = 0.0, k_loss = 0.0;
  const double beta =
      cfg.beta > 0.0 ? cfg.beta : 1.0 / std::sqrt(static_cast<double>(cfg.N));
  for (const CaseSequence& seq : batch) {
    Vec2 reported;
    if (cfg.variant == Variant::Baseline) {
      const BaselineCache c = baseline_forward(w, seq, beta);
      reported = c.yhat;
      train_loss += sq_error(c.yhat, seq.target);
      baseline_grads(w, seq, c, beta, g);
    } else {
      FastWeights f = init_fast(cfg.n_h, cfg.N, cfg.L, cfg.proj, fast_rng, cfg.hk_init_hi);
      store_context(w, f, seq);
      const QueryCache c = query_forward(w, f, seq.query);
      reported = c.yval;
      train_loss += sq_error(c.yhat, seq.target);
      mhn_grads_qv(w, f, seq, c, g);
      if (cfg.variant == Variant::MhnWK) k_loss += wk_grad_mhn(w, f, seq, c, g);
      if (cfg.variant == Variant::QKAlign) k_loss += wk_grad_qk(w, c, g);
    }
    loss += sq_error(reported, seq.target);
    const int pred = argmax2(reported);
    if (pred < 0) {
      if (ties) ++*ties;
    } else if (pred == argmax2(seq.target)) {
      correct += 1.0;
    }
  }
  if (!(loss <= cfg.divergence_limit) || !(train_loss <= cfg.divergence_limit) ||
      !(k_loss <= cfg.divergence_limit)) {
    throw std::runtime_error("training diverged: batch loss exceeds the limit");
  }
  add_scaled(w.wq, -cfg.eta_q, g.wq);
  add_scaled(w.wv, -cfg.eta_v, g.wv);
  if (cfg.variant != Variant::FixedWK) add_scaled(w.wk, -cfg.eta_k, g.wk);
  return {correct / static_cast<double>(batch.size()), loss, train_loss, k_loss};
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  Rng init_rng = root.split(1);
  Rng batch_rng = root.split(2);
  Rng fast_rng = root.split(3);
  TrainResult res;
  res.weights = init_slow(cfg, init_rng);
  TrainTrace& tr = res.trace;
  tr.snapshots.emplace_back(0, probe_structure(res.weights, cfg.L));
  for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
    const auto batch = gen_batch(cfg.L, cfg.C, cfg.batch, batch_rng);
    const auto r = train_step(cfg, res.weights, batch, fast_rng, &tr.argmax_ties);
    tr.acc.push_back(r[0]);
    tr.loss.push_back(r[1]);
    tr.train_loss.push_back(r[2]);
    tr.k_loss.push_back(r[3]);
    const std::uint32_t done = it + 1;
    if (done % cfg.snapshot_every == 0 || done == cfg.iterations) {
      tr.snapshots.emplace_back(done, probe_structure(res.weights, cfg.L));
    }
  }
  return res;
}

LearningOrder learning_order(const TrainTrace& trace) {
  LearningOrder lo;
  if (trace.snapshots.size() < 2) throw InsufficientData("learning order needs snapshots");
  const StructureReport& first = trace.snapshots.front().second;
  const StructureReport& last = trace.snapshots.back().second;
  auto wv_gain = [&](const StructureReport& r) {
    return first.wv_case_distance - r.wv_case_distance;
  };
  auto key_gain = [&](const StructureReport& r) {
    return (r.key_stats.on_mean - r.key_stats.off_mean) -
           (first.key_stats.on_mean - first.key_stats.off_mean);
  };
  const double wv_final = wv_gain(last);
  const double key_final = key_gain(last);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  lo.acc_cross = trace.first_above(0.95);
  for (const auto& [iter, rep] : trace.snapshots) {
    if (lo.wv_half_iter < 0 && wv_final > 0 && wv_gain(rep) >= 0.5 * wv_final) lo.wv_half_iter = iter;
    if (lo.key_half_iter < 0 && key_final > 0 && key_gain(rep) >= 0.5 * key_final) {
      lo.key_half_iter = iter;
    }
  }
  if (lo.acc_cross >= 0) {
    for (const auto& [iter, rep] : trace.snapshots) {
      if (static_cast<std::int64_t>(iter) >= lo.acc_cross) {
        lo.snapshot_iter = iter;
        lo.wv_progress = wv_final > 0 ? wv_gain(rep) / wv_final : nan;
        lo.key_progress = key_final > 0 ? key_gain(rep) / key_final : nan;
        break;
      }
    }
  }
  return lo;
}

WvCheckResult wv_convergence_check(const WvCheckConfig& cfg) {
  if (cfg.C < 1 || cfg.C > cfg.L || cfg.N < 1 || cfg.batch < 1) {
    throw ConfigError("invalid W_V convergence setup");
  }
  const std::uint32_t L = cfg.L;
  const std::uint32_t D = 3 * L;
  WvCheckResult res;
  const double gamma = static_cast<double>(cfg.C) / (2.0 * L);
  res.eta_bound = static_cast<double>(cfg.C) * cfg.C / (2.0 * gamma * D);
  if (!(cfg.eta >= 0.0 && cfg.eta < res.eta_bound)) {
    throw ConfigError("step size violates eta < C^2 / (2 gamma d)");
  }
  Rng root(cfg.seed);
  Rng init_rng = root.split(1);
  Rng batch_rng = root.split(2);
  const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.N));
  SlowWeights w{Matrix(cfg.N, D), Matrix(cfg.N, D), Matrix(2, D)};
  for (double& v : w.wq.data()) v = init_rng.normal(0.0, sd);
  for (double& v : w.wk.data()) v = init_rng.normal(0.0, sd);
  for (double& v : w.wv.data()) v = 0.1 * init_rng.uniform();

  const double scale = 1.0 / static_cast<double>(cfg.batch);
  for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
    const auto batch = gen_batch(L, cfg.C, cfg.batch, batch_rng);
    Matrix g(2, D);
    for (const CaseSequence& seq : batch) {
      const BaselineCache c = baseline_forward(w, seq, 1.0);
      const Vec2 e{c.yhat[0] - seq.target[0], c.yhat[1] - seq.target[1]};
      for (std::size_t i = 0; i < seq.context.size(); ++i) {
        g(0, seq.context[i]) += c.s[i] * e[0];
        g(1, seq.context[i]) += c.s[i] * e[1];
      }
    }
    // d/dW_V of (1/2B) sum ||y_hat - y||^2.
    add_scaled(w.wv, -cfg.eta * scale, g);
  }

  res.wv = w.wv;
  std::vector<Vec2> centred(2 * L);
  Vec2 mean{0.0, 0.0};
  for (std::uint32_t j = 0; j < 2 * L; ++j) {
    const double t0 = j < L ? 1.0 : 0.0;
    const double d = std::hypot(w.wv(0, j) - t0, w.wv(1, j) - (1.0 - t0));
    res.column_distance.push_back(d);
    res.max_distance = std::max(res.max_distance, d);
    mean[0] += w.wv(0, j) / (2.0 * L);
    mean[1] += w.wv(1, j) / (2.0 * L);
  }
  for (std::uint32_t j = 0; j < 2 * L; ++j) {
    centred[j] = {w.wv(0, j) - mean[0], w.wv(1, j) - mean[1]};
  }
  res.min_like_dot = std::numeric_limits<double>::infinity();
  res.max_opposite_dot = -std::numeric_limits<double>::infinity();
  for (std::uint32_t a = 0; a < 2 * L; ++a) {
    for (std::uint32_t b = a + 1; b < 2 * L; ++b) {
      const double d = centred[a][0] * centred[b][0] + centred[a][1] * centred[b][1];
      if ((a < L) == (b < L)) {
        res.min_like_dot = std::min(res.min_like_dot, d);
      } else {
        res.max_opposite_dot = std::max(res.max_opposite_dot, d);
      }
    }
  }
  return res;
}

}  // namespace kwmhn
