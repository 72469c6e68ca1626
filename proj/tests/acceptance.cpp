// Acceptance suite: runs every criterion at full scale and prints one
// PASS/FAIL line per criterion. Exit status is nonzero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kwmhn/attention.hpp"
#include "kwmhn/cli.hpp"
#include "kwmhn/continual.hpp"
#include "kwmhn/io.hpp"
#include "kwmhn/metrics.hpp"
#include "kwmhn/patterns.hpp"
#include "kwmhn/tgcrp.hpp"

using namespace kwmhn;
namespace fs = std::filesystem;

namespace {

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Memory {
  std::vector<RunResult> runs;
  std::vector<RetentionCurve> curves;
};

Memory run_memory(const char* preset, ExperimentConfig e, bool structured = false) {
  Memory m;
  const KWinnerConfig cfg = memory_preset(preset);
  if (structured) {
    m.runs.resize(e.runs);
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(jobs(), e.runs);
    for (unsigned w = 0; w < n; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint32_t i = w; i < e.runs; i += n) m.runs[i] = run_structured(cfg, e.b, e, i);
      });
    }
    for (auto& t : pool) t.join();
  } else {
    m.runs = run_many(cfg, e, jobs());
  }
  m.curves = aggregate(m.runs, e);
  return m;
}

ExperimentConfig full_scale(std::uint32_t runs, std::uint32_t samples) {
  ExperimentConfig e;
  e.runs = runs;
  e.dprime_samples = samples;
  e.seed = 2024;
  return e;
}

// Per-run mean pseudo score, then mean and standard error over runs.
std::pair<double, double> pseudo_mean_se(const std::vector<RunResult>& runs, std::size_t ci) {
  std::vector<double> per;
  for (const auto& r : runs) {
    double s = 0.0;
    for (double v : r.scores[ci].pseudo) s += v;
    per.push_back(s / static_cast<double>(r.scores[ci].pseudo.size()));
  }
  double m = 0.0;
  for (double v : per) m += v;
  m /= per.size();
  double ss = 0.0;
  for (double v : per) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (per.size() - 1)) / std::sqrt(double(per.size()))};
}

std::size_t longest_run(const std::vector<int>& flags, std::size_t lo, std::size_t hi, int want) {
  std::size_t best = 0, cur = 0;
  for (std::size_t i = lo; i <= hi && i < flags.size(); ++i) {
    cur = flags[i] == want ? cur + 1 : 0;
    best = std::max(best, cur);
  }
  return best;
}

// Fraction of ages in [lo, hi] (1-based) where pred(a_dprime, b_dprime) holds,
// over ages where both are finite.
double majority(const RetentionCurve& a, const RetentionCurve& b, std::size_t lo, std::size_t hi,
                const std::function<bool(double, double)>& pred) {
  std::size_t yes = 0, n = 0;
  for (std::size_t age = lo; age <= hi && age <= a.dprime_mean.size(); ++age) {
    const double x = a.dprime_mean[age - 1], y = b.dprime_mean[age - 1];
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    ++n;
    yes += pred(x, y);
  }
  return n ? static_cast<double>(yes) / n : 0.0;
}

struct Shared {
  Memory mhn, kw;
  std::vector<TrainResult> baseline, qk, fixed;
};

Outcome c1(Shared& s) {
  const DecayFit f = exp_regression(s.mhn.curves[0].rd_mean, 200);
  const double beta = -std::log1p(-1.0 / 100.0);
  const bool ok = std::abs(f.beta - beta) <= 0.002 && std::abs(f.C - 0.809) <= 0.04 && f.r2 >= 0.95;
  return {ok, fmt("fit C=%.4f beta=%.5f r2=%.3f (target C 0.809+-0.04, beta %.5f+-0.002, r2>=0.95)",
                  f.C, f.beta, f.r2, beta)};
}

Outcome c2(Shared& s) {
  bool ok = true;
  std::string d;
  for (std::size_t ci = 0; ci < 2; ++ci) {
    const double c = s.mhn.curves[ci].cue;
    const auto [m, se] = pseudo_mean_se(s.mhn.runs, ci);
    const double formula = mhn_theory_baseline(1000, 0.1, 100, c);
    const double z = (m - formula) / se;
    ok = ok && std::abs(z) <= 3.0;
    d += fmt("c=%g pseudo=%.5f se=%.5f formula=%.4f z=%.1f; ", c, m, se, formula, z);
  }
  return {ok, d};
}

Outcome c3(Shared& s) {
  std::size_t bad = 0;
  for (const auto& r : s.mhn.runs) bad += r.scores[0].real[0] != 1.0;
  return {bad == 0, fmt("%zu of %zu runs below rho=1 at age 1", bad, s.mhn.runs.size())};
}

Outcome c4(Shared& s) {
  RetentionCurve kw = s.kw.curves[0], mhn = s.mhn.curves[0];
  compare_curves(kw, mhn);
  const std::size_t run = longest_run(kw.sig_flag, 49, 499, 1);
  std::int64_t first = -1;
  for (std::size_t i = 0; i < kw.sig_flag.size(); ++i) {
    if (kw.sig_flag[i] == 1) {
      first = static_cast<std::int64_t>(i + 1);
      break;
    }
  }
  RetentionCurve kw5 = s.kw.curves[1], mhn5 = s.mhn.curves[1];
  compare_curves(kw5, mhn5);
  std::int64_t first5 = -1;
  for (std::size_t i = 0; i < kw5.sig_flag.size(); ++i) {
    if (kw5.sig_flag[i] == 1) {
      first5 = static_cast<std::int64_t>(i + 1);
      break;
    }
  }
  const bool ok = run * 2 > 451 && first >= 1 && first <= 30;
  return {ok, fmt("c=1: longest KW-higher segment in [50,500] = %zu/451 ages, first KW-higher "
                  "age %lld; c=0.5 first age %lld",
                  run, static_cast<long long>(first), static_cast<long long>(first5))};
}

Outcome c5(Shared& s) {
  bool ok = true;
  std::string d;
  for (std::size_t ci = 0; ci < 2; ++ci) {
    const DecayFit k = exp_regression(s.kw.curves[ci].rd_mean, 200);
    const DecayFit m = exp_regression(s.mhn.curves[ci].rd_mean, 200);
    ok = ok && k.beta < m.beta && k.C < m.C;
    d += fmt("c=%g KW (C=%.3f, beta=%.4f) MHN (C=%.3f, beta=%.4f); ", s.kw.curves[ci].cue, k.C,
             k.beta, m.C, m.beta);
  }
  return {ok, d};
}

Outcome c6(Shared&) {
  std::vector<double> sims;
  std::string d;
  Rng root(77);
  for (std::uint32_t b : {5u, 10u, 15u, 20u, 30u}) {
    Rng rng = root.split(b);
    const PatternTree tree = tgcrp_generate(14000, 1000, 0.1, b, rng);
    sims.push_back(mean_pairwise_similarity(tree.leaves()));
    d += fmt("b=%u: %.4f ", b, sims.back());
  }
  bool ok = std::abs(sims.front() - 0.49) <= 0.05 && std::abs(sims.back() - 0.10) <= 0.03;
  for (std::size_t i = 1; i < sims.size(); ++i) ok = ok && sims[i] < sims[i - 1];
  return {ok, d};
}

Outcome c7(Shared&) {
  ExperimentConfig e = full_scale(100, 10);
  e.data = DataKind::Tgcrp;
  e.cue_levels = {1.0};
  e.b = 5;
  const Memory m5 = run_memory("mhn", e, true);
  const Memory k5 = run_memory("kw-f005", e, true);
  e.b = 15;
  const Memory m15 = run_memory("mhn", e, true);
  const Memory k15 = run_memory("kw-f005", e, true);
  const double low = majority(m5.curves[0], k5.curves[0], 1, 1000,
                              [](double a, double b) { return a >= b; });
  const double high = majority(k15.curves[0], m15.curves[0], 50, 500,
                               [](double a, double b) { return a > b; });
  return {low > 0.5 && high > 0.5,
          fmt("b=5: MHN d' >= KW d' at %.1f%% of ages 1-1000; b=15: KW d' > MHN d' at %.1f%% of "
              "ages 50-500",
              100 * low, 100 * high)};
}

double rel_fd(Matrix& m, const Matrix& g, const std::function<double()>& f) {
  const double h = 1e-5;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    const double keep = m.data()[i];
    m.data()[i] = keep + h;
    const double up = f();
    m.data()[i] = keep - h;
    const double down = f();
    m.data()[i] = keep;
    const double fd = (up - down) / (2 * h);
    num += (fd - g.data()[i]) * (fd - g.data()[i]);
    den += fd * fd;
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

Outcome c8(Shared&) {
  Rng rng(808);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const auto L = static_cast<std::uint32_t>(2 + rng.below(3));
    const auto C = static_cast<std::uint32_t>(2 + rng.below(L - 1));
    TrainConfig cfg;
    cfg.variant = Variant::MhnWK;
    cfg.L = L;
    cfg.C = C;
    cfg.N = static_cast<std::uint32_t>(4 + rng.below(5));
    cfg.wv_init_hi = 1.0;
    SlowWeights w = init_slow(cfg, rng);
    const CaseSequence seq = gen_sequence(L, C, rng);
    const double beta = 1.0 / std::sqrt(static_cast<double>(cfg.N));

    Gradients gb = Gradients::zeros_like(w);
    baseline_grads(w, seq, baseline_forward(w, seq, beta), beta, gb);
    auto lb = [&] { return sq_error(baseline_forward(w, seq, beta).yhat, seq.target); };
    worst = std::max({worst, rel_fd(w.wq, gb.wq, lb), rel_fd(w.wk, gb.wk, lb),
                      rel_fd(w.wv, gb.wv, lb)});

    const bool proj = rng.below(2) == 1;
    const auto n_h = static_cast<std::uint32_t>((proj ? L : 1) + rng.below(2 * L));
    FastWeights f = init_fast(n_h, cfg.N, L, proj, rng);
    store_context(w, f, seq);
    const QueryCache c = query_forward(w, f, seq.query);
    // fixed-wk trains W_Q and W_V through the same path.
    Gradients gq = Gradients::zeros_like(w);
    mhn_grads_qv(w, f, seq, c, gq);
    auto lq = [&] { return mhn_loss_qv(w, f, seq); };
    worst = std::max({worst, rel_fd(w.wq, gq.wq, lq), rel_fd(w.wv, gq.wv, lq)});
    Gradients gk = Gradients::zeros_like(w);
    wk_grad_mhn(w, f, seq, c, gk);
    worst = std::max(worst, rel_fd(w.wk, gk.wk, [&] { return mhn_loss_wk(w, f, seq, c.x_tilde); }));
    Gradients ga = Gradients::zeros_like(w);
    wk_grad_qk(w, c, ga);
    worst = std::max(worst, rel_fd(w.wk, ga.wk, [&] { return qk_loss(w, c.x_tilde, c.q); }));
  }
  return {worst < 1e-5, fmt("max relative error %.3g over 100 instances", worst)};
}

Outcome c9(Shared&) {
  Rng rng(909);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const auto L = static_cast<std::uint32_t>(2 + rng.below(4));
    TrainConfig cfg;
    cfg.variant = Variant::MhnWK;
    cfg.L = L;
    cfg.C = L;
    cfg.N = 50;
    cfg.wv_init_hi = 1.0;
    const SlowWeights w = init_slow(cfg, rng);
    const CaseSequence seq = gen_sequence(L, L, rng);
    FastWeights f = init_fast(L, cfg.N, L, true, rng);
    store_context(w, f, seq);
    const auto yq = query_forward(w, f, seq.query).yval;
    const auto yb = baseline_forward(w, seq, 1.0).yhat;
    worst = std::max({worst, std::abs(yq[0] - yb[0]), std::abs(yq[1] - yb[1])});
  }
  return {worst <= 1e-6, fmt("max |difference| %.3g over 1000 sequences", worst)};
}

std::vector<TrainResult> train_runs(Variant v, bool proj, std::uint32_t runs) {
  std::vector<TrainResult> out(runs);
  std::vector<std::thread> pool;
  const unsigned n = std::min<unsigned>(jobs(), runs);
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back([&, w] {
      for (std::uint32_t i = w; i < runs; i += n) {
        TrainConfig c = train_preset(v, proj);
        c.seed = derive_seed(31, i);
        out[i] = train(c);
      }
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

Outcome c10(Shared& s) {
  int base_ok = 0, qk_ok = 0;
  for (const auto& r : s.baseline) base_ok += r.trace.mean_acc_last(1000) >= 0.99;
  std::string firsts;
  for (const auto& r : s.qk) {
    const auto first = r.trace.first_above(0.95);
    qk_ok += r.trace.mean_acc_last(1000) >= 0.99 && first >= 0 && first < 1500;
    firsts += fmt("%lld ", static_cast<long long>(first + 1));
  }
  return {base_ok >= 9 && qk_ok >= 8,
          fmt("baseline %d/10 runs >= 0.99; qk-align+proj %d/10 (first >0.95 at: %s)", base_ok,
              qk_ok, firsts.c_str())};
}

Outcome c11(Shared& s) {
  double lon = 0, loff = 0, uon = 0, uoff = 0, kon = 0, koff = 0;
  for (const auto& r : s.qk) {
    const auto& p = r.trace.snapshots.back().second;
    lon += p.query_lower_stats.on_mean / s.qk.size();
    loff += p.query_lower_stats.off_mean / s.qk.size();
    uon += p.query_upper_stats.on_mean / s.qk.size();
    uoff += p.query_upper_stats.off_mean / s.qk.size();
  }
  for (const auto& r : s.fixed) {
    const auto& p = r.trace.snapshots.back().second;
    kon += p.key_stats.on_mean / s.fixed.size();
    koff += p.key_stats.off_mean / s.fixed.size();
  }
  const bool ok = lon >= 5 && uon >= 5 && loff <= 0 && uoff <= 0 && std::abs(kon - koff) < 0.5;
  return {ok, fmt("qk-align query-lower on/off %.3f/%.3f, query-upper %.3f/%.3f; fixed-wk key "
                  "upper-lower on/off %.4f/%.4f",
                  lon, loff, uon, uoff, kon, koff)};
}

Outcome c12(Shared&) {
  const WvCheckResult r = wv_convergence_check(WvCheckConfig{});
  const bool ok = r.max_distance < 0.05 && r.min_like_dot > 0 && r.max_opposite_dot < 0;
  return {ok, fmt("max column distance %.4f, min like-case dot %.4f, max opposite-case dot %.4f",
                  r.max_distance, r.min_like_dot, r.max_opposite_dot)};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".csv") out[e.path().filename().string()] = read_file(e.path());
  }
  return out;
}

Outcome c13(Shared&) {
  const fs::path root = fs::path(KWMHN_TEST_TMP) / "acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::map<std::string, std::string>> mem, att;
  bool codes = true;
  for (const char* j : {"1", "3", "1"}) {
    const fs::path d = root / (std::string("mem_j") + j + std::to_string(mem.size()));
    std::ostringstream out, err;
    codes = codes && cli::run({"run-memory", "--preset", "kw-f01", "--compare", "mhn", "--runs",
                               "6", "--dprime-samples", "3", "--seq-len", "1000",
                               "--test-window", "200", "--seed", "13", "--jobs", j, "--out-dir",
                               d.string()},
                              out, err) == 0;
    mem.push_back(csv_files(d));
    const fs::path a = root / (std::string("att_j") + j + std::to_string(att.size()));
    codes = codes && cli::run({"run-attention", "--variant", "mhn-wk", "--proj", "on", "--runs",
                               "3", "--iterations", "100", "--seed", "13", "--jobs", j,
                               "--out-dir", a.string()},
                              out, err) == 0;
    att.push_back(csv_files(a));
  }
  const bool same = !mem[0].empty() && !att[0].empty() && mem[0] == mem[1] && mem[0] == mem[2] &&
                    att[0] == att[1] && att[0] == att[2];
  return {codes && same, fmt("%zu memory and %zu attention CSVs compared over jobs 1/3/1",
                             mem[0].size(), att[0].size())};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  Shared s;
  s.mhn = run_memory("mhn", full_scale(200, 10));
  s.kw = run_memory("kw-f005", full_scale(200, 10));
  s.baseline = train_runs(Variant::Baseline, false, 10);
  s.qk = train_runs(Variant::QKAlign, true, 10);
  s.fixed = train_runs(Variant::FixedWK, true, 10);

  const std::vector<std::function<Outcome(Shared&)>> checks{c1, c2, c3, c4,  c5,  c6, c7,
                                                           c8, c9, c10, c11, c12, c13};
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i](s);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("CRITERION %2zu: %s  %s\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed (%.0f s)\n", failed, checks.size(),
              std::chrono::duration<double>(clock::now() - t0).count());
  return failed ? 1 : 0;
}
