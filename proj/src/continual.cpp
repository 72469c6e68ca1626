#include "kwmhn/continual.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "kwmhn/errors.hpp"
#include "kwmhn/io.hpp"
#include "kwmhn/metrics.hpp"
#include "kwmhn/tgcrp.hpp"

namespace kwmhn {
namespace {

enum Stream : std::uint64_t {
  kData = 1,
  kModel = 2,
  kPseudo = 3,
  kUniform = 4,
  kShuffle = 5,
  kCue = 100,
};

KWinnerConfig make(std::uint32_t n_h, std::uint32_t k_h, double f, double eps) {
  KWinnerConfig c;
  c.n_v = 1000;
  c.s_v = 0.1;
  c.n_h = n_h;
  c.k_h = k_h;
  c.f = f;
  c.epsilon = eps;
  return c;
}

std::vector<Pattern> random_patterns(std::uint32_t count, std::uint32_t n_v, double s_v,
                                     Rng& rng) {
  std::vector<Pattern> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(gen_random_pattern(n_v, s_v, rng));
  return out;
}

RunResult score(const KWinnerConfig& model, const ExperimentConfig& exp, Rng& root,
                const std::vector<Pattern>& train, const std::vector<Pattern>& pseudo,
                const std::vector<Pattern>& uniform) {
  Rng model_rng = root.split(kModel);
  KWinnerMHN net(model, model_rng);
  for (const Pattern& p : train) net.learn(p);
  net.freeze();

  RunResult r;
  r.seed = root.seed();
  for (std::size_t ci = 0; ci < exp.cue_levels.size(); ++ci) {
    const double c = exp.cue_levels[ci];
    Rng cue_rng = root.split(kCue + ci);
    CueScores s;
    s.cue = c;
    s.real.reserve(exp.test_window);
    for (std::uint32_t a = 1; a <= exp.test_window; ++a) {
      const Pattern& x = train[train.size() - a];
      s.real.push_back(rho(net.retrieve(partial_cue(x, c, cue_rng)).output, x));
    }
    for (const Pattern& x : pseudo) {
      s.pseudo.push_back(rho(net.retrieve(partial_cue(x, c, cue_rng)).output, x));
    }
    for (const Pattern& x : uniform) {
      s.uniform_pseudo.push_back(rho(net.retrieve(partial_cue(x, c, cue_rng)).output, x));
    }
    r.scores.push_back(std::move(s));
  }
  r.learn_calls = net.learn_calls();
  r.degenerate = net.degenerate_activations();
  return r;
}

std::vector<double> column_mean(const std::vector<const std::vector<double>*>& rows) {
  if (rows.empty()) return {};
  std::vector<double> m(rows.front()->size(), 0.0);
  for (const auto* r : rows) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += (*r)[i];
  }
  for (double& v : m) v /= static_cast<double>(rows.size());
  return m;
}

}  // namespace

const std::vector<Preset>& memory_presets() {
  static const std::vector<Preset> presets{
      {"kw-f005", make(2000, 50, 0.05, 0.3), "K-winner, sparse fan-in"},
      {"kw-f01", make(1000, 50, 0.1, 0.3), "K-winner, doubled fan-in"},
      {"mhn", make(100, 1, 1.0, 1.0), "1-winner MHN, slot replacement"},
      {"mhn-graded", make(100, 1, 1.0, 0.3), "1-winner MHN, graded updates"},
      {"kw-lr02", make(2000, 50, 0.05, 0.2), "K-winner, lower learning rate"},
  };
  return presets;
}

KWinnerConfig memory_preset(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (const Preset& p : memory_presets()) {
    if (p.name == key) return p.config;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (test_window > seq_len) throw ConfigError("test window exceeds sequence length");
  if (runs < 1) throw ConfigError("runs must be at least 1");
  if (dprime_samples < 1) throw ConfigError("dprime samples must be at least 1");
  if (cue_levels.empty()) throw ConfigError("at least one cue level is required");
  for (double c : cue_levels) {
    if (!(c > 0.0 && c <= 1.0)) throw ConfigError("cue levels must lie in (0, 1]");
  }
  if (data == DataKind::Tgcrp && tree_nodes < 1) throw ConfigError("tree needs nodes");
}

RunResult run_single(const KWinnerConfig& model, const ExperimentConfig& exp,
                     std::uint64_t run_index) {
  exp.validate();
  model.validate();
  Rng root(derive_seed(exp.seed, run_index));
  Rng data_rng = root.split(kData);

  std::vector<Pattern> train, pseudo, uniform;
  if (exp.data == DataKind::Random) {
    train = random_patterns(exp.seq_len, model.n_v, model.s_v, data_rng);
    Rng pseudo_rng = root.split(kPseudo);
    pseudo = random_patterns(exp.test_window, model.n_v, model.s_v, pseudo_rng);
  } else {
    const std::uint32_t k = model.k_v();
    if (exp.b > k || exp.b > model.n_v - k) throw ConfigError("flip count b out of range");
    const std::size_t needed = static_cast<std::size_t>(exp.seq_len) + exp.test_window;
    std::uint32_t nodes = exp.tree_nodes;
    std::vector<Pattern> leaves;
    for (;;) {
      leaves = tgcrp_generate(nodes, model.n_v, model.s_v, exp.b, data_rng).leaves();
      if (leaves.size() >= needed) break;
      // Too few leaves: grow the tree and draw again.
      nodes = nodes + std::max<std::uint32_t>(nodes / 2, 1);
    }
    Rng shuffle_rng = root.split(kShuffle);
    for (std::size_t i = leaves.size() - 1; i > 0; --i) {
      std::swap(leaves[i], leaves[shuffle_rng.below(i + 1)]);
    }
    train.assign(leaves.begin(), leaves.begin() + exp.seq_len);
    pseudo.assign(leaves.begin() + exp.seq_len,
                  leaves.begin() + static_cast<std::ptrdiff_t>(needed));
    if (exp.pseudo == PseudoKind::Uniform) {
      Rng pseudo_rng = root.split(kPseudo);
      pseudo = random_patterns(exp.test_window, model.n_v, model.s_v, pseudo_rng);
    }
    if (exp.uniform_baseline) {
      Rng uniform_rng = root.split(kUniform);
      uniform = random_patterns(exp.test_window, model.n_v, model.s_v, uniform_rng);
    }
  }
  RunResult r = score(model, exp, root, train, pseudo, uniform);
  r.run_index = run_index;
  return r;
}

RunResult run_structured(const KWinnerConfig& model, std::uint32_t b, ExperimentConfig exp,
                         std::uint64_t run_index) {
  exp.data = DataKind::Tgcrp;
  exp.b = b;
  return run_single(model, exp, run_index);
}

std::vector<RunResult> run_many(const KWinnerConfig& model, const ExperimentConfig& exp,
                                unsigned jobs) {
  exp.validate();
  model.validate();
  std::vector<RunResult> results(exp.runs);
  jobs = std::max(1u, std::min<unsigned>(jobs, exp.runs));
  std::atomic<std::uint32_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::uint32_t i = next.fetch_add(1);
      if (i >= exp.runs) return;
      try {
        results[i] = run_single(model, exp, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(exp.runs);
        return;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_ranges(std::uint32_t runs,
                                                                   std::uint32_t samples) {
  const std::uint32_t groups = std::min(samples, runs / 2);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::uint32_t g = 0; g < groups; ++g) {
    const auto lo = static_cast<std::uint32_t>(std::uint64_t{g} * runs / groups);
    const auto hi = static_cast<std::uint32_t>(std::uint64_t{g + 1} * runs / groups);
    out.emplace_back(lo, hi);
  }
  return out;
}

std::vector<RetentionCurve> aggregate(const std::vector<RunResult>& results,
                                      const ExperimentConfig& exp) {
  if (results.empty()) throw InsufficientData("no runs to aggregate");
  std::vector<const RunResult*> ordered;
  for (const auto& r : results) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const RunResult* a, const RunResult* b) { return a->run_index < b->run_index; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->run_index == ordered[i - 1]->run_index) {
      // Identical copies are allowed; distinct results under one index are not.
      if (ordered[i]->seed != ordered[i - 1]->seed) throw IntegrityError("duplicate run index");
    }
  }
  const std::size_t cues = exp.cue_levels.size();
  for (const RunResult* r : ordered) {
    if (r->learn_calls != exp.seq_len) throw IntegrityError("run did not train exactly once per pattern");
    if (r->scores.size() != cues) throw IntegrityError("cue levels differ between runs");
    for (std::size_t ci = 0; ci < cues; ++ci) {
      const CueScores& s = r->scores[ci];
      if (s.cue != exp.cue_levels[ci] || s.real.size() != exp.test_window ||
          s.pseudo.size() != exp.test_window ||
          s.uniform_pseudo.size() != ordered.front()->scores[ci].uniform_pseudo.size()) {
        throw IntegrityError("mismatched ages between runs");
      }
    }
  }

  const auto ranges = sample_ranges(static_cast<std::uint32_t>(ordered.size()), exp.dprime_samples);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<RetentionCurve> curves;
  for (std::size_t ci = 0; ci < cues; ++ci) {
    RetentionCurve c;
    c.cue = exp.cue_levels[ci];
    c.runs = static_cast<std::uint32_t>(ordered.size());
    std::vector<const std::vector<double>*> real, pseudo, uniform;
    for (const RunResult* r : ordered) {
      real.push_back(&r->scores[ci].real);
      pseudo.push_back(&r->scores[ci].pseudo);
      if (!r->scores[ci].uniform_pseudo.empty()) uniform.push_back(&r->scores[ci].uniform_pseudo);
    }
    c.rho_real_mean = column_mean(real);
    c.rho_pseudo_mean = column_mean(pseudo);
    c.rho_uniform_mean = column_mean(uniform);
    const std::size_t ages = exp.test_window;
    c.rd_mean.resize(ages);
    c.dprime_mean.resize(ages);
    c.dprime_se.resize(ages);
    c.dprime_samples.resize(ages);
    c.sig_flag.assign(ages, 0);
    for (std::size_t a = 0; a < ages; ++a) {
      std::vector<std::vector<double>> groups;
      for (const auto& [lo, hi] : ranges) {
        std::vector<double> d;
        for (std::uint32_t i = lo; i < hi; ++i) d.push_back((*real[i])[a] - (*pseudo[i])[a]);
        groups.push_back(std::move(d));
      }
      if (groups.empty()) {
        double s = 0.0;
        for (std::size_t i = 0; i < real.size(); ++i) s += (*real[i])[a] - (*pseudo[i])[a];
        c.rd_mean[a] = s / static_cast<double>(real.size());
        c.dprime_mean[a] = nan;
        c.dprime_se[a] = nan;
        continue;
      }
      c.rd_mean[a] = raw_difference(groups);
      DPrimeSummary d = d_prime(groups);
      c.dprime_mean[a] = d.mean;
      c.dprime_se[a] = d.se;
      c.excluded_samples += d.excluded;
      c.dprime_samples[a] = std::move(d.samples);
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

void compare_curves(RetentionCurve& a, RetentionCurve& b, double alpha, bool paired) {
  a.sig_flag = significance_segments(a.dprime_samples, b.dprime_samples, alpha, paired);
  b.sig_flag.resize(a.sig_flag.size());
  for (std::size_t i = 0; i < a.sig_flag.size(); ++i) b.sig_flag[i] = -a.sig_flag[i];
}

void write_curve_csv(std::ostream& os, const RetentionCurve& curve) {
  const bool uniform = !curve.rho_uniform_mean.empty();
  os << "age,rho_real_mean,rho_pseudo_mean,rd_mean,dprime_mean,dprime_se,sig_flag";
  if (uniform) os << ",rho_uniform_mean";
  os << '\n';
  for (std::size_t a = 0; a < curve.rd_mean.size(); ++a) {
    os << (a + 1) << ',' << fmt_double(curve.rho_real_mean[a]) << ','
       << fmt_double(curve.rho_pseudo_mean[a]) << ',' << fmt_double(curve.rd_mean[a]) << ','
       << fmt_double(curve.dprime_mean[a]) << ',' << fmt_double(curve.dprime_se[a]) << ','
       << curve.sig_flag[a];
    if (uniform) os << ',' << fmt_double(curve.rho_uniform_mean[a]);
    os << '\n';
  }
}

}  // namespace kwmhn
