#include "kwmhn/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "kwmhn/attention.hpp"
#include "kwmhn/case_task.hpp"
#include "kwmhn/continual.hpp"
#include "kwmhn/errors.hpp"
#include "kwmhn/io.hpp"
#include "kwmhn/metrics.hpp"
#include "kwmhn/patterns.hpp"
#include "kwmhn/simd/kernels.hpp"
#include "kwmhn/tgcrp.hpp"

namespace kwmhn::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// JSON has no NaN; non-finite numbers become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string cue_tag(double c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", c);
  return buf;
}

// Collects outputs and writes the manifest last.
class Emitter {
 public:
  explicit Emitter(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    write_file(dir_ / name, content);
    outputs_.push_back({{"path", name}, {"git_blob_sha1", git_blob_hash(content)}});
  }

  void input(const fs::path& path) {
    inputs_.push_back({{"path", path.string()}, {"git_blob_sha1", git_blob_hash_file(path)}});
  }

  void finish(json manifest, const std::string& name = "manifest.json") {
    manifest["inputs"] = inputs_;
    manifest["outputs"] = outputs_;
    write_file(dir_ / name, manifest.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  json outputs_ = json::array();
  json inputs_ = json::array();
};

json base_manifest(const std::string& command, const std::vector<std::string>& argv) {
  json m;
  m["tool"] = "kwmhn";
  m["command"] = command;
  m["argv"] = argv;
  m["isa"] = std::string(simd::isa_name(simd::active().isa));
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json model_json(const KWinnerConfig& c) {
  return {{"n_v", c.n_v}, {"s_v", c.s_v}, {"n_h", c.n_h}, {"k_h", c.k_h},
          {"f", c.f},     {"epsilon", c.epsilon}, {"k_v", c.k_v()},
          {"parameters", c.parameter_count()}};
}

// ---------------------------------------------------------------- presets

void cmd_presets(bool as_json, std::ostream& out) {
  json j;
  for (const Preset& p : memory_presets()) {
    json e = model_json(p.config);
    e["name"] = p.name;
    e["note"] = p.note;
    j["memory"].push_back(e);
  }
  for (Variant v : {Variant::Baseline, Variant::FixedWK, Variant::MhnWK, Variant::QKAlign}) {
    const TrainConfig t = train_preset(v, v != Variant::Baseline);
    j["attention"].push_back({{"variant", std::string(variant_name(v))},
                              {"N", t.N},
                              {"n_h", t.n_h},
                              {"eta_q", t.eta_q},
                              {"eta_k", t.eta_k},
                              {"eta_v", t.eta_v},
                              {"batch", t.batch},
                              {"iterations", t.iterations}});
  }
  if (as_json) {
    out << j.dump(2) << "\n";
    return;
  }
  char line[200];
  out << "memory presets (n_v = 1000, s_v = 0.1)\n";
  std::snprintf(line, sizeof line, "  %-11s %6s %6s %5s %8s %10s  %s\n", "name", "n_h", "k_h",
                "f", "epsilon", "params", "note");
  out << line;
  for (const Preset& p : memory_presets()) {
    std::snprintf(line, sizeof line, "  %-11s %6u %6u %5g %8g %10llu  %s\n", p.name.c_str(),
                  p.config.n_h, p.config.k_h, p.config.f, p.config.epsilon,
                  static_cast<unsigned long long>(p.config.parameter_count()), p.note.c_str());
    out << line;
  }
  out << "attention presets (L = 4, C = 4, batch 64, 5000 iterations)\n";
  std::snprintf(line, sizeof line, "  %-9s %4s %4s %8s %8s %8s\n", "variant", "N", "n_h", "eta_q",
                "eta_k", "eta_v");
  out << line;
  for (const auto& a : j["attention"]) {
    std::snprintf(line, sizeof line, "  %-9s %4u %4u %8g %8g %8g\n",
                  a["variant"].get<std::string>().c_str(), a["N"].get<unsigned>(),
                  a["n_h"].get<unsigned>(), a["eta_q"].get<double>(), a["eta_k"].get<double>(),
                  a["eta_v"].get<double>());
    out << line;
  }
}

// ---------------------------------------------------------------- gen-data

struct GenArgs {
  std::string kind = "random";
  std::uint32_t n_v = 1000;
  double s_v = 0.1;
  std::uint32_t b = 5;
  std::uint32_t num_data = 14000;
  std::uint64_t seed = 1;
  std::string out;
  bool leaves_only = false;
  bool similarity = false;
  std::uint32_t L = 4;
  std::uint32_t C = 4;
};

void cmd_gen_data(const GenArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (a.out.empty()) throw ConfigError("--out is required");
  const fs::path path(a.out);
  Emitter em(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  json m = base_manifest("gen-data", argv);
  m["config"] = {{"kind", a.kind}, {"n_v", a.n_v}, {"s_v", a.s_v}, {"b", a.b},
                 {"num_data", a.num_data}, {"leaves_only", a.leaves_only}};
  m["seeds"] = {{"seed", a.seed}};
  Rng rng(a.seed);
  json report;

  if (a.kind == "case") {
    m["config"] = {{"kind", a.kind}, {"L", a.L}, {"C", a.C}, {"batch", a.num_data}};
    if (a.C < 1 || a.C > a.L) throw ConfigError("need 1 <= C <= L");
    std::ostringstream os;
    write_batch_csv(os, gen_batch(a.L, a.C, a.num_data, rng));
    em.write(path.filename().string(), os.str());
  } else {
    std::vector<Pattern> patterns;
    if (a.kind == "random") {
      if (!(a.s_v > 0.0 && a.s_v < 1.0) || a.n_v == 0) throw ConfigError("need n_v >= 1, 0 < s_v < 1");
      for (std::uint32_t i = 0; i < a.num_data; ++i) {
        patterns.push_back(gen_random_pattern(a.n_v, a.s_v, rng));
      }
    } else if (a.kind == "tgcrp") {
      const PatternTree tree = tgcrp_generate(a.num_data, a.n_v, a.s_v, a.b, rng);
      if (a.leaves_only) {
        patterns = tree.leaves();
      } else {
        for (const TreeNode& n : tree.nodes) patterns.push_back(n.pattern);
        std::ostringstream es;
        write_edges(es, tree);
        em.write(path.filename().string() + ".edges", es.str());
      }
      report["leaves"] = tree.leaf_indices().size();
    } else {
      throw ConfigError("--kind must be random, tgcrp or case");
    }
    std::ostringstream os;
    write_patterns(os, patterns);
    em.write(path.filename().string(), os.str());
    report["patterns"] = patterns.size();
    if (a.similarity && patterns.size() >= 2) {
      const SimilarityStats s = pairwise_similarity(patterns);
      report["mean_similarity"] = num(s.mean_similarity);
      report["mean_overlap"] = num(s.mean_overlap);
      report["pairs"] = s.pairs;
    }
  }
  m["report"] = report;
  m["wall_clock_seconds"] = seconds_since(t0);
  em.finish(m, path.filename().string() + ".manifest.json");
  out << report.dump() << "\n";
}

// ---------------------------------------------------------------- run-memory

struct MemoryArgs {
  std::string preset = "mhn";
  std::string compare;
  std::string data = "random";
  std::uint32_t b = 0;
  std::uint32_t runs = 200;
  std::uint32_t samples = 10;
  std::uint32_t seq_len = 4000;
  std::uint32_t test_window = 1000;
  std::uint32_t tree_nodes = 14000;
  std::vector<double> cues{1.0, 0.5};
  std::uint64_t seed = 1;
  std::string pseudo = "same";
  bool uniform_baseline = false;
  bool paired = false;
  double alpha = 0.01;
  std::uint32_t fit_max_age = 200;
  std::string out_dir = "out";
  unsigned jobs = default_jobs();
};

ExperimentConfig experiment_from(const MemoryArgs& a) {
  ExperimentConfig e;
  if (a.data == "random") {
    e.data = DataKind::Random;
  } else if (a.data.rfind("tgcrp", 0) == 0) {
    e.data = DataKind::Tgcrp;
    e.b = a.b;
    if (a.data.size() > 5) {
      if (a.data[5] != ':') throw ConfigError("--data must be random or tgcrp:<b>");
      try {
        e.b = static_cast<std::uint32_t>(std::stoul(a.data.substr(6)));
      } catch (const std::exception&) {
        throw ConfigError("--data must be random or tgcrp:<b>");
      }
    }
  } else {
    throw ConfigError("--data must be random or tgcrp:<b>");
  }
  e.tree_nodes = a.tree_nodes;
  e.seq_len = a.seq_len;
  e.test_window = a.test_window;
  e.cue_levels = a.cues;
  e.runs = a.runs;
  e.dprime_samples = a.samples;
  e.seed = a.seed;
  if (a.pseudo == "same") {
    e.pseudo = PseudoKind::SameDistribution;
  } else if (a.pseudo == "uniform") {
    e.pseudo = PseudoKind::Uniform;
  } else {
    throw ConfigError("--pseudo must be same or uniform");
  }
  e.uniform_baseline = a.uniform_baseline;
  for (double c : e.cue_levels) {
    if (!(c > 0.0 && c <= 1.0)) throw ConfigError("cue levels must lie in (0, 1]");
  }
  e.validate();
  return e;
}

json segments_json(const std::vector<int>& flags) {
  json out = json::array();
  std::size_t i = 0;
  while (i < flags.size()) {
    std::size_t j = i;
    while (j + 1 < flags.size() && flags[j + 1] == flags[i]) ++j;
    if (flags[i] != 0) out.push_back({{"first_age", i + 1}, {"last_age", j + 1}, {"flag", flags[i]}});
    i = j + 1;
  }
  return out;
}

json fit_json(const std::vector<double>& rd, std::uint32_t max_age) {
  try {
    const DecayFit f = exp_regression(rd, max_age);
    return {{"C", f.C}, {"beta", f.beta}, {"r2", f.r2}, {"first_age", f.first_age},
            {"last_age", f.last_age}, {"points", f.points}};
  } catch (const InsufficientData& e) {
    return {{"error", e.what()}};
  }
}

struct ModelRun {
  std::string name;
  KWinnerConfig config;
  std::vector<RunResult> results;
  std::vector<RetentionCurve> curves;
};

json run_summary(const ModelRun& mr, const ExperimentConfig& e, std::uint32_t fit_max_age) {
  json j;
  j["preset"] = mr.name;
  j["model"] = model_json(mr.config);
  std::uint64_t degenerate = 0;
  for (const auto& r : mr.results) degenerate += r.degenerate;
  j["degenerate_activations"] = degenerate;
  const bool slot = mr.config.k_h == 1 && mr.config.f == 1.0 && mr.config.epsilon == 1.0;
  for (std::size_t ci = 0; ci < mr.curves.size(); ++ci) {
    const RetentionCurve& c = mr.curves[ci];
    json cj;
    cj["cue"] = c.cue;
    cj["fit"] = fit_json(c.rd_mean, fit_max_age);
    // Per-run mean pseudo score, then mean and SE across runs.
    std::vector<double> per_run;
    double age1_min = 1.0;
    for (const auto& r : mr.results) {
      const auto& ps = r.scores[ci].pseudo;
      double s = 0.0;
      for (double v : ps) s += v;
      per_run.push_back(ps.empty() ? 0.0 : s / static_cast<double>(ps.size()));
      if (!r.scores[ci].real.empty()) age1_min = std::min(age1_min, r.scores[ci].real[0]);
    }
    double mean = 0.0;
    for (double v : per_run) mean += v;
    mean /= static_cast<double>(per_run.size());
    double ss = 0.0;
    for (double v : per_run) ss += (v - mean) * (v - mean);
    const double se = per_run.size() > 1
                          ? std::sqrt(ss / static_cast<double>(per_run.size() - 1)) /
                                std::sqrt(static_cast<double>(per_run.size()))
                          : std::nan("");
    cj["pseudo_rho_mean"] = num(mean);
    cj["pseudo_rho_se"] = num(se);
    if (e.test_window > 0) cj["age1_rho_min"] = age1_min;
    cj["excluded_dprime_samples"] = c.excluded_samples;
    if (!c.rho_uniform_mean.empty()) {
      double u = 0.0;
      for (double v : c.rho_uniform_mean) u += v;
      cj["uniform_pseudo_rho_mean"] = num(u / static_cast<double>(c.rho_uniform_mean.size()));
    }
    if (slot) {
      const MhnTheory t = mhn_theory(mr.config.n_v, mr.config.s_v, mr.config.n_h, c.cue);
      cj["theory"] = {{"C", t.C}, {"beta", t.beta}, {"baseline", t.baseline},
                      {"theta", t.theta}, {"regime_ok", t.regime_ok}};
    }
    j["cues"].push_back(cj);
  }
  return j;
}

void cmd_run_memory(const MemoryArgs& a, bool structured, const std::vector<std::string>& argv,
                    std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig e = experiment_from(a);
  std::vector<std::string> names{a.preset};
  if (!a.compare.empty()) names.push_back(a.compare);
  std::vector<ModelRun> models;
  for (const auto& n : names) models.push_back({n, memory_preset(n), {}, {}});

  for (ModelRun& mr : models) {
    if (mr.config.k_h == 1 && mr.config.f == 1.0 && mr.config.epsilon == 1.0) {
      for (double c : e.cue_levels) {
        const MhnTheory t = mhn_theory(mr.config.n_v, mr.config.s_v, mr.config.n_h, c);
        if (!t.regime_ok) {
          err << "warning: cue " << c << " is below the retrieval threshold " << t.theta
              << " for preset " << mr.name << "\n";
        }
      }
    }
    mr.results = run_many(mr.config, e, a.jobs);
    mr.curves = aggregate(mr.results, e);
  }
  if (models.size() == 2) {
    for (std::size_t ci = 0; ci < e.cue_levels.size(); ++ci) {
      compare_curves(models[0].curves[ci], models[1].curves[ci], a.alpha, a.paired);
    }
  }

  Emitter em(a.out_dir);
  json summary;
  for (const ModelRun& mr : models) {
    for (const RetentionCurve& c : mr.curves) {
      std::ostringstream os;
      write_curve_csv(os, c);
      em.write(mr.name + "_c" + cue_tag(c.cue) + ".csv", os.str());
    }
    summary["models"].push_back(run_summary(mr, e, a.fit_max_age));
  }
  if (models.size() == 2) {
    for (std::size_t ci = 0; ci < e.cue_levels.size(); ++ci) {
      summary["comparison"].push_back({{"cue", e.cue_levels[ci]},
                                       {"a", models[0].name},
                                       {"b", models[1].name},
                                       {"segments", segments_json(models[0].curves[ci].sig_flag)}});
    }
  }
  if (structured && e.data == DataKind::Tgcrp) {
    // The tree of run 0: same seed and stream as its data draw.
    Rng data_rng = Rng(derive_seed(e.seed, 0)).split(1);
    const KWinnerConfig& mc = models.front().config;
    const auto leaves = tgcrp_generate(e.tree_nodes, mc.n_v, mc.s_v, e.b, data_rng).leaves();
    const SimilarityStats s = pairwise_similarity(leaves);
    summary["similarity"] = {{"b", e.b}, {"leaves", leaves.size()},
                             {"mean_similarity", num(s.mean_similarity)}};
  }
  em.write("summary.json", summary.dump(2) + "\n");

  json m = base_manifest(structured ? "run-structured" : "run-memory", argv);
  json cfg;
  cfg["presets"] = names;
  cfg["data"] = e.data == DataKind::Random ? "random" : "tgcrp";
  cfg["b"] = e.b;
  cfg["tree_nodes"] = e.tree_nodes;
  cfg["seq_len"] = e.seq_len;
  cfg["test_window"] = e.test_window;
  cfg["cue_levels"] = e.cue_levels;
  cfg["runs"] = e.runs;
  cfg["dprime_samples"] = e.dprime_samples;
  cfg["pseudo"] = a.pseudo;
  cfg["uniform_baseline"] = e.uniform_baseline;
  cfg["alpha"] = a.alpha;
  cfg["paired"] = a.paired;
  cfg["fit_max_age"] = a.fit_max_age;
  cfg["jobs"] = a.jobs;
  m["config"] = cfg;
  json seeds;
  seeds["experiment"] = e.seed;
  for (std::uint32_t i = 0; i < e.runs; ++i) seeds["runs"].push_back(derive_seed(e.seed, i));
  m["seeds"] = seeds;
  for (const ModelRun& mr : models) m["models"][mr.name] = model_json(mr.config);
  m["wall_clock_seconds"] = seconds_since(t0);
  em.finish(m);
  out << "wrote " << (a.out_dir) << " (" << models.size() * e.cue_levels.size()
      << " curve files)\n";
}

// ---------------------------------------------------------------- run-attention

struct AttentionArgs {
  std::string variant = "qk-align";
  std::string proj = "on";
  std::uint32_t runs = 10;
  std::uint64_t seed = 1;
  std::uint32_t iterations = 5000;
  std::uint32_t L = 4;
  std::uint32_t C = 4;
  std::uint32_t batch = 64;
  std::uint32_t snapshot_every = 100;
  std::uint32_t end_window = 1000;
  int N = -1;
  int n_h = -1;
  double eta_q = -1, eta_k = -1, eta_v = -1;
  bool theorem_check = false;
  std::string out_dir = "out";
  unsigned jobs = default_jobs();
};

std::string trace_csv(const TrainTrace& t) {
  std::ostringstream os;
  os << "iter,acc,loss\n";
  for (std::size_t i = 0; i < t.acc.size(); ++i) {
    os << i + 1 << "," << fmt_double(t.acc[i]) << "," << fmt_double(t.loss[i]) << "\n";
  }
  return os.str();
}

std::string aux_csv(const TrainTrace& t) {
  std::ostringstream os;
  os << "iter,train_loss,k_loss\n";
  for (std::size_t i = 0; i < t.acc.size(); ++i) {
    os << i + 1 << "," << fmt_double(t.train_loss[i]) << "," << fmt_double(t.k_loss[i]) << "\n";
  }
  return os.str();
}

std::string structure_csv(const TrainTrace& t) {
  std::ostringstream os;
  os << "iter,wv_case_distance,key_on,key_off,query_lower_on,query_lower_off,query_upper_on,"
        "query_upper_off\n";
  for (const auto& [iter, r] : t.snapshots) {
    os << iter << "," << fmt_double(r.wv_case_distance) << "," << fmt_double(r.key_stats.on_mean)
       << "," << fmt_double(r.key_stats.off_mean) << ","
       << fmt_double(r.query_lower_stats.on_mean) << ","
       << fmt_double(r.query_lower_stats.off_mean) << ","
       << fmt_double(r.query_upper_stats.on_mean) << ","
       << fmt_double(r.query_upper_stats.off_mean) << "\n";
  }
  return os.str();
}

std::string blocks_csv(const StructureReport& r) {
  std::ostringstream os;
  os << "block,row,col,value\n";
  auto dump = [&](const char* name, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        os << name << "," << i << "," << j << "," << fmt_double(m(i, j)) << "\n";
      }
    }
  };
  dump("wv_letters", r.wv_letters);
  dump("key_upper_lower", r.key_upper_lower);
  dump("query_lower", r.query_lower);
  dump("query_upper", r.query_upper);
  return os.str();
}

json range_json(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  double s = 0.0;
  for (double x : v) s += x;
  return {{"mean", num(s / static_cast<double>(v.size()))},
          {"min", num(*std::min_element(v.begin(), v.end()))},
          {"max", num(*std::max_element(v.begin(), v.end()))}};
}

TrainConfig attention_config(const AttentionArgs& a) {
  const Variant v = parse_variant(a.variant);
  if (a.proj != "on" && a.proj != "off") throw ConfigError("--proj must be on or off");
  TrainConfig c = train_preset(v, a.proj == "on");
  c.proj = a.proj == "on";
  c.iterations = a.iterations;
  c.L = a.L;
  c.C = a.C;
  c.batch = a.batch;
  c.snapshot_every = a.snapshot_every;
  if (a.N > 0) c.N = static_cast<std::uint32_t>(a.N);
  if (a.n_h > 0) c.n_h = static_cast<std::uint32_t>(a.n_h);
  if (a.eta_q >= 0) c.eta_q = a.eta_q;
  if (a.eta_k >= 0) c.eta_k = a.eta_k;
  if (a.eta_v >= 0) c.eta_v = a.eta_v;
  c.validate();
  return c;
}

void cmd_theorem_check(const AttentionArgs& a, const std::vector<std::string>& argv,
                       std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  WvCheckConfig w;
  w.seed = a.seed;
  const WvCheckResult r = wv_convergence_check(w);
  Emitter em(a.out_dir);
  json j = {{"L", w.L}, {"C", w.C}, {"N", w.N}, {"batch", w.batch}, {"iterations", w.iterations},
            {"eta", w.eta}, {"eta_bound", r.eta_bound}, {"max_distance", r.max_distance},
            {"column_distance", r.column_distance}, {"min_like_dot", r.min_like_dot},
            {"max_opposite_dot", r.max_opposite_dot}};
  em.write("wv_check.json", j.dump(2) + "\n");
  json m = base_manifest("run-attention", argv);
  m["config"] = {{"theorem_check", true}};
  m["seeds"] = {{"seed", a.seed}};
  m["wall_clock_seconds"] = seconds_since(t0);
  em.finish(m);
  out << j.dump() << "\n";
}

void cmd_run_attention(const AttentionArgs& a, const std::vector<std::string>& argv,
                       std::ostream& out) {
  if (a.theorem_check) {
    cmd_theorem_check(a, argv, out);
    return;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const TrainConfig base = attention_config(a);
  if (a.runs < 1) throw ConfigError("runs must be at least 1");

  std::vector<TrainResult> results(a.runs);
  std::atomic<std::uint32_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&]() {
    for (;;) {
      const std::uint32_t i = next.fetch_add(1);
      if (i >= a.runs) return;
      try {
        TrainConfig c = base;
        c.seed = derive_seed(a.seed, i);
        results[i] = train(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next.store(a.runs);
        return;
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(a.jobs, a.runs));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Emitter em(a.out_dir);
  json summary;
  std::vector<double> end_acc, key_on, key_off, ql_on, ql_off, qu_on, qu_off, wv_dist;
  for (std::uint32_t i = 0; i < a.runs; ++i) {
    const TrainTrace& t = results[i].trace;
    char tag[32];
    std::snprintf(tag, sizeof tag, "run%02u", i);
    em.write(std::string(tag) + "_trace.csv", trace_csv(t));
    if (base.variant != Variant::Baseline) em.write(std::string(tag) + "_aux.csv", aux_csv(t));
    em.write(std::string(tag) + "_structure.csv", structure_csv(t));
    const StructureReport& fin = t.snapshots.back().second;
    em.write(std::string(tag) + "_final_blocks.csv", blocks_csv(fin));
    json rj;
    rj["run"] = i;
    rj["seed"] = derive_seed(a.seed, i);
    rj["end_acc"] = num(t.mean_acc_last(a.end_window));
    rj["end_loss"] = num(t.mean_loss_last(a.end_window));
    rj["first_above_0.95"] = t.first_above(0.95) < 0 ? json(nullptr) : json(t.first_above(0.95) + 1);
    rj["argmax_ties"] = t.argmax_ties;
    rj["final"] = {{"wv_case_distance", fin.wv_case_distance},
                   {"key_on", fin.key_stats.on_mean},
                   {"key_off", fin.key_stats.off_mean},
                   {"query_lower_on", fin.query_lower_stats.on_mean},
                   {"query_lower_off", fin.query_lower_stats.off_mean},
                   {"query_upper_on", fin.query_upper_stats.on_mean},
                   {"query_upper_off", fin.query_upper_stats.off_mean}};
    try {
      const LearningOrder lo = learning_order(t);
      rj["learning_order"] = {{"acc_cross", lo.acc_cross},
                              {"snapshot_iter", lo.snapshot_iter},
                              {"wv_progress", num(lo.wv_progress)},
                              {"key_progress", num(lo.key_progress)},
                              {"wv_half_iter", lo.wv_half_iter},
                              {"key_half_iter", lo.key_half_iter}};
    } catch (const InsufficientData&) {
    }
    summary["runs"].push_back(rj);
    end_acc.push_back(t.mean_acc_last(a.end_window));
    wv_dist.push_back(fin.wv_case_distance);
    key_on.push_back(fin.key_stats.on_mean);
    key_off.push_back(fin.key_stats.off_mean);
    ql_on.push_back(fin.query_lower_stats.on_mean);
    ql_off.push_back(fin.query_lower_stats.off_mean);
    qu_on.push_back(fin.query_upper_stats.on_mean);
    qu_off.push_back(fin.query_upper_stats.off_mean);
  }
  summary["aggregate"] = {{"end_acc", range_json(end_acc)},
                          {"wv_case_distance", range_json(wv_dist)},
                          {"key_on", range_json(key_on)},
                          {"key_off", range_json(key_off)},
                          {"query_lower_on", range_json(ql_on)},
                          {"query_lower_off", range_json(ql_off)},
                          {"query_upper_on", range_json(qu_on)},
                          {"query_upper_off", range_json(qu_off)}};
  em.write("summary.json", summary.dump(2) + "\n");

  json m = base_manifest("run-attention", argv);
  m["config"] = {{"variant", std::string(variant_name(base.variant))},
                 {"proj", base.proj},
                 {"L", base.L},
                 {"C", base.C},
                 {"batch", base.batch},
                 {"iterations", base.iterations},
                 {"N", base.N},
                 {"n_h", base.n_h},
                 {"eta_q", base.eta_q},
                 {"eta_k", base.eta_k},
                 {"eta_v", base.eta_v},
                 {"snapshot_every", base.snapshot_every},
                 {"end_window", a.end_window},
                 {"runs", a.runs},
                 {"jobs", a.jobs}};
  json seeds;
  seeds["experiment"] = a.seed;
  for (std::uint32_t i = 0; i < a.runs; ++i) seeds["runs"].push_back(derive_seed(a.seed, i));
  m["seeds"] = seeds;
  m["wall_clock_seconds"] = seconds_since(t0);
  em.finish(m);
  out << summary["aggregate"].dump() << "\n";
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string fit_decay;
  std::vector<std::string> significance;
  std::string segments;
  std::string emit_theory;
  std::uint32_t max_age = 200;
  std::uint32_t samples = 10;
  double alpha = 0.01;
  std::string theory_preset = "mhn";
  double cue = 1.0;
  std::uint32_t ages = 1000;
  std::string out;
};

CsvTable load_table(const std::string& path) {
  const CsvTable t = parse_csv(read_file(path));
  if (t.rows.empty()) throw InsufficientData(path + ": no data rows");
  return t;
}

void check_ages(const CsvTable& t, const std::string& path) {
  const auto ages = t.numeric("age");
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (ages[i] != static_cast<double>(i + 1)) {
      throw IntegrityError(path + ": ages must run 1, 2, 3, ...");
    }
  }
}

void cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  json report;
  const KWinnerConfig tp = memory_preset(a.theory_preset);

  if (!a.emit_theory.empty()) {
    const MhnTheory t = mhn_theory(tp.n_v, tp.s_v, tp.n_h, a.cue);
    std::ostringstream os;
    os << "age,rho_real_mean,rho_pseudo_mean,rd_mean,dprime_mean,dprime_se,sig_flag\n";
    for (std::uint32_t age = 1; age <= a.ages; ++age) {
      const double rd = mhn_theory_rd(tp.n_v, tp.s_v, tp.n_h, a.cue, age);
      os << age << "," << fmt_double(t.baseline + rd) << "," << fmt_double(t.baseline) << ","
         << fmt_double(rd) << ",nan,nan,0\n";
    }
    write_file(a.emit_theory, os.str());
    report["emitted"] = a.emit_theory;
  }

  if (!a.fit_decay.empty()) {
    const CsvTable t = load_table(a.fit_decay);
    check_ages(t, a.fit_decay);
    const DecayFit f = exp_regression(t.numeric("rd_mean"), a.max_age);
    const MhnTheory th = mhn_theory(tp.n_v, tp.s_v, tp.n_h, a.cue);
    report["fit"] = {{"file", a.fit_decay}, {"C", f.C}, {"beta", f.beta}, {"r2", f.r2},
                     {"first_age", f.first_age}, {"last_age", f.last_age}, {"points", f.points}};
    report["theory"] = {{"preset", a.theory_preset}, {"cue", a.cue}, {"C", th.C},
                        {"beta", th.beta}, {"baseline", th.baseline}};
    report["delta"] = {{"C", f.C - th.C}, {"beta", f.beta - th.beta}};
    const auto pseudo = t.numeric("rho_pseudo_mean");
    double s = 0.0;
    for (double v : pseudo) s += v;
    report["delta"]["baseline"] = s / static_cast<double>(pseudo.size()) - th.baseline;
  }

  if (!a.significance.empty()) {
    if (a.significance.size() != 2) throw ConfigError("--significance takes two curve files");
    const CsvTable ta = load_table(a.significance[0]);
    const CsvTable tb = load_table(a.significance[1]);
    check_ages(ta, a.significance[0]);
    check_ages(tb, a.significance[1]);
    if (ta.rows.size() != tb.rows.size()) throw IntegrityError("curve files cover different ages");
    const auto ma = ta.numeric("dprime_mean"), sa = ta.numeric("dprime_se");
    const auto mb = tb.numeric("dprime_mean"), sb = tb.numeric("dprime_se");
    std::vector<int> flags(ma.size(), 0);
    for (std::size_t i = 0; i < ma.size(); ++i) {
      if (!std::isfinite(ma[i]) || !std::isfinite(mb[i]) || !std::isfinite(sa[i]) ||
          !std::isfinite(sb[i])) {
        continue;
      }
      const TTest r = welch_from_summary(ma[i], sa[i], a.samples, mb[i], sb[i], a.samples);
      if (r.p < a.alpha) flags[i] = r.mean_diff > 0 ? 1 : -1;
    }
    const auto pos = std::count(flags.begin(), flags.end(), 1);
    const auto neg = std::count(flags.begin(), flags.end(), -1);
    report["significance"] = {{"a", a.significance[0]}, {"b", a.significance[1]},
                              {"samples", a.samples}, {"alpha", a.alpha},
                              {"a_higher_ages", pos}, {"b_higher_ages", neg},
                              {"segments", segments_json(flags)}};
  }

  if (!a.segments.empty()) {
    const CsvTable t = load_table(a.segments);
    check_ages(t, a.segments);
    std::vector<int> flags;
    for (double v : t.numeric("sig_flag")) flags.push_back(static_cast<int>(v));
    report["segments"] = {{"file", a.segments}, {"segments", segments_json(flags)}};
  }

  if (report.empty()) throw ConfigError("analyze needs --fit-decay, --significance, --segments or --emit-theory");
  const std::string text = report.dump(2) + "\n";
  if (!a.out.empty()) write_file(a.out, text);
  out << text;
}

void structured_error(std::ostream& err, const char* kind, const std::string& msg) {
  err << json{{"error", kind}, {"message", msg}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 0; i < argc; ++i) args.emplace_back(argv[i]);

  CLI::App app{"K-winner modern Hopfield network and slot-free transformer laboratory", "kwmhn"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; command-line flags win");
  std::string isa;
  app.add_option("--isa", isa, "Kernel set: scalar, avx2 or neon (default: best available)");

  bool presets_json = false;
  auto* presets = app.add_subcommand("presets", "List the named model presets");
  presets->add_flag("--json", presets_json, "Print JSON");

  GenArgs g;
  auto* gen = app.add_subcommand("gen-data", "Generate a pattern set, TGCRP tree or case batch");
  gen->add_option("--kind", g.kind, "random, tgcrp or case")->capture_default_str();
  gen->add_option("--n-v", g.n_v, "Pattern length")->capture_default_str();
  gen->add_option("--s-v", g.s_v, "Sparsity")->capture_default_str();
  gen->add_option("--b", g.b, "Bit flips per tree edge")->capture_default_str();
  gen->add_option("--num-data", g.num_data, "Patterns, tree nodes or sequences")->capture_default_str();
  gen->add_option("--seed", g.seed)->capture_default_str();
  gen->add_option("--out", g.out, "Output file")->required();
  gen->add_flag("--leaves-only", g.leaves_only, "TGCRP: write leaves only, no edges");
  gen->add_flag("--similarity", g.similarity, "Report mean pairwise similarity");
  gen->add_option("--L", g.L, "Case task: letter types")->capture_default_str();
  gen->add_option("--C", g.C, "Case task: context length")->capture_default_str();

  auto add_memory = [&](CLI::App* sub, MemoryArgs& m, bool structured) {
    sub->add_option("--preset", m.preset, "kw-f005, kw-f01, mhn, mhn-graded or kw-lr02")
        ->capture_default_str();
    sub->add_option("--compare", m.compare, "Second preset; sets significance flags");
    if (structured) {
      sub->add_option("--b", m.b, "Bit flips per tree edge")->required();
      sub->add_flag("--uniform-baseline", m.uniform_baseline,
                    "Also score uniform random pseudo patterns");
    } else {
      sub->add_option("--data", m.data, "random or tgcrp:<b>")->capture_default_str();
    }
    sub->add_option("--tree-nodes", m.tree_nodes)->capture_default_str();
    sub->add_option("--runs", m.runs)->capture_default_str();
    sub->add_option("--dprime-samples", m.samples)->capture_default_str();
    sub->add_option("--seq-len", m.seq_len)->capture_default_str();
    sub->add_option("--test-window", m.test_window)->capture_default_str();
    sub->add_option("--cue", m.cues, "Cue levels")->delimiter(',')->capture_default_str();
    sub->add_option("--seed", m.seed)->capture_default_str();
    sub->add_option("--pseudo", m.pseudo, "same or uniform")->capture_default_str();
    sub->add_option("--alpha", m.alpha, "Significance level")->capture_default_str();
    sub->add_flag("--paired", m.paired, "Paired instead of Welch t-test");
    sub->add_option("--fit-max-age", m.fit_max_age)->capture_default_str();
    sub->add_option("--out-dir", m.out_dir)->capture_default_str();
    sub->add_option("--jobs", m.jobs, "Worker threads")->capture_default_str();
  };
  MemoryArgs mem;
  auto* run_memory = app.add_subcommand("run-memory", "Continual-learning retention experiment");
  add_memory(run_memory, mem, false);
  MemoryArgs st;
  auto* run_structured =
      app.add_subcommand("run-structured", "Retention on TGCRP-structured patterns");
  add_memory(run_structured, st, true);

  AttentionArgs at;
  auto* run_attention = app.add_subcommand("run-attention", "Train on the case sequence task");
  run_attention->add_option("--variant", at.variant, "baseline, fixed-wk, mhn-wk or qk-align")
      ->capture_default_str();
  run_attention->add_option("--proj", at.proj, "Input projections: on or off")->capture_default_str();
  run_attention->add_option("--runs", at.runs)->capture_default_str();
  run_attention->add_option("--seed", at.seed)->capture_default_str();
  run_attention->add_option("--iterations", at.iterations)->capture_default_str();
  run_attention->add_option("--L", at.L)->capture_default_str();
  run_attention->add_option("--C", at.C)->capture_default_str();
  run_attention->add_option("--batch", at.batch)->capture_default_str();
  run_attention->add_option("--snapshot-every", at.snapshot_every)->capture_default_str();
  run_attention->add_option("--end-window", at.end_window)->capture_default_str();
  run_attention->add_option("--N", at.N, "Embedding size (default: preset)");
  run_attention->add_option("--n-h", at.n_h, "Fast-weight hidden units (default: preset)");
  run_attention->add_option("--eta-q", at.eta_q, "Learning rate for W_Q (default: preset)");
  run_attention->add_option("--eta-k", at.eta_k, "Learning rate for W_K (default: preset)");
  run_attention->add_option("--eta-v", at.eta_v, "Learning rate for W_V (default: preset)");
  run_attention->add_flag("--theorem-check", at.theorem_check,
                          "Train W_V alone with frozen random W_Q, W_K (N = 200)");
  run_attention->add_option("--out-dir", at.out_dir)->capture_default_str();
  run_attention->add_option("--jobs", at.jobs, "Worker threads")->capture_default_str();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Decay fits, theory deltas and significance tables");
  analyze->add_option("--fit-decay", an.fit_decay, "Curve CSV to fit");
  analyze->add_option("--significance", an.significance, "Two curve CSVs")->expected(2);
  analyze->add_option("--segments", an.segments, "Curve CSV whose sig_flag column to tabulate");
  analyze->add_option("--emit-theory", an.emit_theory, "Write the theoretical curve CSV");
  analyze->add_option("--max-age", an.max_age)->capture_default_str();
  analyze->add_option("--samples", an.samples, "d' samples behind each SE")->capture_default_str();
  analyze->add_option("--alpha", an.alpha)->capture_default_str();
  analyze->add_option("--theory-preset", an.theory_preset)->capture_default_str();
  analyze->add_option("--cue", an.cue)->capture_default_str();
  analyze->add_option("--ages", an.ages)->capture_default_str();
  analyze->add_option("--out", an.out, "Also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    structured_error(err, "usage", e.what());
    return kUsage;
  }

  try {
    if (!isa.empty()) {
      simd::Isa want;
      if (isa == "scalar") want = simd::Isa::Scalar;
      else if (isa == "avx2") want = simd::Isa::Avx2;
      else if (isa == "neon") want = simd::Isa::Neon;
      else throw ConfigError("--isa must be scalar, avx2 or neon");
      if (!simd::select(want)) throw ConfigError("ISA " + isa + " is not available here");
    }
    const std::vector<std::string> tail(args.begin() + 1, args.end());
    if (presets->parsed()) cmd_presets(presets_json, out);
    else if (gen->parsed()) cmd_gen_data(g, tail, out);
    else if (run_memory->parsed()) cmd_run_memory(mem, false, tail, out, err);
    else if (run_structured->parsed()) {
      st.data = "tgcrp:" + std::to_string(st.b);
      cmd_run_memory(st, true, tail, out, err);
    } else if (run_attention->parsed()) cmd_run_attention(at, tail, out);
    else if (analyze->parsed()) cmd_analyze(an, out);
  } catch (const ConfigError& e) {
    structured_error(err, "config", e.what());
    return kConfig;
  } catch (const IntegrityError& e) {
    structured_error(err, "schema", e.what());
    return kConfig;
  } catch (const InsufficientData& e) {
    structured_error(err, "insufficient_data", e.what());
    return kRuntime;
  } catch (const std::exception& e) {
    structured_error(err, "runtime", e.what());
    return kRuntime;
  }
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"kwmhn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace kwmhn::cli
