#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kwmhn/kwinner.hpp"

namespace kwmhn {

struct Preset {
  std::string name;
  KWinnerConfig config;
  std::string note;
};

const std::vector<Preset>& memory_presets();
/// Looks up kw-f005, kw-f01, mhn, mhn-graded or kw-lr02 (case-insensitive).
KWinnerConfig memory_preset(std::string_view name);

enum class DataKind { Random, Tgcrp };
enum class PseudoKind { SameDistribution, Uniform };

struct ExperimentConfig {
  DataKind data = DataKind::Random;
  std::uint32_t b = 0;              // flips per tree edge
  std::uint32_t tree_nodes = 14000;
  std::uint32_t seq_len = 4000;
  std::uint32_t test_window = 1000;
  std::vector<double> cue_levels{1.0, 0.5};
  std::uint32_t runs = 200;
  std::uint32_t dprime_samples = 10;
  std::uint64_t seed = 1;
  PseudoKind pseudo = PseudoKind::SameDistribution;
  bool uniform_baseline = false;    // structured data: also score uniform pseudo patterns

  void validate() const;
};

struct CueScores {
  double cue = 1.0;
  std::vector<double> real;    // index a - 1 holds age a
  std::vector<double> pseudo;  // pseudo pattern paired with the same index
  std::vector<double> uniform_pseudo;
};

struct RunResult {
  std::uint64_t run_index = 0;
  std::uint64_t seed = 0;
  std::vector<CueScores> scores;
  std::uint64_t learn_calls = 0;
  std::uint64_t degenerate = 0;
};

/// Trains on seq_len patterns in order, freezes, then scores the newest
/// test_window patterns and as many pseudo patterns at every cue level.
RunResult run_single(const KWinnerConfig& model, const ExperimentConfig& exp,
                     std::uint64_t run_index);

/// run_single on TGCRP leaves: a fresh tree per run, shuffled leaves, the
/// first seq_len trained and the next test_window held out as pseudo data.
RunResult run_structured(const KWinnerConfig& model, std::uint32_t b, ExperimentConfig exp,
                         std::uint64_t run_index);

/// All runs of an experiment on `jobs` worker threads, ordered by run index.
std::vector<RunResult> run_many(const KWinnerConfig& model, const ExperimentConfig& exp,
                                unsigned jobs);

struct RetentionCurve {
  double cue = 1.0;
  std::uint32_t runs = 0;
  std::vector<double> rho_real_mean;
  std::vector<double> rho_pseudo_mean;
  std::vector<double> rho_uniform_mean;  // empty unless scored
  std::vector<double> rd_mean;
  std::vector<double> dprime_mean;
  std::vector<double> dprime_se;
  std::vector<std::vector<double>> dprime_samples;
  std::vector<int> sig_flag;
  std::uint64_t excluded_samples = 0;
};

/// Consecutive run ranges [begin, end) forming the d' samples. Uses
/// min(samples, runs / 2) groups so each has at least two runs.
std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_ranges(std::uint32_t runs,
                                                                   std::uint32_t samples);

/// One curve per cue level. Throws IntegrityError on inconsistent results.
std::vector<RetentionCurve> aggregate(const std::vector<RunResult>& results,
                                      const ExperimentConfig& exp);

/// Sets sig_flag on both curves (+1 where that curve's d' is higher).
void compare_curves(RetentionCurve& a, RetentionCurve& b, double alpha = 0.01,
                    bool paired = false);

/// Columns age,rho_real_mean,rho_pseudo_mean,rd_mean,dprime_mean,dprime_se,sig_flag
/// (plus rho_uniform_mean when present).
void write_curve_csv(std::ostream& os, const RetentionCurve& curve);

}  // namespace kwmhn
