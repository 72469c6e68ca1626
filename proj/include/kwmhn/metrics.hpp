#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kwmhn/patterns.hpp"

namespace kwmhn {

/// (x_out . x) / k where k is the number of active bits of x.
double rho(const Pattern& x_out, const Pattern& x);

/// d' = mean / population-sd of one sample of real-minus-pseudo differences.
/// Empty optional when every difference is identical (sd = 0). Throws
/// InsufficientData for fewer than two runs.
std::optional<double> d_prime_sample(const std::vector<double>& deltas);

struct DPrimeSummary {
  double mean = 0.0;  // NaN when no sample is usable
  double se = 0.0;    // sample sd / sqrt(used); NaN when used < 2
  std::vector<double> samples;  // usable per-sample d'
  std::uint32_t excluded = 0;   // samples with zero variance
};

/// Aggregates per-sample d' over groups of runs (typically 10 groups of 20).
DPrimeSummary d_prime(const std::vector<std::vector<double>>& deltas_by_sample);

/// Mean difference within each sample, averaged over samples.
double raw_difference(const std::vector<std::vector<double>>& deltas_by_sample);
double raw_difference(const std::vector<double>& real, const std::vector<double>& pseudo);

struct DecayFit {
  double C = 0.0;
  double beta = 0.0;
  double r2 = 0.0;
  std::uint32_t first_age = 0;
  std::uint32_t last_age = 0;
  std::uint32_t points = 0;
};

/// Least squares on log R.D.(a) = log C - beta (a - 1) over ages
/// 1..max_age (rd[0] is age 1), skipping non-positive values. Needs at least
/// 10 usable points.
DecayFit exp_regression(const std::vector<double>& rd, std::uint32_t max_age = 200);

struct MhnTheory {
  double C = 0.0;
  double beta = 0.0;
  double baseline = 0.0;
  double theta = 0.0;
  bool regime_ok = true;  // false when c <= theta
};

/// Closed-form decay amplitude, rate, baseline and cue threshold for the
/// slot-based (1-winner) MHN. eps_prime sets delta = n_h^-(1 + eps_prime) in
/// the threshold.
MhnTheory mhn_theory(std::uint32_t n_v, double s_v, std::uint32_t n_h, double c,
                     double eps_prime = 0.5);
double mhn_theory_rd(std::uint32_t n_v, double s_v, std::uint32_t n_h, double c, double age);
double mhn_theory_baseline(std::uint32_t n_v, double s_v, std::uint32_t n_h, double c);

struct TTest {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  double mean_diff = 0.0;  // mean(a) - mean(b)
};

/// Two-sided Welch test, or a paired test on a[i] - b[i]. Throws
/// InsufficientData for groups smaller than two. Zero variance everywhere
/// gives p = 1.
TTest t_test(const std::vector<double>& a, const std::vector<double>& b, bool paired = false);

/// Welch test from per-group means, standard errors and sample counts.
TTest welch_from_summary(double mean_a, double se_a, std::uint32_t n_a, double mean_b,
                         double se_b, std::uint32_t n_b);

/// +1 when a is significantly higher, -1 when b is, 0 otherwise.
int significance_flag(const std::vector<double>& a, const std::vector<double>& b,
                      double alpha = 0.01, bool paired = false);

/// Per-age flags for two sets of per-sample d' values. Ages where either
/// group has fewer than two usable samples get 0.
std::vector<int> significance_segments(const std::vector<std::vector<double>>& a,
                                       const std::vector<std::vector<double>>& b,
                                       double alpha = 0.01, bool paired = false);

}  // namespace kwmhn
