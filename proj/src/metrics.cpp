#include "kwmhn/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "kwmhn/errors.hpp"

namespace kwmhn {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sum of squared deviations from the mean.
double ssd(const std::vector<double>& v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

bool all_equal(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

double rho(const Pattern& x_out, const Pattern& x) {
  if (x_out.n != x.n) throw ConfigError("rho: length mismatch");
  if (x.k() == 0) throw ConfigError("rho: reference pattern has no active bits");
  return static_cast<double>(overlap(x_out, x)) / static_cast<double>(x.k());
}

std::optional<double> d_prime_sample(const std::vector<double>& deltas) {
  if (deltas.size() < 2) throw InsufficientData("d' needs at least two runs per sample");
  if (all_equal(deltas)) return std::nullopt;
  const double m = mean_of(deltas);
  const double sd = std::sqrt(ssd(deltas, m) / static_cast<double>(deltas.size()));
  if (!(sd > 0.0)) return std::nullopt;
  return m / sd;
}

DPrimeSummary d_prime(const std::vector<std::vector<double>>& deltas_by_sample) {
  DPrimeSummary out;
  for (const auto& s : deltas_by_sample) {
    if (auto d = d_prime_sample(s)) {
      out.samples.push_back(*d);
    } else {
      ++out.excluded;
    }
  }
  const std::size_t n = out.samples.size();
  out.mean = n ? mean_of(out.samples) : kNaN;
  out.se = n >= 2 ? std::sqrt(ssd(out.samples, out.mean) / static_cast<double>(n - 1)) /
                        std::sqrt(static_cast<double>(n))
                  : kNaN;
  return out;
}

double raw_difference(const std::vector<std::vector<double>>& deltas_by_sample) {
  if (deltas_by_sample.empty()) throw InsufficientData("raw difference needs a sample");
  double s = 0.0;
  for (const auto& d : deltas_by_sample) {
    if (d.empty()) throw InsufficientData("empty sample");
    s += mean_of(d);
  }
  return s / static_cast<double>(deltas_by_sample.size());
}

double raw_difference(const std::vector<double>& real, const std::vector<double>& pseudo) {
  if (real.size() != pseudo.size()) throw IntegrityError("run counts differ");
  if (real.empty()) throw InsufficientData("raw difference needs runs");
  double s = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) s += real[i] - pseudo[i];
  return s / static_cast<double>(real.size());
}

DecayFit exp_regression(const std::vector<double>& rd, std::uint32_t max_age) {
  std::vector<double> xs, ys;
  DecayFit fit;
  const std::size_t last = std::min<std::size_t>(rd.size(), max_age);
  for (std::size_t i = 0; i < last; ++i) {
    if (std::isfinite(rd[i]) && rd[i] > 0.0) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(std::log(rd[i]));
      if (fit.first_age == 0) fit.first_age = static_cast<std::uint32_t>(i + 1);
      fit.last_age = static_cast<std::uint32_t>(i + 1);
    }
  }
  if (xs.size() < 10) throw InsufficientData("decay fit needs at least 10 positive points");
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (intercept + slope * xs[i]);
    ss_res += r * r;
  }
  const double ss_tot = ssd(ys, my);
  fit.C = std::exp(intercept);
  fit.beta = -slope;
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.points = static_cast<std::uint32_t>(xs.size());
  return fit;
}

MhnTheory mhn_theory(std::uint32_t n_v, double s_v, std::uint32_t n_h, double c,
                     double eps_prime) {
  if (n_v == 0 || n_h < 2) throw ConfigError("theory needs n_v >= 1 and n_h >= 2");
  if (!(s_v > 0.0 && s_v < 1.0)) throw ConfigError("theory needs s_v in (0, 1)");
  if (!(c > 0.0 && c <= 1.0)) throw ConfigError("cue fraction must lie in (0, 1]");
  MhnTheory t;
  const double surplus = std::sqrt(2.0 * c * (1.0 - s_v) * std::log(static_cast<double>(n_h)) /
                                   static_cast<double>(n_v));
  t.baseline = s_v + surplus;
  t.C = 1.0 - t.baseline;
  t.beta = -std::log1p(-1.0 / static_cast<double>(n_h));
  const double delta = std::pow(static_cast<double>(n_h), -(1.0 + eps_prime));
  const double inner = -std::expm1(std::log1p(-delta) / (static_cast<double>(n_h) - 1.0));
  const double k_v = s_v * static_cast<double>(n_v);
  t.theta = std::log(inner) / (k_v * std::log(s_v));
  t.regime_ok = c > t.theta;
  return t;
}

double mhn_theory_rd(std::uint32_t n_v, double s_v, std::uint32_t n_h, double c, double age) {
  const MhnTheory t = mhn_theory(n_v, s_v, n_h, c);
  return t.C * std::exp(-t.beta * (age - 1.0));
}

double mhn_theory_baseline(std::uint32_t n_v, double s_v, std::uint32_t n_h, double c) {
  return mhn_theory(n_v, s_v, n_h, c).baseline;
}

TTest t_test(const std::vector<double>& a, const std::vector<double>& b, bool paired) {
  if (a.size() < 2 || b.size() < 2) throw InsufficientData("t-test needs two values per group");
  TTest r;
  r.mean_diff = mean_of(a) - mean_of(b);
  double se2 = 0.0;
  if (paired) {
    if (a.size() != b.size()) throw IntegrityError("paired t-test needs equal group sizes");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double n = static_cast<double>(d.size());
    se2 = ssd(d, mean_of(d)) / (n - 1.0) / n;
    r.df = n - 1.0;
  } else {
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = ssd(a, mean_of(a)) / (na - 1.0) / na;
    const double vb = ssd(b, mean_of(b)) / (nb - 1.0) / nb;
    se2 = va + vb;
    if (se2 > 0.0) {
      r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    }
  }
  if (!(se2 > 0.0)) {
    r.p = 1.0;
    return r;
  }
  r.t = r.mean_diff / std::sqrt(se2);
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

TTest welch_from_summary(double mean_a, double se_a, std::uint32_t n_a, double mean_b,
                         double se_b, std::uint32_t n_b) {
  if (n_a < 2 || n_b < 2) throw InsufficientData("t-test needs two values per group");
  TTest r;
  r.mean_diff = mean_a - mean_b;
  const double va = se_a * se_a;
  const double vb = se_b * se_b;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) return r;
  r.df = se2 * se2 / (va * va / (n_a - 1.0) + vb * vb / (n_b - 1.0));
  r.t = r.mean_diff / std::sqrt(se2);
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

int significance_flag(const std::vector<double>& a, const std::vector<double>& b, double alpha,
                      bool paired) {
  const TTest r = t_test(a, b, paired);
  if (r.p >= alpha) return 0;
  return r.mean_diff > 0.0 ? 1 : -1;
}

std::vector<int> significance_segments(const std::vector<std::vector<double>>& a,
                                       const std::vector<std::vector<double>>& b, double alpha,
                                       bool paired) {
  if (a.size() != b.size()) throw IntegrityError("age ranges differ");
  std::vector<int> flags(a.size(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() < 2 || b[i].size() < 2) continue;
    if (paired && a[i].size() != b[i].size()) continue;
    flags[i] = significance_flag(a[i], b[i], alpha, paired);
  }
  return flags;
}

}  // namespace kwmhn
