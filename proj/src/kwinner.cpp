#include "kwmhn/kwinner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "kwmhn/errors.hpp"
#include "kwmhn/simd/kernels.hpp"

namespace kwmhn {

void KWinnerConfig::validate() const {
  (void)active_count(n_v, s_v);
  if (n_h == 0) throw ConfigError("n_h must be positive");
  if (k_h < 1 || k_h > n_h) throw ConfigError("k_h must lie in [1, n_h]");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
  if (!(f > 0.0 && f <= 1.0)) throw ConfigError("f must lie in (0, 1]");
  const double exact = f * n_v;
  const double r = std::round(exact);
  if (r < 1.0 || std::abs(r - exact) > 0.01 * exact) {
    throw ConfigError("f * n_v must be a positive integer");
  }
}

std::uint32_t KWinnerConfig::k_v() const { return active_count(n_v, s_v); }

std::uint32_t KWinnerConfig::fan_in() const {
  return static_cast<std::uint32_t>(std::round(f * n_v));
}

std::uint64_t KWinnerConfig::parameter_count() const {
  return 2ULL * n_h * fan_in();
}

std::vector<std::uint32_t> kwta(const std::vector<float>& v, std::uint32_t k) {
  if (k < 1 || k > v.size()) throw ConfigError("k-WTA needs 1 <= k <= length");
  std::vector<std::uint32_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0u);
  auto better = [&v](std::uint32_t a, std::uint32_t b) {
    return v[a] > v[b] || (v[a] == v[b] && a < b);
  };
  if (k < v.size()) {
    std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), better);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

KWinnerMHN::KWinnerMHN(const KWinnerConfig& config, Rng& rng) : cfg_(config) {
  cfg_.validate();
  k_v_ = cfg_.k_v();
  const std::uint32_t n_v = cfg_.n_v;
  const std::uint32_t n_h = cfg_.n_h;
  const std::uint32_t fan = cfg_.fan_in();

  fanin_.resize(n_h);
  fmask_.assign(static_cast<std::size_t>(n_h) * n_v, 0.0f);
  for (std::uint32_t i = 0; i < n_h; ++i) {
    if (fan == n_v) {
      fanin_[i].resize(n_v);
      std::iota(fanin_[i].begin(), fanin_[i].end(), 0u);
    } else {
      fanin_[i] = sample_indices(n_v, fan, rng);
    }
    for (std::uint32_t j : fanin_[i]) fmask_[static_cast<std::size_t>(i) * n_v + j] = 1.0f;
  }

  // Uniform (0, 1): the 24-bit draw is offset by half a step so 0 is excluded.
  auto draw = [&rng]() {
    return (static_cast<float>(rng() >> 40) + 0.5f) * 0x1.0p-24f;
  };
  wt_.assign(static_cast<std::size_t>(n_v) * n_h, 0.0f);
  wr_.assign(static_cast<std::size_t>(n_h) * n_v, 0.0f);
  for (std::uint32_t i = 0; i < n_h; ++i) {
    for (std::uint32_t j : fanin_[i]) wt_[static_cast<std::size_t>(j) * n_h + i] = draw();
  }
  for (std::uint32_t i = 0; i < n_h; ++i) {
    for (std::uint32_t j : fanin_[i]) wr_[static_cast<std::size_t>(i) * n_v + j] = draw();
  }
}

std::vector<float> KWinnerMHN::hidden_drive(const Pattern& x) const {
  if (x.n != cfg_.n_v) throw ConfigError("input length does not match n_v");
  std::vector<float> h(cfg_.n_h, 0.0f);
  simd::active().accumulate_rows(h.data(), wt_.data(), cfg_.n_h, x.active.data(), nullptr,
                                 x.active.size(), cfg_.n_h);
  return h;
}

std::vector<std::uint32_t> KWinnerMHN::winners(const Pattern& x) const {
  const auto h = hidden_drive(x);
  if (std::all_of(h.begin(), h.end(), [](float v) { return v == 0.0f; })) {
    degenerate_.fetch_add(1, std::memory_order_relaxed);
  }
  return kwta(h, cfg_.k_h);
}

Retrieval KWinnerMHN::retrieve(const Pattern& x) const {
  Retrieval r;
  r.hidden = winners(x);
  std::vector<float> out(cfg_.n_v, 0.0f);
  simd::active().accumulate_rows(out.data(), wr_.data(), cfg_.n_v, r.hidden.data(), nullptr,
                                 r.hidden.size(), cfg_.n_v);
  r.output = Pattern{cfg_.n_v, kwta(out, k_v_)};
  return r;
}

std::vector<std::uint32_t> KWinnerMHN::learn(const Pattern& x) {
  if (frozen_) throw std::logic_error("learn() called on a frozen network");
  auto z = winners(x);
  ++learn_calls_;
  const auto eps = static_cast<float>(cfg_.epsilon);
  const std::uint32_t n_v = cfg_.n_v;
  const std::uint32_t n_h = cfg_.n_h;
  const std::vector<float> target = x.dense();
  const auto& kern = simd::active();
  for (std::uint32_t i : z) {
    for (std::uint32_t j : fanin_[i]) {
      float& w = wt_[static_cast<std::size_t>(j) * n_h + i];
      const float step = (eps * (target[j] - w)) * 1.0f;
      w += step;
    }
    kern.masked_lerp(wr_.data() + static_cast<std::size_t>(i) * n_v, target.data(),
                     fmask_.data() + static_cast<std::size_t>(i) * n_v, eps, n_v);
  }
  return z;
}

float KWinnerMHN::m(std::uint32_t i, std::uint32_t j) const {
  return wt_[static_cast<std::size_t>(j) * cfg_.n_h + i];
}

float KWinnerMHN::m_back(std::uint32_t j, std::uint32_t i) const {
  return wr_[static_cast<std::size_t>(i) * cfg_.n_v + j];
}

bool KWinnerMHN::mask(std::uint32_t i, std::uint32_t j) const {
  return fmask_[static_cast<std::size_t>(i) * cfg_.n_v + j] != 0.0f;
}

void KWinnerMHN::write_checkpoint(std::ostream& os) const {
  const auto old = os.precision(9);
  os << cfg_.n_h << ' ' << cfg_.n_v << ' ' << cfg_.f << ' ' << cfg_.epsilon << ' ' << cfg_.k_h
     << '\n';
  for (std::uint32_t i = 0; i < cfg_.n_h; ++i) {
    for (std::uint32_t j = 0; j < cfg_.n_v; ++j) os << (j ? " " : "") << m(i, j);
    os << '\n';
  }
  for (std::uint32_t j = 0; j < cfg_.n_v; ++j) {
    for (std::uint32_t i = 0; i < cfg_.n_h; ++i) os << (i ? " " : "") << m_back(j, i);
    os << '\n';
  }
  for (std::uint32_t i = 0; i < cfg_.n_h; ++i) {
    for (std::uint32_t j = 0; j < cfg_.n_v; ++j) os << (j ? " " : "") << (mask(i, j) ? 1 : 0);
    os << '\n';
  }
  os.precision(old);
}

}  // namespace kwmhn
