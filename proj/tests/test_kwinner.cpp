#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kwmhn/errors.hpp"
#include "kwmhn/kwinner.hpp"
#include "kwmhn/simd/kernels.hpp"

using namespace kwmhn;

namespace {

KWinnerConfig cfg(std::uint32_t n_v, double s_v, std::uint32_t n_h, std::uint32_t k_h, double f,
                  double eps) {
  KWinnerConfig c;
  c.n_v = n_v;
  c.s_v = s_v;
  c.n_h = n_h;
  c.k_h = k_h;
  c.f = f;
  c.epsilon = eps;
  return c;
}

std::string checkpoint(const KWinnerMHN& net) {
  std::ostringstream os;
  net.write_checkpoint(os);
  return os.str();
}

// Dense double-precision model seeded from the library's initial weights.
struct DenseOracle {
  KWinnerConfig c;
  std::vector<std::vector<double>> M, Mb, F;  // n_h x n_v, n_v x n_h, n_h x n_v

  explicit DenseOracle(const KWinnerMHN& net) : c(net.config()) {
    M.assign(c.n_h, std::vector<double>(c.n_v));
    F = M;
    Mb.assign(c.n_v, std::vector<double>(c.n_h));
    for (std::uint32_t i = 0; i < c.n_h; ++i) {
      for (std::uint32_t j = 0; j < c.n_v; ++j) {
        M[i][j] = net.m(i, j);
        Mb[j][i] = net.m_back(j, i);
        F[i][j] = net.mask(i, j) ? 1.0 : 0.0;
      }
    }
  }

  static std::vector<std::uint32_t> top(const std::vector<double>& v, std::uint32_t k) {
    std::vector<std::uint32_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

  std::vector<std::uint32_t> hidden(const std::vector<float>& x) const {
    std::vector<double> h(c.n_h, 0.0);
    for (std::uint32_t i = 0; i < c.n_h; ++i) {
      for (std::uint32_t j = 0; j < c.n_v; ++j) h[i] += M[i][j] * F[i][j] * x[j];
    }
    return top(h, c.k_h);
  }

  std::vector<std::uint32_t> retrieve(const std::vector<float>& x) const {
    const auto z = hidden(x);
    std::vector<double> out(c.n_v, 0.0);
    for (std::uint32_t j = 0; j < c.n_v; ++j) {
      for (std::uint32_t i : z) out[j] += Mb[j][i] * F[i][j];
    }
    return top(out, c.k_v());
  }

  void learn(const std::vector<float>& x) {
    const auto z = hidden(x);
    for (std::uint32_t i : z) {
      for (std::uint32_t j = 0; j < c.n_v; ++j) {
        M[i][j] += c.epsilon * (x[j] - M[i][j]) * F[i][j];
        Mb[j][i] += c.epsilon * (x[j] - Mb[j][i]) * F[i][j];
      }
    }
  }
};

}  // namespace

TEST(Kwta, Examples) {
  EXPECT_EQ(kwta({0.1f, 0.9f, 0.5f}, 1), (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(kwta({3.0f, 3.0f, 1.0f}, 1), (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(kwta({3.0f, 1.0f, 2.0f}, 3), (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_THROW(kwta({1.0f}, 0), ConfigError);
  EXPECT_THROW(kwta({1.0f}, 2), ConfigError);
}

TEST(Kwta, ExhaustiveTieBreakOracle) {
  // Every vector over {0,1,2}^5 and every k: winners are the k best under
  // (value descending, index ascending).
  for (int code = 0; code < 243; ++code) {
    std::vector<float> v(5);
    int c = code;
    for (auto& x : v) {
      x = static_cast<float>(c % 3);
      c /= 3;
    }
    for (std::uint32_t k = 1; k <= 5; ++k) {
      std::vector<std::uint32_t> order{0, 1, 2, 3, 4};
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] > v[b]; });
      order.resize(k);
      std::sort(order.begin(), order.end());
      ASSERT_EQ(kwta(v, k), order) << "code " << code << " k " << k;
    }
  }
}

TEST(KWinnerConfig, Validation) {
  EXPECT_NO_THROW(cfg(1000, 0.1, 2000, 50, 0.05, 0.3).validate());
  EXPECT_THROW(cfg(1000, 0.1, 10, 11, 1.0, 0.3).validate(), ConfigError);
  EXPECT_THROW(cfg(1000, 0.1, 10, 0, 1.0, 0.3).validate(), ConfigError);
  EXPECT_THROW(cfg(1000, 0.1, 10, 1, 1.0, 0.0).validate(), ConfigError);
  EXPECT_THROW(cfg(1000, 0.1, 10, 1, 1.0, 1.5).validate(), ConfigError);
  EXPECT_THROW(cfg(1000, 0.1, 10, 1, 0.0, 0.3).validate(), ConfigError);
  EXPECT_THROW(cfg(1000, 0.1, 10, 1, 0.0005, 0.3).validate(), ConfigError);
  EXPECT_THROW(cfg(10, 0.25, 10, 1, 1.0, 0.3).validate(), ConfigError);
}

TEST(KWinnerConfig, ParameterMatching) {
  EXPECT_EQ(cfg(1000, 0.1, 2000, 50, 0.05, 0.3).parameter_count(),
            cfg(1000, 0.1, 100, 1, 1.0, 1.0).parameter_count());
  EXPECT_EQ(cfg(1000, 0.1, 1000, 50, 0.1, 0.3).parameter_count(), 200000u);
}

TEST(KWinnerMHN, InitMasksAndRanges) {
  Rng r(1);
  KWinnerMHN full(cfg(50, 0.1, 20, 1, 1.0, 1.0), r);
  for (std::uint32_t i = 0; i < 20; ++i) {
    for (std::uint32_t j = 0; j < 50; ++j) {
      EXPECT_TRUE(full.mask(i, j));
      EXPECT_GT(full.m(i, j), 0.0f);
      EXPECT_LT(full.m(i, j), 1.0f);
      EXPECT_GT(full.m_back(j, i), 0.0f);
      EXPECT_LT(full.m_back(j, i), 1.0f);
    }
  }
  KWinnerMHN sparse(cfg(1000, 0.1, 2000, 50, 0.05, 0.3), r);
  for (std::uint32_t i = 0; i < 2000; ++i) {
    ASSERT_EQ(sparse.fan_in_row(i).size(), 50u);
    std::uint32_t ones = 0;
    for (std::uint32_t j = 0; j < 1000; ++j) {
      if (sparse.mask(i, j)) {
        ++ones;
      } else {
        ASSERT_EQ(sparse.m(i, j), 0.0f);
        ASSERT_EQ(sparse.m_back(j, i), 0.0f);
      }
    }
    ASSERT_EQ(ones, 50u);
  }
}

TEST(KWinnerMHN, FanInPositionsUniform) {
  Rng r(2);
  KWinnerMHN net(cfg(100, 0.1, 4000, 1, 0.1, 1.0), r);
  std::vector<int> hits(100, 0);
  for (std::uint32_t i = 0; i < 4000; ++i) {
    for (auto j : net.fan_in_row(i)) ++hits[j];
  }
  // 4000 rows x 10 draws over 100 positions.
  for (int h : hits) EXPECT_NEAR(h, 400, 5 * std::sqrt(400 * 0.9));
}

TEST(KWinnerMHN, SlotReplacementRetrievesLastPattern) {
  Rng r(3);
  KWinnerMHN net(cfg(1000, 0.1, 100, 1, 1.0, 1.0), r);
  for (int t = 0; t < 300; ++t) {
    const Pattern x = gen_random_pattern(1000, 0.1, r);
    const auto z = net.learn(x);
    ASSERT_EQ(z.size(), 1u);
    for (std::uint32_t j = 0; j < 1000; ++j) {
      const float want = std::binary_search(x.active.begin(), x.active.end(), j) ? 1.0f : 0.0f;
      ASSERT_EQ(net.m(z[0], j), want);
      ASSERT_EQ(net.m_back(j, z[0]), want);
    }
    EXPECT_EQ(net.retrieve(x).output, x);
  }
}

TEST(KWinnerMHN, GradedUpdateMovesTowardPattern) {
  Rng r(4);
  KWinnerMHN net(cfg(200, 0.1, 30, 3, 1.0, 0.3), r);
  const Pattern x = gen_random_pattern(200, 0.1, r);
  std::vector<float> before(30 * 200);
  for (std::uint32_t i = 0; i < 30; ++i) {
    for (std::uint32_t j = 0; j < 200; ++j) before[i * 200 + j] = net.m(i, j);
  }
  const auto z = net.learn(x);
  const auto dense = x.dense();
  for (std::uint32_t i = 0; i < 30; ++i) {
    const bool won = std::find(z.begin(), z.end(), i) != z.end();
    for (std::uint32_t j = 0; j < 200; ++j) {
      const float m0 = before[i * 200 + j];
      const float want = won ? m0 + 0.3f * (dense[j] - m0) : m0;
      ASSERT_NEAR(net.m(i, j), want, 1e-6f);
    }
  }
}

TEST(KWinnerMHN, WeightsStayInUnitInterval) {
  Rng r(5);
  KWinnerMHN net(cfg(200, 0.1, 80, 10, 0.5, 0.3), r);
  for (int t = 0; t < 500; ++t) net.learn(gen_random_pattern(200, 0.1, r));
  for (std::uint32_t i = 0; i < 80; ++i) {
    for (std::uint32_t j = 0; j < 200; ++j) {
      ASSERT_GE(net.m(i, j), 0.0f);
      ASSERT_LE(net.m(i, j), 1.0f);
      ASSERT_GE(net.m_back(j, i), 0.0f);
      ASSERT_LE(net.m_back(j, i), 1.0f);
    }
  }
}

TEST(KWinnerMHN, SymmetryDriftContracts) {
  Rng r(6);
  const double eps = 0.3;
  KWinnerMHN net(cfg(100, 0.1, 20, 4, 0.5, eps), r);
  std::vector<double> gap0(20 * 100);
  std::vector<int> touched(20 * 100, 0);
  for (std::uint32_t i = 0; i < 20; ++i) {
    for (std::uint32_t j = 0; j < 100; ++j) gap0[i * 100 + j] = net.m(i, j) - net.m_back(j, i);
  }
  for (int t = 0; t < 30; ++t) {
    for (std::uint32_t i : net.learn(gen_random_pattern(100, 0.1, r))) {
      for (std::uint32_t j = 0; j < 100; ++j) touched[i * 100 + j] += net.mask(i, j);
    }
  }
  for (std::uint32_t i = 0; i < 20; ++i) {
    for (std::uint32_t j = 0; j < 100; ++j) {
      const int t = touched[i * 100 + j];
      if (t == 0) continue;
      const double gap = std::abs(net.m(i, j) - net.m_back(j, i));
      EXPECT_LE(gap, std::pow(1.0 - eps, t) * std::abs(gap0[i * 100 + j]) + 1e-6);
    }
  }
}

TEST(KWinnerMHN, LearnTouchesAtMostKhRows) {
  Rng r(7);
  KWinnerMHN net(cfg(100, 0.1, 40, 5, 0.5, 0.3), r);
  const std::string before = checkpoint(net);
  const auto z = net.learn(gen_random_pattern(100, 0.1, r));
  EXPECT_EQ(z.size(), 5u);
  // Row i of M is line 1 + i of the checkpoint.
  std::istringstream a(before), b(checkpoint(net));
  std::string la, lb;
  std::getline(a, la);
  std::getline(b, lb);
  for (std::uint32_t i = 0; i < 40; ++i) {
    std::getline(a, la);
    std::getline(b, lb);
    const bool won = std::find(z.begin(), z.end(), i) != z.end();
    if (!won) {
      EXPECT_EQ(la, lb) << "row " << i;
    }
  }
}

TEST(KWinnerMHN, RetrieveIsSideEffectFree) {
  Rng r(8);
  KWinnerMHN net(cfg(200, 0.1, 50, 5, 0.5, 0.3), r);
  for (int t = 0; t < 20; ++t) net.learn(gen_random_pattern(200, 0.1, r));
  const std::string before = checkpoint(net);
  const Pattern x = gen_random_pattern(200, 0.1, r);
  const auto first = net.retrieve(x);
  for (int t = 0; t < 5; ++t) {
    const auto again = net.retrieve(x);
    EXPECT_EQ(again.output, first.output);
    EXPECT_EQ(again.hidden, first.hidden);
  }
  EXPECT_EQ(first.output.k(), 20u);
  EXPECT_EQ(checkpoint(net), before);
  EXPECT_EQ(net.learn_calls(), 20u);
}

TEST(KWinnerMHN, FrozenRejectsLearning) {
  Rng r(9);
  KWinnerMHN net(cfg(100, 0.1, 10, 1, 1.0, 1.0), r);
  net.freeze();
  EXPECT_THROW(net.learn(gen_random_pattern(100, 0.1, r)), std::logic_error);
  net.unfreeze();
  EXPECT_NO_THROW(net.learn(gen_random_pattern(100, 0.1, r)));
}

TEST(KWinnerMHN, ZeroInputIsDegenerate) {
  Rng r(10);
  KWinnerMHN net(cfg(100, 0.1, 10, 3, 1.0, 1.0), r);
  const auto res = net.retrieve(Pattern{100, {}});
  EXPECT_EQ(res.hidden, (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(res.output.k(), 10u);
  EXPECT_EQ(net.degenerate_activations(), 1u);
  EXPECT_THROW(net.retrieve(Pattern{99, {}}), ConfigError);
}

TEST(KWinnerMHN, MatchesDenseOracle) {
  for (double f : {1.0, 0.2}) {
    Rng r(11);
    KWinnerMHN net(cfg(60, 0.1, 25, 4, f, 0.3), r);
    DenseOracle oracle(net);
    for (int t = 0; t < 60; ++t) {
      const Pattern x = gen_random_pattern(60, 0.1, r);
      const auto dense = x.dense();
      const Pattern cue = partial_cue(x, 0.5, r);
      ASSERT_EQ(net.retrieve(cue).output.active, oracle.retrieve(cue.dense()));
      ASSERT_EQ(net.learn(x), oracle.hidden(dense));
      oracle.learn(dense);
    }
    for (std::uint32_t i = 0; i < 25; ++i) {
      for (std::uint32_t j = 0; j < 60; ++j) {
        ASSERT_NEAR(net.m(i, j), oracle.M[i][j] * oracle.F[i][j], 1e-5);
        ASSERT_NEAR(net.m_back(j, i), oracle.Mb[j][i] * oracle.F[i][j], 1e-5);
      }
    }
  }
}

TEST(KWinnerMHN, IndependentOfKernelTable) {
  std::string reference;
  for (const auto* t : simd::available_tables()) {
    ASSERT_TRUE(simd::select(t->isa));
    Rng r(12);
    KWinnerMHN net(cfg(1000, 0.1, 2000, 50, 0.05, 0.3), r);
    std::ostringstream trace;
    for (int k = 0; k < 200; ++k) {
      const Pattern x = gen_random_pattern(1000, 0.1, r);
      for (auto i : net.learn(x)) trace << i << ' ';
      for (auto i : net.retrieve(partial_cue(x, 0.5, r)).output.active) trace << i << ' ';
    }
    net.write_checkpoint(trace);
    if (reference.empty()) {
      reference = trace.str();
    } else {
      EXPECT_EQ(trace.str(), reference) << simd::isa_name(t->isa);
    }
  }
  simd::select(simd::available_tables().back()->isa);
}

TEST(KWinnerMHN, CheckpointLayout) {
  Rng r(13);
  KWinnerMHN net(cfg(20, 0.1, 4, 1, 0.5, 0.3), r);
  std::istringstream is(checkpoint(net));
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "4 20 0.5 0.3 1");
  int lines = 0;
  std::string line;
  while (std::getline(is, line)) ++lines;
  EXPECT_EQ(lines, 4 + 20 + 4);
}
