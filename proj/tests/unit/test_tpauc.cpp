#include <gtest/gtest.h>

#include <cmath>

#include "fcco/diagnostics.hpp"
#include "fcco/synthetic.hpp"
#include "fcco/tpauc.hpp"
#include "test_support.hpp"

using namespace fcco;
using namespace fcco::testing;

namespace {

Scorer linear_scorer(std::size_t d) {
  Scorer s;
  s.input_dim = d;
  return s;
}

std::vector<double> random_scores(CounterRng& rng, std::size_t n) {
  std::vector<double> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(2.0 * rng.uniform() - 1.0);
  return out;
}

TpaucDataset small_mil(std::uint64_t seed, std::size_t bag_max = 4) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::MilTpauc;
  spec.n_pos = 6;
  spec.n_neg = 10;
  spec.d = 3;
  spec.bag_min = 1;
  spec.bag_max = bag_max;
  spec.separable = false;
  spec.seed = seed;
  return gen_mil_tpauc(spec).data;
}

TpaucConfig base_config(const TpaucDataset& data) {
  TpaucConfig c;
  c.scorer = linear_scorer(data.feature_dim());
  c.eta = 0.05;
  c.B1 = 3;
  c.B2 = 4;
  c.B3 = 2;
  c.T = 50;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(OuterF, Examples) {
  EXPECT_DOUBLE_EQ(outer_f(1.0, 0.0, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(outer_f(-1.0, 0.0, 0.5), 0.0);
  EXPECT_THROW(outer_f(1.0, 0.0, 0.0), InvalidConfig);
  EXPECT_THROW(outer_f(1.0, 0.0, -0.5), InvalidConfig);
}

TEST(OuterF, SubgradientRanges) {
  CounterRng rng(3);
  for (int k = 0; k < 10000; ++k) {
    const double g = 4 * rng.uniform() - 2, sp = 4 * rng.uniform() - 2;
    const double alpha = 0.05 + 0.95 * rng.uniform();
    const double dg = outer_f_dg(g, sp, alpha), ds = outer_f_ds_prime(g, sp, alpha);
    EXPECT_GE(dg, 0.0);
    EXPECT_LE(dg, 1.0 / alpha);
    EXPECT_GE(ds, 1.0 - 1.0 / alpha);
    EXPECT_LE(ds, 1.0);
  }
}

TEST(InnerPsi, Examples) {
  SurrogateLossSpec spec;
  spec.beta = 0.25;
  for (double s : {-1.0, 0.0, 0.4, 2.0}) {
    EXPECT_DOUBLE_EQ(inner_psi(0.3, {0.3, 0.3}, s, spec), s + std::max(0.0, 1.0 - s) / 0.25);
  }
  EXPECT_DOUBLE_EQ(inner_psi(0.0, {0.5, -0.2}, 1e6, spec), 1e6);
}

TEST(InnerPsi, MatchesNaiveLoop) {
  CounterRng rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    SurrogateLossSpec spec;
    spec.beta = 0.1 + 0.9 * rng.uniform();
    spec.margin = 0.5 + rng.uniform();
    const double pos = 2 * rng.uniform() - 1, s = 3 * rng.uniform() - 1;
    const std::vector<double> neg = random_scores(rng, 5);
    double naive = 0;
    for (double q : neg) naive += s + std::max(0.0, pair_loss(q, pos, spec.margin) - s) / spec.beta;
    EXPECT_NEAR(inner_psi(pos, neg, s, spec), naive / 5, 1e-13);
  }
}

TEST(ExactSurrogate, HardestPairExample) {
  SurrogateLossSpec spec;
  EXPECT_NEAR(exact_tpauc_surrogate({0.9, 0.1}, {0.8, 0.2}, spec), 2.89, 1e-12);
}

TEST(ExactSurrogate, FullSelectionIsAllPairsAverage) {
  CounterRng rng(1);
  SurrogateLossSpec spec;
  spec.alpha = spec.beta = 1.0;
  const std::vector<double> pos = random_scores(rng, 5), neg = random_scores(rng, 7);
  double total = 0;
  for (double p : pos) {
    for (double q : neg) total += pair_loss(q, p, 1.0);
  }
  EXPECT_NEAR(exact_tpauc_surrogate(pos, neg, spec), total / 35, 1e-13);
  spec.alpha = 0.1;
  EXPECT_THROW(exact_tpauc_surrogate(pos, neg, spec), InvalidConfig);
}

TEST(ExactSurrogate, MatchesSortOracle) {
  CounterRng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    SurrogateLossSpec spec;
    spec.alpha = rep % 2 ? 0.25 : 0.5;
    spec.beta = rep % 3 ? 0.5 : 0.25;
    const std::vector<double> pos = random_scores(rng, 8), neg = random_scores(rng, 8);
    EXPECT_NEAR(exact_tpauc_surrogate(pos, neg, spec),
                sorted_surrogate(pos, neg, spec.alpha, spec.beta, spec.margin), 1e-13);
  }
}

TEST(ExactSurrogate, MonotoneInScores) {
  CounterRng rng(4);
  SurrogateLossSpec spec;
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> pos = random_scores(rng, 6), neg = random_scores(rng, 6);
    const double base = exact_tpauc_surrogate(pos, neg, spec);
    const std::size_t k = rng.below(6);
    const double bump = rng.uniform();
    std::vector<double> neg_up = neg;
    neg_up[k] += bump;
    EXPECT_GE(exact_tpauc_surrogate(pos, neg_up, spec), base - 1e-14);
    std::vector<double> pos_up = pos;
    pos_up[k] += bump;
    EXPECT_LE(exact_tpauc_surrogate(pos_up, neg, spec), base + 1e-14);
  }
}

// min over (s, s') of the reformulation, found by nested convex searches.
TEST(CvarReformulation, MinimumEqualsExactSurrogate) {
  CounterRng rng(9);
  for (int rep = 0; rep < 10; ++rep) {
    SurrogateLossSpec spec;
    spec.alpha = rep % 2 ? 0.25 : 0.5;
    spec.beta = 0.5;
    const std::vector<double> pos = random_scores(rng, 4), neg = random_scores(rng, 4);
    std::vector<double> psi_min;
    for (double p : pos) {
      psi_min.push_back(convex_min([&](double s) { return inner_psi(p, neg, s, spec); }, -1.0, 10.0));
    }
    const double best = convex_min(
        [&](double sp) {
          double total = 0;
          for (double v : psi_min) total += outer_f(v, sp, spec.alpha);
          return total / static_cast<double>(pos.size());
        },
        -1.0, 40.0);
    EXPECT_NEAR(best, exact_tpauc_surrogate(pos, neg, spec), 1e-6);
  }
}

TEST(Metric, Examples) {
  EXPECT_DOUBLE_EQ(tpauc_metric({2, 3}, {0, 1}, 0.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(tpauc_metric({0, 1}, {2, 3}, 0.5, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(tpauc_metric({0.9, 0.1}, {0.8, 0.2}, 0.5, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(tpauc_metric({1, 1}, {1, 1}, 1, 1), 0.5);
  EXPECT_THROW(tpauc_metric({1}, {0}, 0.5, 0.5), MetricUndefined);
}

TEST(Metric, MatchesBruteForce) {
  CounterRng rng(6);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> pos, neg;
    for (int k = 0; k < 8; ++k) pos.push_back(std::round(4 * rng.uniform()) / 4);
    for (int k = 0; k < 12; ++k) neg.push_back(std::round(4 * rng.uniform()) / 4);
    EXPECT_DOUBLE_EQ(tpauc_metric(pos, neg, 0.5, 0.25), brute_metric(pos, neg, 0.5, 0.25));
  }
}

TEST(Pooling, MeanPool) {
  const Scorer sc = linear_scorer(2);
  Vector w(2);
  w << 0.5, -2.0;
  Matrix one(1, 2);
  one << 1.0, 3.0;
  EXPECT_DOUBLE_EQ(mean_pool(one, w, sc), 0.5 - 6.0);
  EXPECT_DOUBLE_EQ(mean_pool(one.replicate(5, 1), w, sc), 0.5 - 6.0);
  CounterRng rng(1);
  Matrix bag(7, 2);
  for (Eigen::Index r = 0; r < 7; ++r) bag.row(r) = random_vector(rng, 2).transpose();
  double naive = 0;
  for (Eigen::Index r = 0; r < 7; ++r) naive += bag(r, 0) * w[0] + bag(r, 1) * w[1];
  EXPECT_NEAR(mean_pool(bag, w, sc), naive / 7, 1e-14);
  EXPECT_THROW(mean_pool(Matrix(0, 2), w, sc), DataError);
}

TEST(Pooling, SmoothedMax) {
  const Scorer sc = linear_scorer(1);
  const Vector w = Vector::Ones(1);
  EXPECT_NEAR(smoothed_max_pool(Matrix::Constant(4, 1, 0.7), w, sc, 0.3), 0.7, 1e-14);
  Matrix bag(3, 1);
  bag << 0.1, 1.0, 0.4;
  EXPECT_NEAR(smoothed_max_pool(bag, w, sc, 1e-3), 1.0, 1e-2);
  CounterRng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    Matrix b(5, 1);
    for (int r = 0; r < 5; ++r) b(r, 0) = 4 * rng.uniform() - 2;
    const double v = smoothed_max_pool(b, w, sc, 0.05 + rng.uniform());
    EXPECT_GE(v, b.mean() - 1e-12);
    EXPECT_LE(v, b.maxCoeff() + 1e-12);
  }
  EXPECT_THROW(smoothed_max_pool(bag, w, sc, 0.0), InvalidConfig);
}

TEST(Pooling, GradientsMatchFiniteDifferences) {
  CounterRng rng(8);
  Matrix bag(6, 3);
  for (Eigen::Index r = 0; r < 6; ++r) bag.row(r) = random_vector(rng, 3).transpose();
  for (bool mlp : {false, true}) {
    Scorer sc = linear_scorer(3);
    if (mlp) {
      sc.kind = Scorer::Kind::Mlp;
      sc.hidden = 4;
      sc.sigmoid_output = true;
    }
    const PoolingSpec pool{PoolingSpec::Kind::SmoothedMax, 0.5, 0.0};
    const Vector w = random_vector(rng, sc.num_params());
    const FiniteDifferenceReport r = finite_difference_check(
        [&](const Vector& x) { return pooled_score(bag, x, sc, pool); },
        [&](const Vector& x) { return pooled_score_grad(bag, x, sc, pool); }, w, 1e-6);
    EXPECT_LE(r.max_rel_error, 1e-5);
  }
}

TEST(TpaucObjective, SubgradientMatchesFiniteDifferences) {
  const TpaucDataset data = small_mil(3);
  TpaucConfig c = base_config(data);
  CounterRng rng(10);
  const Vector w = random_vector(rng, 3, 0.3);
  Vector s = random_vector(rng, data.n_plus(), 0.5);
  s.array() += 1.3;
  const double sp = 0.2;
  const Eigen::Index d = 3, np = static_cast<Eigen::Index>(data.n_plus());
  const auto value = [&](const Vector& z) {
    return tpauc_objective(data, c, z.head(d), z.segment(d, np), z[d + np]);
  };
  const auto grad = [&](const Vector& z) {
    return tpauc_objective_subgradient(data, c, z.head(d), z.segment(d, np), z[d + np]);
  };
  Vector z(d + np + 1);
  z << w, s, sp;
  const FiniteDifferenceReport r = finite_difference_check(value, grad, z, 1e-6);
  ASSERT_TRUE(r.kinked.empty());
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(TpaucSonx, ZeroStepSizeMovesOnlyEstimators) {
  TpaucDataset data = small_mil(1, 1);
  TpaucConfig c = base_config(data);
  c.eta = 0.0;
  c.w0 = Vector::Constant(3, 0.4);
  TpaucState s = tpauc_init(data, c, false);
  const Vector w0 = s.w, s0 = s.s;
  const BlockEstimatorState u0 = s.u;
  for (int t = 0; t < 5; ++t) tpauc_sonx_step(data, s, c);
  EXPECT_EQ(s.w, w0);
  EXPECT_EQ(s.s, s0);
  EXPECT_EQ(s.s_prime, 0.0);
  EXPECT_FALSE(s.u == u0);
}

TEST(TpaucSonx, Determinism) {
  TpaucDataset data = small_mil(2, 1);
  const TpaucConfig c = base_config(data);
  const TpaucRun a = tpauc_sonx_run(data, c), b = tpauc_sonx_run(data, c);
  EXPECT_TRUE((a.state.w.array() == b.state.w.array()).all());
  EXPECT_TRUE((a.state.s.array() == b.state.s.array()).all());
  EXPECT_EQ(a.state.s_prime, b.state.s_prime);
}

TEST(TpaucSont, ZeroStepSizesMoveOnlyTrackers) {
  const TpaucDataset data = small_mil(4);
  TpaucConfig c = base_config(data);
  c.eta = 0.0;
  c.eta1 = 0.0;
  c.eta2 = 0.0;
  c.w0 = Vector::Constant(3, 0.4);
  TpaucState s = tpauc_init(data, c, true);
  const Vector w0 = s.w;
  const BlockEstimatorState u0 = s.u, v0 = s.v;
  for (int t = 0; t < 5; ++t) tpauc_sont_step(data, s, c);
  EXPECT_EQ(s.w, w0);
  EXPECT_EQ(s.s, Vector::Zero(static_cast<Eigen::Index>(data.n_plus())));
  EXPECT_EQ(s.s_prime, 0.0);
  EXPECT_FALSE(s.u == u0);
  EXPECT_FALSE(s.v == v0);
}

TEST(TpaucSont, TrackersStayInsideRadius) {
  const TpaucDataset data = small_mil(5, 8);
  TpaucConfig c = base_config(data);
  c.eta = 0.5;
  c.projection_radius = 0.2;
  c.w0 = Vector::Constant(3, 2.0);
  TpaucState s = tpauc_init(data, c, true);
  for (int t = 0; t < 100; ++t) {
    tpauc_sont_step(data, s, c);
    for (std::size_t k = 0; k < s.v.size(); ++k) EXPECT_LE(std::abs(s.v.at(k)[0]), 0.2 + 1e-12);
  }
}

TEST(TpaucSont, Determinism) {
  const TpaucDataset data = small_mil(6);
  const TpaucConfig c = base_config(data);
  const TpaucRun a = tpauc_sont_run(data, c), b = tpauc_sont_run(data, c);
  EXPECT_TRUE((a.state.w.array() == b.state.w.array()).all());
}

TEST(Psi, WeakConvexityProbeWithLinearScorer) {
  const TpaucDataset data = small_mil(7, 1);
  const Scorer sc = linear_scorer(3);
  const PoolingSpec pool;
  SurrogateLossSpec spec;
  double C_h = 0;
  for (const Bag& b : data.positives) C_h = std::max(C_h, b.row(0).norm());
  for (const Bag& b : data.negatives) C_h = std::max(C_h, b.row(0).norm());
  const double rho = psi_weak_convexity(2.0, C_h, spec.beta);
  const std::vector<BlockId> negs = full_batch(data.n_minus());
  CounterRng rng(1);
  for (std::size_t i = 0; i < data.n_plus(); ++i) {
    const auto psi = [&](const Vector& z) {
      return inner_psi_subgradient(data, i, negs, z.head(3), z[3], sc, pool, spec).value;
    };
    const ProbeReport r = weak_convexity_probe(psi, rho, 2000, rng, Vector::Zero(4), 2.0, 1e-9);
    EXPECT_EQ(r.violations, 0u) << "positive " << i;
  }
}

TEST(Validate, RejectsBadTpaucConfig) {
  const TpaucDataset data = small_mil(1);
  TpaucConfig c = base_config(data);
  EXPECT_NO_THROW(validate_tpauc(c, data));
  TpaucConfig bad = c;
  bad.B1 = data.n_plus() + 1;
  EXPECT_THROW(validate_tpauc(bad, data), InvalidConfig);
  bad = c;
  bad.loss.alpha = 0;
  EXPECT_THROW(validate_tpauc(bad, data), InvalidConfig);
  bad = c;
  bad.pooling.kind = PoolingSpec::Kind::SmoothedMax;
  bad.pooling.tau = -1;
  EXPECT_THROW(validate_tpauc(bad, data), InvalidConfig);
  TpaucDataset empty = data;
  empty.negatives.clear();
  EXPECT_THROW(validate_tpauc(c, empty), DataError);
}
