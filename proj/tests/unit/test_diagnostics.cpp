#include <gtest/gtest.h>

#include <cmath>

#include "fcco/diagnostics.hpp"
#include "fcco/solvers.hpp"
#include "fcco/synthetic.hpp"
#include "test_support.hpp"

using namespace fcco;
using namespace fcco::testing;

namespace {

Objective abs_objective() {
  return {[](const Vector& x) { return x.cwiseAbs().sum(); },
          [](const Vector& x) {
            Vector g(x.size());
            for (Eigen::Index k = 0; k < x.size(); ++k) g[k] = x[k] > 0 ? 1.0 : (x[k] < 0 ? -1.0 : 0.0);
            return g;
          }};
}

Objective half_square() {
  return {[](const Vector& x) { return 0.5 * x.squaredNorm(); }, [](const Vector& x) { return x; }};
}

MoreauConfig moreau(double rho_bar) {
  MoreauConfig c;
  c.rho_bar = rho_bar;
  return c;
}

SyntheticSpec quad_spec(std::uint64_t seed, std::size_t n = 6) {
  SyntheticSpec s;
  s.kind = SyntheticKind::QuadraticFcco;
  s.n = n;
  s.d = 4;
  s.d1 = 2;
  s.samples = 5;
  s.sigma = 0.2;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Prox, ClosedForms) {
  const Vector one = Vector::Ones(1);
  EXPECT_NEAR(prox_point(abs_objective(), one, moreau(2.0)).point[0], 0.5, 1e-4);
  EXPECT_NEAR(prox_point(half_square(), Vector::Constant(1, 2.0), moreau(1.0)).point[0], 1.0, 1e-4);
  EXPECT_NEAR(prox_point(abs_objective(), Vector::Zero(1), moreau(2.0)).point[0], 0.0, 1e-6);
  MoreauConfig bad = moreau(1.0);
  bad.rho_F = 1.0;
  EXPECT_THROW(prox_point(half_square(), one, bad), InvalidConfig);
}

TEST(Prox, NonFiniteObjectiveIsError) {
  const Objective nan{[](const Vector&) { return NAN; }, [](const Vector& x) { return x; }};
  EXPECT_THROW(prox_point(nan, Vector::Ones(1), moreau(1.0)), Error);
}

TEST(Moreau, ClosedForms) {
  EXPECT_NEAR(moreau_grad_norm(abs_objective(), Vector::Ones(1), moreau(2.0)).grad_norm, 1.0, 1e-4);
  EXPECT_NEAR(moreau_grad_norm(half_square(), Vector::Constant(1, 2.0), moreau(1.0)).grad_norm, 1.0, 1e-4);
  EXPECT_NEAR(moreau_grad_norm(abs_objective(), Vector::Zero(1), moreau(2.0)).grad_norm, 0.0, 1e-6);
}

TEST(Moreau, EnvelopeBelowObjectiveAndDescentAtProx) {
  const auto p = gen_fcco(quad_spec(3));
  const Objective obj = fcco_objective(*p);
  MoreauConfig c;
  c.rho_bar = std::max(1.0, fcco_envelope_parameter(p->constants(), p->inner_dim()));
  c.rho_F = fcco_weak_convexity(p->constants(), p->inner_dim());
  c.inner_iterations = 3000;
  CounterRng rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const Vector x = random_vector(rng, 4, 2.0);
    const MoreauReport r = moreau_grad_norm(obj, x, c);
    EXPECT_LE(r.envelope_value, obj.value(x) + 1e-12);
    EXPECT_TRUE(r.descent_ok);
    EXPECT_LE(r.value_at_prox, r.value_at_x + r.gap_bound);
  }
}

TEST(FullSubgradient, LinearChain) {
  Vector c(3);
  c << 1.0, -2.0, 0.5;
  LambdaFcco p;
  p.d = 3;
  p.g = [c](const Vector& w) { return Vector::Constant(1, c.dot(w)); };
  p.jac = [c](const Vector&) { return Matrix(c); };
  p.f = [](const Vector& u) { return u[0]; };
  p.df = [](const Vector&) { return Vector::Ones(1); };
  p.offsets = {{Vector::Zero(1)}};
  EXPECT_EQ(full_fcco_subgradient(p, Vector::Ones(3)), c);
}

TEST(FullSubgradient, LinearProblemMatchesHandOracle) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::LinearCvarFcco;
  spec.n = 7;
  spec.d = 4;
  spec.d1 = 2;
  spec.samples = 9;
  spec.sigma = 0.3;
  spec.seed = 4;
  const LinearFccoProblem p(spec);
  CounterRng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const Vector w = random_vector(rng, 4, 2.0);
    Vector G = Vector::Zero(4);
    double F = 0;
    for (BlockId i = 0; i < 7; ++i) {
      // The noise has mean exactly zero, so g_i(w) = A_i w + b_i.
      const Vector g = p.A(i) * w + p.b(i);
      for (Eigen::Index k = 0; k < 2; ++k) {
        F += std::max(0.0, g[k]);
        if (g[k] > 0) G += p.A(i).row(k).transpose();
      }
    }
    EXPECT_NEAR(full_fcco_objective(p, w), F / 7, 1e-12);
    EXPECT_LE(rel_error(full_fcco_subgradient(p, w), G / 7), 1e-12);
  }
}

TEST(FullSubgradient, FiniteDifferenceAgreement) {
  const auto p = gen_fcco(quad_spec(5));
  SyntheticSpec ts;
  ts.kind = SyntheticKind::Tcco;
  ts.n = 3;
  ts.n2 = 2;
  ts.d = 3;
  ts.d1 = 2;
  ts.d2 = 2;
  ts.samples = 4;
  ts.sigma = 0.1;
  ts.seed = 5;
  const auto t = gen_tcco(ts);
  CounterRng rng(3);
  int checked = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Vector w = random_vector(rng, 4, 1.5);
    const Objective obj = fcco_objective(*p);
    const FiniteDifferenceReport r = finite_difference_check(obj.value, obj.subgradient, w, 1e-6);
    if (!r.kinked.empty()) continue;
    ++checked;
    EXPECT_LE(r.max_rel_error, 1e-5);
    const Vector v = random_vector(rng, 3, 1.5);
    const Objective tobj = tcco_objective(*t);
    const FiniteDifferenceReport rt = finite_difference_check(tobj.value, tobj.subgradient, v, 1e-6);
    if (rt.kinked.empty()) EXPECT_LE(rt.max_rel_error, 1e-5);
  }
  EXPECT_GT(checked, 10);
}

TEST(FullSubgradient, TccoLinearChainAndCollapse) {
  const auto p = gen_fcco(quad_spec(6));
  const CollapsedTcco t(*p);
  CounterRng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector w = random_vector(rng, 4, 2.0);
    EXPECT_LE(rel_error(full_tcco_subgradient(t, w), full_fcco_subgradient(*p, w)), 1e-14);
    EXPECT_NEAR(full_tcco_objective(t, w), full_fcco_objective(*p, w), 1e-14);
  }
}

// Averaging the SONX gradient over every outer batch of size B1 recovers the
// full subgradient.
TEST(OracleConsistency, AverageOverAllBatches) {
  for (std::size_t n : {4u, 6u}) {
    const auto p = gen_fcco(quad_spec(7, n));
    CounterRng rng(9);
    const Vector w = random_vector(rng, 4, 1.5);
    const std::vector<Vector> g = exact_inner_values(*p, w);
    BlockEstimatorState u(n, 2);
    for (BlockId i = 0; i < n; ++i) u.set(i, g[i]);
    const Vector full = full_fcco_subgradient(*p, w);
    for (std::size_t B1 = 1; B1 <= 3; ++B1) {
      Vector total = Vector::Zero(4);
      std::size_t count = 0;
      std::vector<bool> mask(n, false);
      std::fill(mask.begin(), mask.begin() + static_cast<long>(B1), true);
      do {
        std::vector<BlockId> batch;
        std::vector<std::vector<std::size_t>> inner;
        for (BlockId i = 0; i < n; ++i) {
          if (!mask[i]) continue;
          batch.push_back(i);
          inner.push_back(full_batch(p->num_samples(i)));
        }
        total += sonx_gradient(*p, w, u, batch, inner);
        ++count;
      } while (std::prev_permutation(mask.begin(), mask.end()));
      EXPECT_LE(rel_error(total / static_cast<double>(count), full), 1e-12) << "n=" << n << " B1=" << B1;
    }
  }
}

TEST(Probe, ConvexAndControls) {
  CounterRng rng(1);
  const auto neg_sq = [](const Vector& x) { return -x.squaredNorm(); };
  EXPECT_EQ(weak_convexity_probe([](const Vector& x) { return x.cwiseAbs().sum(); }, 0.0, 2000, rng,
                                 Vector::Zero(3), 2.0)
                .violations,
            0u);
  EXPECT_EQ(weak_convexity_probe(neg_sq, 2.0, 2000, rng, Vector::Zero(1), 2.0).violations, 0u);
  EXPECT_GT(weak_convexity_probe(neg_sq, 1.0, 2000, rng, Vector::Zero(1), 2.0).violations, 0u);
  EXPECT_THROW(weak_convexity_probe(neg_sq, -1.0, 10, rng, Vector::Zero(1), 1.0), InvalidConfig);
}

TEST(FiniteDifference, QuadraticAndLinear) {
  CounterRng rng(2);
  const Vector x = random_vector(rng, 5);
  Matrix A = Matrix::Random(5, 5);
  const Matrix Q = A.transpose() * A;
  const FiniteDifferenceReport q = finite_difference_check(
      [&](const Vector& z) { return 0.5 * z.dot(Q * z); }, [&](const Vector& z) { return Vector(Q * z); }, x,
      1e-5);
  EXPECT_LE(q.max_rel_error, 1e-8);
  const Vector c = random_vector(rng, 5);
  const FiniteDifferenceReport l = finite_difference_check([&](const Vector& z) { return c.dot(z); },
                                                           [&](const Vector&) { return c; }, x, 1e-3);
  EXPECT_LE(l.max_rel_error, 1e-12);
  const FiniteDifferenceReport k = finite_difference_check(
      [](const Vector& z) { return std::abs(z[0]); },
      [](const Vector& z) { return Vector::Constant(1, z[0] > 0 ? 1.0 : 0.0); }, Vector::Zero(1), 1e-6);
  EXPECT_EQ(k.kinked.size(), 1u);
}

TEST(TrackEstimator, FrozenPathConvergesToNoiseFloor) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::LinearCvarFcco;
  spec.n = 10;
  spec.d = 3;
  spec.samples = 200;
  spec.sigma = 0.1;
  const auto p = gen_fcco(spec);
  TrackingConfig c;
  c.tau = 0.2;
  c.B1 = 10;
  c.B2 = 4;
  c.T = 2000;
  const Vector w = Vector::Constant(3, 0.5);
  const std::vector<double> err = track_estimator(*p, [&](std::size_t) { return w; }, c);
  ASSERT_EQ(err.size(), 2000u);
  double tail = 0;
  for (std::size_t t = 1000; t < 2000; ++t) tail += err[t];
  EXPECT_LE(tail / 1000, 3 * 2 * std::sqrt(c.tau) * 0.1 / 2);
}
