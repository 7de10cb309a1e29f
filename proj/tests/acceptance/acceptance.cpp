// Acceptance run: one [PASS]/[FAIL] line per criterion, exit code 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "fcco/diagnostics.hpp"
#include "fcco/gdro.hpp"
#include "fcco/solvers.hpp"
#include "fcco/synthetic.hpp"
#include "fcco/tpauc.hpp"
#include "test_support.hpp"

using namespace fcco;
using namespace fcco::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<std::vector<std::size_t>> full_inner(const FccoProblem& p, const std::vector<BlockId>& outer) {
  std::vector<std::vector<std::size_t>> inner;
  for (BlockId i : outer) inner.push_back(full_batch(p.num_samples(i)));
  return inner;
}

// ---------------------------------------------------------------- A1

Outcome a1_oracle_equivalence() {
  Stopwatch clock;
  CounterRng rng(101);
  double worst_fcco = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    SyntheticSpec spec;
    spec.kind = rep % 2 ? SyntheticKind::QuadraticFcco : SyntheticKind::LinearCvarFcco;
    spec.n = 1 + rng.below(8);
    spec.d = 1 + rng.below(6);
    spec.d1 = 1 + rng.below(3);
    spec.samples = 1 + rng.below(6);
    spec.seed = 1000 + static_cast<std::uint64_t>(rep);
    const auto p = gen_fcco(spec);
    const Vector w = random_vector(rng, spec.d, 2.0);
    const std::vector<Vector> g = exact_inner_values(*p, w);
    BlockEstimatorState u(p->num_blocks(), p->inner_dim());
    for (BlockId i = 0; i < p->num_blocks(); ++i) u.set(i, g[i]);
    const std::vector<BlockId> outer = full_batch(p->num_blocks());
    const Vector G = sonx_gradient(*p, w, u, outer, full_inner(*p, outer));
    worst_fcco = std::max(worst_fcco, rel_error(G, full_fcco_subgradient(*p, w)));
  }
  double worst_tcco = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::Tcco;
    spec.n = 1 + rng.below(4);
    spec.n2 = 1 + rng.below(4);
    spec.d = 1 + rng.below(6);
    spec.d1 = 1 + rng.below(3);
    spec.d2 = 1 + rng.below(3);
    spec.samples = 1 + rng.below(5);
    spec.seed = 2000 + static_cast<std::uint64_t>(rep);
    const auto p = gen_tcco(spec);
    const Vector w = random_vector(rng, spec.d, 2.0);
    const std::size_t n1 = p->num_outer(), n2 = p->num_middle();
    const std::vector<Vector> h = exact_innermost_values(*p, w);
    const std::vector<Vector> means = exact_middle_means(*p, w);
    BlockEstimatorState u(n1, p->middle_dim());
    for (BlockId i = 0; i < n1; ++i) u.set(i, means[i]);
    TccoBatches batches;
    batches.outer = full_batch(n1);
    batches.middle = full_batch(n2);
    std::vector<std::vector<Vector>> v_read(n1);
    batches.inner.resize(n1);
    for (BlockId i = 0; i < n1; ++i) {
      for (BlockId j = 0; j < n2; ++j) {
        v_read[i].push_back(h[i * n2 + j]);
        batches.inner[i].push_back(full_batch(p->num_samples(i, j)));
      }
    }
    const Vector G = sont_gradient(*p, w, u, v_read, batches);
    worst_tcco = std::max(worst_tcco, rel_error(G, full_tcco_subgradient(*p, w)));
  }
  const double secs = clock.seconds();
  return {worst_fcco <= 1e-12 && worst_tcco <= 1e-12 && secs < 10.0,
          fmt("max rel err SONX %.2e, SONT %.2e (limit 1e-12); %.2f s (limit 10 s)", worst_fcco,
              worst_tcco, secs)};
}

// ---------------------------------------------------------------- A2

// Frozen iterate, so g(w_t) = g(w_{t-1}) on every batch and the correction
// term vanishes. Error is the root mean square over blocks, averaged over
// seeds as mean squared error.
Outcome a2_error_shape() {
  Stopwatch clock;
  const std::size_t n = 20, B1 = 5, B2 = 4, T = 4000, seeds = 40;
  const double tau = 0.125, sigma = 0.1, offset = 1.0;
  SyntheticSpec spec;
  spec.n = n;
  spec.d = 3;
  spec.d1 = 1;
  spec.samples = 2000;
  spec.sigma = sigma;
  spec.seed = 7;
  const LinearFccoProblem p(spec);
  const Vector w = Vector::Constant(3, 0.3);
  const std::vector<Vector> target = exact_inner_values(p, w);
  const double gamma = default_gamma(n, B1, tau);

  std::vector<double> mse(T + 1, 0.0);
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    BlockEstimatorState u(n, 1);
    for (BlockId i = 0; i < n; ++i) u.set(i, target[i] + Vector::Constant(1, offset));
    const auto record = [&](std::size_t t) {
      double total = 0.0;
      for (BlockId i = 0; i < n; ++i) total += (u.at(i) - target[i]).squaredNorm();
      mse[t] += total / static_cast<double>(n) / static_cast<double>(seeds);
    };
    record(0);
    for (std::size_t t = 0; t < T; ++t) {
      CounterRng outer = stream(seed, t, Purpose::OuterBatch);
      const std::vector<BlockId> batch = sample_blocks(outer, n, B1);
      BatchValues g;
      for (BlockId i : batch) {
        CounterRng inner = stream(seed, t, Purpose::InnerBatch, i);
        g.push_back(p.inner_value(i, w, sample_blocks(inner, spec.samples, B2)));
      }
      msvr_update(u, batch, g, g, tau, gamma);
      record(t + 1);
    }
  }
  std::vector<double> err(T + 1);
  for (std::size_t t = 0; t <= T; ++t) err[t] = std::sqrt(mse[t]);

  double steady = 0.0;
  for (std::size_t t = T / 2; t <= T; ++t) steady += err[t];
  steady /= static_cast<double>(T - T / 2 + 1);

  // Least-squares slope of log error over the transient, while it is well
  // above the floor.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (std::size_t t = 0; t <= T && err[t] > 10.0 * steady; ++t) {
    const double x = static_cast<double>(t), y = std::log(err[t]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double observed = std::exp(slope);
  const double predicted = 1.0 - static_cast<double>(B1) * tau / (2.0 * static_cast<double>(n));
  const double factor_ratio = observed / predicted;
  const double exponent_ratio = std::log(observed) / std::log(predicted);
  const double bound = 3.0 * 2.0 * std::sqrt(tau) * sigma / std::sqrt(static_cast<double>(B2));
  const double secs = clock.seconds();
  const bool pass = factor_ratio >= 0.5 && factor_ratio <= 2.0 && exponent_ratio >= 0.5 &&
                    exponent_ratio <= 2.0 && steady <= bound && secs < 30.0;
  return {pass, fmt("rate %.5f vs %.5f (factor ratio %.3f, exponent ratio %.3f, limits [0.5, 2]); "
                    "steady %.4f (limit %.4f); %.2f s (limit 30 s)",
                    observed, predicted, factor_ratio, exponent_ratio, steady, bound, secs)};
}

// ---------------------------------------------------------------- A3

double binomial_tail(std::size_t wins, std::size_t n) {
  double p = 0.0;
  for (std::size_t k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                  static_cast<double>(n) * std::log(2.0));
  }
  return p;
}

Outcome a3_msvr_beats_ma() {
  Stopwatch clock;
  SyntheticSpec spec;
  spec.n = 20;
  spec.d = 4;
  spec.samples = 500;
  spec.sigma = 0.1;
  spec.seed = 3;
  const LinearFccoProblem p(spec);
  const std::size_t T = 3000, burn_in = 500, seeds = 10;
  std::size_t wins = 0;
  double msvr_mean = 0, ma_mean = 0;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    CounterRng dir_rng = stream(seed, 0, Purpose::Probe, 7);
    Vector dir = random_vector(dir_rng, 4);
    dir /= dir.norm();
    const auto path = [&](std::size_t t) -> Vector { return 0.02 * static_cast<double>(t) * dir; };
    TrackingConfig c;
    c.tau = 0.1;
    c.B1 = 5;
    c.B2 = 4;
    c.T = T;
    c.seed = seed;
    c.gamma = default_gamma(spec.n, c.B1, c.tau);
    const std::vector<double> msvr = track_estimator(p, path, c);
    c.gamma = 0.0;
    c.moving_average = true;
    const std::vector<double> ma = track_estimator(p, path, c);
    double a = 0, b = 0;
    for (std::size_t t = burn_in; t < T; ++t) {
      a += msvr[t];
      b += ma[t];
    }
    a /= static_cast<double>(T - burn_in);
    b /= static_cast<double>(T - burn_in);
    msvr_mean += a / seeds;
    ma_mean += b / seeds;
    if (a < b) ++wins;
  }
  const double pvalue = binomial_tail(wins, seeds);
  const double secs = clock.seconds();
  return {pvalue < 0.05 && secs < 60.0,
          fmt("MSVR lower on %zu/%zu seeds (mean error %.4f vs %.4f), sign test p = %.4f (limit 0.05); "
              "%.2f s (limit 60 s)",
              wins, seeds, msvr_mean, ma_mean, pvalue, secs)};
}

// ---------------------------------------------------------------- A4

// Full-batch subgradient descent with steps c / sqrt(k + 1), keeping the best
// iterate.
double subgradient_baseline(const FccoProblem& p, std::size_t iterations, double c) {
  Vector z = Vector::Zero(static_cast<Eigen::Index>(p.dim()));
  double best = full_fcco_objective(p, z);
  for (std::size_t k = 0; k < iterations; ++k) {
    z -= (c / std::sqrt(static_cast<double>(k) + 1.0)) * full_fcco_subgradient(p, z);
    best = std::min(best, full_fcco_objective(p, z));
  }
  return best;
}

Outcome a4_convex_convergence() {
  Stopwatch clock;
  SyntheticSpec spec;
  spec.kind = SyntheticKind::GroupedDro;
  spec.n = 50;
  spec.d = 10;
  spec.sigma = 0.05;
  spec.samples = 256;
  spec.seed = 1;
  const GroupDroProblem p(gen_grouped_dro(spec), 10);
  const double baseline = subgradient_baseline(p, 10000, 0.5);

  SolverConfig c;
  c.B1 = 50;
  c.B2 = 128;
  const FccoSchedule schedule = theorem_schedule_fcco(0.1, p.num_blocks(), c.B1, c.B2);
  c.tau = schedule.tau;
  c.eta = schedule.eta;
  c.T = 100000;
  c.seed = 1;
  c.trace_every = c.T;
  c.trace_exact_objective = false;
  const FccoRun run = sonx_run(p, c);
  const double final_value = full_fcco_objective(p, run.state.w);
  const double rel = (final_value - baseline) / std::abs(baseline);

  const FccoConstants k = p.constants();
  MoreauConfig m;
  m.rho_bar = std::max(1.0, fcco_envelope_parameter(k, p.inner_dim()));
  m.rho_F = fcco_weak_convexity(k, p.inner_dim());
  const MoreauReport moreau = moreau_grad_norm(fcco_objective(p), run.state.w, m);
  const double secs = clock.seconds();
  const bool pass = !run.aborted && std::abs(rel) <= 0.01 && moreau.grad_norm <= 0.1 && secs < 120.0;
  return {pass, fmt("final %.6f vs baseline %.6f (rel %.2e, limit 1e-2); Moreau grad %.4f at rho_bar %.3g "
                    "(limit 0.1); tau %.3g eta %.3g; %.1f s (limit 120 s)",
                    final_value, baseline, rel, moreau.grad_norm, m.rho_bar, c.tau, c.eta, secs)};
}

// ---------------------------------------------------------------- A5

Outcome a5_cvar_identities() {
  Stopwatch clock;
  CounterRng rng(55);
  double worst_tpauc = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    SurrogateLossSpec loss;
    loss.alpha = rep % 2 ? 0.25 : 0.5;
    loss.beta = (rep / 2) % 2 ? 0.25 : 0.5;
    // Sizes keep n alpha and n beta integral, where the identity is exact.
    std::vector<double> pos(4 * (1 + rng.below(2))), neg(4 * (1 + rng.below(2)));
    for (double& x : pos) x = 2.0 * rng.uniform() - 1.0;
    for (double& x : neg) x = 2.0 * rng.uniform() - 1.0;
    std::vector<double> psi_min;
    for (double h : pos) {
      psi_min.push_back(convex_min([&](double s) { return inner_psi(h, neg, s, loss); }, -1.0, 10.0));
    }
    const double optimum = convex_min(
        [&](double sp) {
          double total = 0;
          for (double v : psi_min) total += outer_f(v, sp, loss.alpha);
          return total / static_cast<double>(pos.size());
        },
        -1.0, 40.0);
    const double exact = exact_tpauc_surrogate(pos, neg, loss);
    worst_tpauc = std::max(worst_tpauc, std::abs(optimum - exact));
    worst_tpauc = std::max(worst_tpauc, std::abs(exact - sorted_surrogate(pos, neg, loss.alpha, loss.beta,
                                                                           loss.margin)));
  }
  double worst_gdro = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::GroupedDro;
    spec.n = 2 + rng.below(10);
    spec.d = 3;
    spec.samples = 8;
    spec.sigma = 0.3;
    spec.seed = 300 + static_cast<std::uint64_t>(rep);
    const GroupedDataset data = gen_grouped_dro(spec);
    const std::size_t K = 1 + rng.below(spec.n);
    const Vector w = random_vector(rng, 3);
    const double optimum =
        convex_min([&](double s) { return cvar_group_objective(w, s, data, K); }, -5.0, 20.0);
    worst_gdro = std::max(worst_gdro, std::abs(optimum - top_k_mean(group_losses(data, w), K)));
  }
  const double secs = clock.seconds();
  return {worst_tpauc <= 1e-6 && worst_gdro <= 1e-6 && secs < 10.0,
          fmt("max abs err TPAUC %.2e, group DRO %.2e (limit 1e-6); %.2f s (limit 10 s)", worst_tpauc,
              worst_gdro, secs)};
}

// ---------------------------------------------------------------- A6

Outcome a6_weak_convexity() {
  Stopwatch clock;
  const std::size_t trials = 10000;
  CounterRng rng(66);

  SyntheticSpec fs;
  fs.kind = SyntheticKind::QuadraticFcco;
  fs.n = 6;
  fs.d = 4;
  fs.d1 = 2;
  fs.samples = 5;
  fs.sigma = 0.2;
  fs.seed = 6;
  const auto fp = gen_fcco(fs);
  const double rho_f = fcco_weak_convexity(fp->constants(), fp->inner_dim());
  const ProbeReport fr =
      weak_convexity_probe(fcco_objective(*fp).value, rho_f, trials, rng, Vector::Zero(4), 3.0, 1e-9);

  SyntheticSpec ts;
  ts.kind = SyntheticKind::Tcco;
  ts.n = 4;
  ts.n2 = 3;
  ts.d = 3;
  ts.d1 = 2;
  ts.d2 = 2;
  ts.samples = 4;
  ts.sigma = 0.2;
  ts.seed = 6;
  const auto tp = gen_tcco(ts);
  const double rho_t = tcco_weak_convexity(tp->constants(), tp->middle_dim(), tp->inner_dim());
  const ProbeReport tr =
      weak_convexity_probe(tcco_objective(*tp).value, rho_t, trials, rng, Vector::Zero(3), 3.0, 1e-9);

  SyntheticSpec ms;
  ms.kind = SyntheticKind::MilTpauc;
  ms.n_pos = 4;
  ms.n_neg = 8;
  ms.d = 3;
  ms.bag_max = 1;
  ms.separable = false;
  ms.seed = 6;
  const TpaucDataset data = gen_mil_tpauc(ms).data;
  Scorer scorer;
  scorer.input_dim = 3;
  SurrogateLossSpec loss;
  double C_h = 0.0;
  for (const Bag& b : data.positives) C_h = std::max(C_h, b.row(0).norm());
  for (const Bag& b : data.negatives) C_h = std::max(C_h, b.row(0).norm());
  const double rho_psi = psi_weak_convexity(2.0, C_h, loss.beta);
  const std::vector<BlockId> negs = full_batch(data.n_minus());
  std::size_t psi_violations = 0;
  for (std::size_t i = 0; i < data.n_plus(); ++i) {
    const auto psi = [&](const Vector& z) {
      return inner_psi_subgradient(data, i, negs, z.head(3), z[3], scorer, PoolingSpec{}, loss).value;
    };
    psi_violations +=
        weak_convexity_probe(psi, rho_psi, trials / data.n_plus(), rng, Vector::Zero(4), 2.0, 1e-9).violations;
  }

  const auto neg_sq = [](const Vector& x) { return -x.squaredNorm(); };
  const ProbeReport control_ok = weak_convexity_probe(neg_sq, 2.0, trials, rng, Vector::Zero(2), 2.0, 1e-9);
  const ProbeReport control_half = weak_convexity_probe(neg_sq, 1.0, trials, rng, Vector::Zero(2), 2.0, 1e-9);
  const double secs = clock.seconds();
  const bool pass = fr.violations == 0 && tr.violations == 0 && psi_violations == 0 &&
                    control_ok.violations == 0 && control_half.violations > 0 && secs < 30.0;
  return {pass, fmt("violations FCCO %zu (rho %.3g), TCCO %zu (rho %.3g), psi %zu (rho %.3g), -x^2 at rho 2: %zu; "
                    "halved rho flags %zu/%zu; %.2f s (limit 30 s)",
                    fr.violations, rho_f, tr.violations, rho_t, psi_violations, rho_psi,
                    control_ok.violations, control_half.violations, trials, secs)};
}

// ---------------------------------------------------------------- A7

Outcome a7_desk_tpauc() {
  Stopwatch clock;
  SyntheticSpec spec;
  spec.kind = SyntheticKind::MilTpauc;
  spec.n_pos = 20;
  spec.n_neg = 80;
  spec.d = 5;
  spec.bag_max = 8;
  spec.separable = true;
  spec.seed = 1;
  const MilInstance inst = gen_mil_tpauc(spec);
  TpaucConfig c;
  c.scorer.input_dim = spec.d;
  c.loss.alpha = 0.5;
  c.loss.beta = 0.5;
  c.eta = 0.05;
  c.B1 = 5;
  c.B2 = 10;
  c.B3 = 2;
  c.T = 20000;
  c.seed = 1;
  c.trace_every = c.T;
  const TpaucRun run = tpauc_sont_run(inst.data, c);
  const auto [pos, neg] = dataset_scores(inst.data, run.state.w, c.scorer, c.pooling);
  const double metric = tpauc_metric(pos, neg, 0.5, 0.5);
  const Vector base_w = tpauc_full_batch_baseline(inst.data, c, 2000, 0.1);
  const auto [bpos, bneg] = dataset_scores(inst.data, base_w, c.scorer, c.pooling);
  const double baseline = tpauc_metric(bpos, bneg, 0.5, 0.5);
  const double secs = clock.seconds();
  const bool pass = !run.aborted && metric >= 0.95 && metric >= baseline - 0.02 && secs < 120.0;
  return {pass, fmt("TPAUC(0.5, 0.5) %.4f after %zu iterations (limit 0.95), baseline %.4f; %.2f s (limit 120 s)",
                    metric, c.T, baseline, secs)};
}

// ---------------------------------------------------------------- A8

Outcome a8_moreau_closed_forms() {
  const Objective abs_obj{[](const Vector& x) { return x.cwiseAbs().sum(); },
                          [](const Vector& x) {
                            Vector g(x.size());
                            for (Eigen::Index k = 0; k < x.size(); ++k) g[k] = x[k] > 0 ? 1.0 : (x[k] < 0 ? -1.0 : 0.0);
                            return g;
                          }};
  const Objective quad{[](const Vector& x) { return 0.5 * x.squaredNorm(); }, [](const Vector& x) { return x; }};
  // |x| with rho_bar: grad = min(rho_bar |x|, 1). Half square: rho_bar |x| / (1 + rho_bar).
  struct Case {
    const Objective* obj;
    Vector x;
    double rho_bar;
    double expected;
  };
  Vector q3(3);
  q3 << 1.0, -2.0, 0.5;
  const std::vector<Case> cases = {
      {&abs_obj, Vector::Constant(1, 1.0), 2.0, 1.0},
      {&abs_obj, Vector::Constant(1, 0.2), 2.0, 0.4},
      {&abs_obj, Vector::Constant(1, -3.0), 0.5, 1.0},
      {&quad, Vector::Constant(1, 2.0), 1.0, 1.0},
      {&quad, q3, 3.0, 3.0 * q3.norm() / 4.0},
  };
  double worst = 0.0;
  for (const Case& c : cases) {
    MoreauConfig m;
    m.rho_bar = c.rho_bar;
    worst = std::max(worst, std::abs(moreau_grad_norm(*c.obj, c.x, m).grad_norm - c.expected));
  }
  return {worst <= 1e-4, fmt("max abs err %.2e over %zu cases (limit 1e-4)", worst, cases.size())};
}

// ---------------------------------------------------------------- A9

double max_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

Outcome a9_reductions() {
  // SONT on the collapsed problem against SONX.
  SyntheticSpec spec;
  spec.kind = SyntheticKind::QuadraticFcco;
  spec.n = 6;
  spec.d = 4;
  spec.d1 = 2;
  spec.samples = 10;
  spec.sigma = 0.2;
  spec.seed = 9;
  const auto fp = gen_fcco(spec);
  const CollapsedTcco collapsed(*fp);
  SolverConfig fc;
  fc.B1 = 3;
  fc.B2 = 4;
  fc.tau = 0.3;
  fc.eta = 0.05;
  fc.T = 300;
  fc.seed = 4;
  SolverConfig tc = fc;
  tc.B2 = 1;
  tc.B3 = fc.B2;
  tc.tau1 = fc.tau;
  tc.gamma1 = default_gamma(spec.n, fc.B1, fc.tau);
  tc.tau2 = 1.0;
  tc.gamma2 = 0.0;
  tc.tracked_read = ReadOrder::PostUpdate;
  FccoState fs = sonx_init(*fp, fc);
  TccoState ts = sont_init(collapsed, tc);
  double collapse_diff = 0.0;
  for (std::size_t t = 0; t < fc.T; ++t) {
    sonx_step(*fp, fs, fc);
    sont_step(collapsed, ts, tc);
    collapse_diff = std::max(collapse_diff, max_diff(fs.w, ts.w));
  }

  // Bags of size one against the flat TPAUC solver.
  SyntheticSpec ms;
  ms.kind = SyntheticKind::MilTpauc;
  ms.n_pos = 8;
  ms.n_neg = 12;
  ms.d = 3;
  ms.bag_max = 1;
  ms.separable = false;
  ms.seed = 9;
  const TpaucDataset data = gen_mil_tpauc(ms).data;
  double bag_diff = 0.0;
  for (int variant = 0; variant < 2; ++variant) {
    TpaucConfig flat;
    flat.scorer.input_dim = 3;
    flat.eta = 0.05;
    flat.tau = 0.4;
    flat.T = 200;
    flat.seed = 2;
    flat.w0 = Vector::Constant(3, 0.3);
    if (variant == 0) {
      flat.B1 = 3;
      flat.B2 = 5;
      flat.gamma = 0.0;
    } else {
      flat.B1 = ms.n_pos;
      flat.B2 = ms.n_neg;
    }
    TpaucConfig mil = flat;
    mil.B3 = 1;
    mil.tau1 = 1.0;
    mil.gamma1 = 0.0;
    mil.gamma2 = 0.0;
    mil.tau2 = flat.tau;
    mil.gamma3 = flat.gamma ? *flat.gamma : default_gamma(ms.n_pos, flat.B1, flat.tau);
    mil.tracked_read = ReadOrder::PostUpdate;
    const TpaucRun a = tpauc_sonx_run(data, flat);
    const TpaucRun b = tpauc_sont_run(data, mil);
    bag_diff = std::max({bag_diff, max_diff(a.state.w, b.state.w), max_diff(a.state.s, b.state.s),
                         std::abs(a.state.s_prime - b.state.s_prime)});
  }

  // gamma = 0 against the moving-average variants.
  SolverConfig g0 = fc;
  g0.gamma = 0.0;
  const bool fcco_same = sonx_run(*fp, g0).state.w == sonx_run_ma(*fp, g0).state.w;
  SyntheticSpec tspec;
  tspec.kind = SyntheticKind::Tcco;
  tspec.n = 4;
  tspec.n2 = 3;
  tspec.d = 3;
  tspec.samples = 6;
  tspec.sigma = 0.2;
  tspec.seed = 9;
  const auto tp = gen_tcco(tspec);
  SolverConfig t0;
  t0.B1 = 2;
  t0.B2 = 2;
  t0.B3 = 3;
  t0.eta = 0.05;
  t0.T = 200;
  t0.gamma1 = 0.0;
  t0.gamma2 = 0.0;
  const bool tcco_same = sont_run(*tp, t0).state.w == sont_run_ma(*tp, t0).state.w;

  const bool pass = collapse_diff <= 1e-12 && bag_diff <= 1e-12 && fcco_same && tcco_same;
  return {pass, fmt("collapse max |dw| %.2e, bags-of-one max diff %.2e (limit 1e-12); gamma=0 vs MA identical: "
                    "FCCO %s, TCCO %s",
                    collapse_diff, bag_diff, fcco_same ? "yes" : "no", tcco_same ? "yes" : "no")};
}

// ---------------------------------------------------------------- A10

std::string trace_body(const std::filesystem::path& dir) {
  std::ifstream in(dir / "trace.csv", std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome a10_determinism() {
  namespace fs = std::filesystem;
  using nlohmann::json;
  const fs::path root = fs::temp_directory_path() / "fcco_acceptance_a10";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<json> configs = {
      {{"solver", "sonx"},
       {"seed", 11},
       {"problem", {{"synthetic", "quadratic-fcco"}, {"n", 10}, {"d", 4}, {"d1", 2}, {"samples", 20}, {"sigma", 0.1}}},
       {"params", {{"B1", 4}, {"B2", 4}, {"eta", 0.05}, {"tau", 0.5}, {"T", 500}}},
       {"trace", {{"every", 5}, {"estimator_error", true}}}},
      {{"solver", "sont"},
       {"seed", 11},
       {"problem", {{"synthetic", "tcco"}, {"n", 6}, {"n2", 3}, {"d", 3}, {"d1", 1}, {"d2", 2}, {"samples", 10}, {"sigma", 0.1}}},
       {"params", {{"B1", 2}, {"B2", 2}, {"B3", 3}, {"eta", 0.02}, {"T", 300}}}},
      {{"solver", "tpauc-sont"},
       {"seed", 11},
       {"problem", {{"synthetic", "mil-tpauc"}, {"n_pos", 10}, {"n_neg", 30}, {"d", 4}}},
       {"params", {{"B1", 4}, {"B2", 8}, {"B3", 2}, {"eta", 0.05}, {"T", 300}}}},
  };
  std::size_t identical = 0, nonempty = 0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const fs::path cfg = root / ("config" + std::to_string(k) + ".json");
    std::ofstream(cfg) << configs[k].dump();
    std::string bodies[2];
    for (int rep = 0; rep < 2; ++rep) {
      cli::Options o;
      o.config_path = cfg.string();
      o.out = (root / ("run" + std::to_string(k) + "_" + std::to_string(rep))).string();
      o.quiet = true;
      if (cli::cmd_run(o) != cli::kOk) return {false, fmt("cmd_run failed for config %zu", k)};
      bodies[rep] = trace_body(*o.out);
    }
    if (bodies[0] == bodies[1]) ++identical;
    if (std::count(bodies[0].begin(), bodies[0].end(), '\n') > 1) ++nonempty;
  }
  fs::remove_all(root);
  return {identical == configs.size() && nonempty == configs.size(),
          fmt("%zu/%zu solver configs gave byte-identical trace.csv across repeated runs", identical,
              configs.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"A1 oracle equivalence", a1_oracle_equivalence},
      {"A2 estimator error shape", a2_error_shape},
      {"A3 MSVR beats MA on a drifting target", a3_msvr_beats_ma},
      {"A4 convergence on convex FCCO", a4_convex_convergence},
      {"A5 CVaR identities", a5_cvar_identities},
      {"A6 weak-convexity probes", a6_weak_convexity},
      {"A7 desk-scale TPAUC", a7_desk_tpauc},
      {"A8 Moreau closed forms", a8_moreau_closed_forms},
      {"A9 reductions", a9_reductions},
      {"A10 determinism", a10_determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
