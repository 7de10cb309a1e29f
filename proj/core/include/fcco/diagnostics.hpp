#pragma once

#include <functional>
#include <vector>

#include "fcco/config.hpp"
#include "fcco/problem.hpp"
#include "fcco/rng.hpp"

namespace fcco {

// Deterministic full-batch objective with a fixed subgradient selection.
struct Objective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> subgradient;
};

// g_i(w) for every block, evaluated on the full sample set.
std::vector<Vector> exact_inner_values(const FccoProblem& problem, const Vector& w);
double full_fcco_objective(const FccoProblem& problem, const Vector& w);
// (1/n) sum_i dg_i(w) df_i(g_i(w)).
Vector full_fcco_subgradient(const FccoProblem& problem, const Vector& w);
Objective fcco_objective(const FccoProblem& problem);

// h_{i,j}(w) for every pair, indexed i * n2 + j.
std::vector<Vector> exact_innermost_values(const TccoProblem& problem, const Vector& w);
// (1/n2) sum_j g_i(h_{i,j}(w)) for every outer block.
std::vector<Vector> exact_middle_means(const TccoProblem& problem, const Vector& w);
double full_tcco_objective(const TccoProblem& problem, const Vector& w);
// (1/n1) sum_i [(1/n2) sum_j dh_{i,j} dg_i(h_{i,j})] df_i((1/n2) sum_j g_i(h_{i,j})).
Vector full_tcco_subgradient(const TccoProblem& problem, const Vector& w);
Objective tcco_objective(const TccoProblem& problem);

struct ProxResult {
  Vector point;
  double objective_value = 0.0;   // phi(point)
  double subproblem_value = 0.0;  // phi(point) + rho_bar/2 ||point - x||^2
  // A-priori optimality gap bound 2 G^2 / (mu (K + 1)) of the averaged iterate.
  double gap_bound = 0.0;
};

// Approximate prox_{phi / rho_bar}(x) by subgradient descent with step
// 2c / (mu (k + 1)), weighted averaging, and best-point selection across
// warm restarts. mu = rho_bar - rho_F.
ProxResult prox_point(const Objective& objective, const Vector& x, const MoreauConfig& cfg);

struct MoreauReport {
  double grad_norm = 0.0;        // rho_bar ||x - prox(x)||
  double envelope_value = 0.0;   // phi_lambda(x) estimate
  double value_at_x = 0.0;
  double value_at_prox = 0.0;
  bool descent_ok = false;       // phi(prox) <= phi(x) + gap bound
  double gap_bound = 0.0;
  Vector prox;
};

MoreauReport moreau_grad_norm(const Objective& objective, const Vector& x,
                              const MoreauConfig& cfg);

struct ProbeReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double worst_excess = 0.0;  // max of h(mid) - (h(x) + h(y)) / 2
  bool passed() const noexcept { return violations == 0; }
};

// Midpoint convexity of h(z) = phi(z) + rho/2 ||z||^2 on random pairs drawn
// uniformly from the box center +- radius.
ProbeReport weak_convexity_probe(const std::function<double(const Vector&)>& objective,
                                 double rho, std::size_t trials, CounterRng& rng,
                                 const Vector& center, double radius, double tolerance = 1e-9);

struct FiniteDifferenceReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  // Coordinates whose one-sided differences disagree (likely a kink).
  std::vector<std::size_t> kinked;
};

// Central differences per coordinate; error is |fd - g| / max(1, |g|).
FiniteDifferenceReport finite_difference_check(
    const std::function<double(const Vector&)>& value_fn,
    const std::function<Vector(const Vector&)>& grad_fn, const Vector& x, double step);

// Estimator tracking along a prescribed path w_t, for comparing MSVR with
// the moving average. Batches use the same streams as sonx_run.
struct TrackingConfig {
  double tau = 0.1;
  double gamma = 0.0;
  std::size_t B1 = 1;
  std::size_t B2 = 1;
  std::size_t T = 0;
  std::uint64_t seed = 0;
  bool moving_average = false;  // skip the correction and the g_prev evaluations
};

// Error (1/n) sum_i ||u_{i,t+1} - g_i(w_{t+1})|| after every step t.
std::vector<double> track_estimator(const FccoProblem& problem,
                                    const std::function<Vector(std::size_t)>& path,
                                    const TrackingConfig& config);

}  // namespace fcco
