#pragma once

#include <cstdint>
#include <optional>

#include "fcco/problem.hpp"
#include "fcco/types.hpp"

namespace fcco {

// Which estimator snapshot a consumer reads within one iteration: the value
// from before this iteration's estimator update (the algorithm's indexing)
// or the freshly updated one (ablation).
enum class ReadOrder { PreUpdate, PostUpdate };

// Proximal-point / Moreau-envelope probe settings. lambda = 1 / rho_bar.
struct MoreauConfig {
  double rho_bar = 1.0;
  // Declared weak-convexity modulus of the probed objective; the prox
  // subproblem is (rho_bar - rho_F)-strongly convex.
  double rho_F = 0.0;
  std::size_t inner_iterations = 20000;
  double inner_step = 1.0;
  std::size_t restarts = 3;
};

struct SolverConfig {
  double eta = 0.0;

  // FCCO estimator.
  double tau = 0.5;
  std::optional<double> gamma;  // default_gamma(n, B1, tau) when unset

  // TCCO estimators: tau1/gamma1 for v_{i,j}, tau2/gamma2 for u_i.
  double tau1 = 0.5;
  double tau2 = 0.5;
  std::optional<double> gamma1;
  std::optional<double> gamma2;

  std::size_t B1 = 1;  // outer blocks per iteration
  std::size_t B2 = 1;  // FCCO: inner samples per block; TCCO: middle blocks
  std::size_t B3 = 1;  // TCCO: innermost samples per (i, j)
  std::size_t T = 0;
  std::uint64_t seed = 0;

  double projection_radius = kUnbounded;  // bound on ||v_{i,j}|| (TCCO)
  std::optional<double> epsilon_target;

  ReadOrder gradient_order = ReadOrder::PreUpdate;
  // TCCO only: which v snapshot the u update and the gradient read.
  ReadOrder tracked_read = ReadOrder::PreUpdate;
  // TCCO only: create v_{i,j} on first use instead of for all n1*n2 pairs.
  bool lazy_pair_init = false;

  std::size_t trace_every = 1;
  bool trace_exact_objective = true;
  bool trace_estimator_error = false;
  std::size_t moreau_every = 0;  // 0 disables the Moreau probe in the trace
  MoreauConfig moreau;

  // Abort once ||w_t|| > divergence_factor * max(||w_0||, 1).
  double divergence_factor = 1e6;

  std::optional<Vector> w0;
};

// (n - B1) / (B1 (1 - tau)) + (1 - tau).
double default_gamma(std::size_t n, std::size_t B1, double tau);

struct FccoSchedule {
  double tau;
  double eta;
};

struct TccoSchedule {
  double tau1;
  double tau2;
  double gamma1;
  double gamma2;
  double eta;
};

// Big-O step schedules with unit leading constants.
// SONX: tau = min(1/2, B2 eps^4), eta = B1 sqrt(B2) eps^4 / n.
FccoSchedule theorem_schedule_fcco(double epsilon, std::size_t n, std::size_t B1,
                                   std::size_t B2);
// SONT, including the pair-level and block-level gammas.
TccoSchedule theorem_schedule_tcco(double epsilon, std::size_t n1, std::size_t n2,
                                   std::size_t B1, std::size_t B2, std::size_t B3);
// Moving-average variant of SONX: tau = min(1, B2 eps^4), eta = B1 B2 eps^6 / n.
FccoSchedule theorem_schedule_fcco_ma(double epsilon, std::size_t n, std::size_t B1,
                                      std::size_t B2);
// Moving-average variant of SONT; gammas are zero.
TccoSchedule theorem_schedule_tcco_ma(double epsilon, std::size_t n1, std::size_t n2,
                                      std::size_t B1, std::size_t B2, std::size_t B3);

// Throws InvalidConfig on a violated invariant.
void validate_fcco(const SolverConfig& config, const FccoProblem& problem);
void validate_tcco(const SolverConfig& config, const TccoProblem& problem);

// gamma, falling back to default_gamma (0 when tau == 1).
double resolved_gamma(const SolverConfig& config, std::size_t n);
double resolved_gamma1(const SolverConfig& config, std::size_t n1, std::size_t n2);
double resolved_gamma2(const SolverConfig& config, std::size_t n1);

}  // namespace fcco
