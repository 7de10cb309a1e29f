#include "fcco/config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fcco {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidConfig(what);
}

void require_epsilon(double epsilon) {
  require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be positive");
}

void validate_common(const SolverConfig& c) {
  require(std::isfinite(c.eta) && c.eta >= 0.0, "eta must be a finite non-negative number");
  require(c.B1 >= 1 && c.B2 >= 1 && c.B3 >= 1, "batch sizes must be positive");
  require(c.trace_every >= 1, "trace_every must be positive");
  require(c.divergence_factor > 1.0, "divergence_factor must exceed 1");
  if (c.epsilon_target) require(*c.epsilon_target > 0.0, "epsilon_target must be positive");
  if (c.moreau_every > 0) {
    require(c.moreau.rho_bar > c.moreau.rho_F, "moreau.rho_bar must exceed moreau.rho_F");
    require(c.moreau.inner_iterations >= 1 && c.moreau.restarts >= 1,
            "moreau inner_iterations and restarts must be positive");
  }
}

bool valid_tau(double tau) { return tau > 0.0 && tau <= 1.0; }

}  // namespace

double default_gamma(std::size_t n, std::size_t B1, double tau) {
  require(tau > 0.0 && tau < 1.0, "default gamma needs 0 < tau < 1");
  require(B1 >= 1 && B1 <= n, "default gamma needs 1 <= B1 <= n");
  const double nd = static_cast<double>(n);
  const double bd = static_cast<double>(B1);
  return (nd - bd) / (bd * (1.0 - tau)) + (1.0 - tau);
}

FccoSchedule theorem_schedule_fcco(double epsilon, std::size_t n, std::size_t B1,
                                   std::size_t B2) {
  require_epsilon(epsilon);
  require(n >= 1 && B1 >= 1 && B2 >= 1, "sizes must be positive");
  const double e4 = std::pow(epsilon, 4);
  return {std::min(0.5, static_cast<double>(B2) * e4),
          static_cast<double>(B1) * std::sqrt(static_cast<double>(B2)) * e4 /
              static_cast<double>(n)};
}

TccoSchedule theorem_schedule_tcco(double epsilon, std::size_t n1, std::size_t n2,
                                   std::size_t B1, std::size_t B2, std::size_t B3) {
  require_epsilon(epsilon);
  require(n1 >= 1 && n2 >= 1 && B1 >= 1 && B2 >= 1 && B3 >= 1, "sizes must be positive");
  require(B1 <= n1 && B2 <= n2, "batch sizes exceed the block counts");
  const double e4 = std::pow(epsilon, 4);
  const double ratio = static_cast<double>(B1) * static_cast<double>(n2) / static_cast<double>(n1);
  const double b3 = static_cast<double>(B3);
  TccoSchedule s{};
  s.tau1 = std::min(0.5, std::min(b3, std::sqrt(ratio)) * e4);
  s.tau2 = std::min(0.5, static_cast<double>(B2) * e4);
  const double factor = std::min({std::sqrt(b3), std::pow(ratio, 0.25), std::sqrt(ratio)});
  s.eta = factor * static_cast<double>(B1 * B2) / static_cast<double>(n1 * n2) * e4;
  s.gamma1 = default_gamma(n1 * n2, B1 * B2, s.tau1);
  s.gamma2 = default_gamma(n1, B1, s.tau2);
  return s;
}

FccoSchedule theorem_schedule_fcco_ma(double epsilon, std::size_t n, std::size_t B1,
                                      std::size_t B2) {
  require_epsilon(epsilon);
  require(n >= 1 && B1 >= 1 && B2 >= 1, "sizes must be positive");
  const double b2 = static_cast<double>(B2);
  return {std::min(1.0, b2 * std::pow(epsilon, 4)),
          static_cast<double>(B1) * b2 * std::pow(epsilon, 6) / static_cast<double>(n)};
}

TccoSchedule theorem_schedule_tcco_ma(double epsilon, std::size_t n1, std::size_t n2,
                                      std::size_t B1, std::size_t B2, std::size_t B3) {
  require_epsilon(epsilon);
  require(n1 >= 1 && n2 >= 1 && B1 >= 1 && B2 >= 1 && B3 >= 1, "sizes must be positive");
  const double b2 = static_cast<double>(B2);
  const double pair_term = std::sqrt(static_cast<double>(B1) * static_cast<double>(n2) /
                                     (static_cast<double>(n1) * b2)) *
                           b2 * std::pow(epsilon, 6);
  const double m = std::min(static_cast<double>(B3) * std::pow(epsilon, 4), pair_term);
  TccoSchedule s{};
  s.tau1 = std::min(1.0, m);
  s.tau2 = std::min(1.0, b2 * std::pow(epsilon, 4));
  s.gamma1 = 0.0;
  s.gamma2 = 0.0;
  s.eta = m * static_cast<double>(B1 * B2) / static_cast<double>(n1 * n2) * epsilon * epsilon;
  return s;
}

void validate_fcco(const SolverConfig& c, const FccoProblem& problem) {
  validate_common(c);
  require(valid_tau(c.tau), "tau must lie in (0, 1]");
  require(c.B1 <= problem.num_blocks(), "B1 exceeds the number of blocks");
  if (c.gamma) require(*c.gamma >= 0.0 && std::isfinite(*c.gamma), "gamma must be >= 0");
  if (c.w0) require(static_cast<std::size_t>(c.w0->size()) == problem.dim(), "w0 has wrong dimension");
}

void validate_tcco(const SolverConfig& c, const TccoProblem& problem) {
  validate_common(c);
  require(valid_tau(c.tau1) && valid_tau(c.tau2), "tau1 and tau2 must lie in (0, 1]");
  require(c.B1 <= problem.num_outer(), "B1 exceeds the number of outer blocks");
  require(c.B2 <= problem.num_middle(), "B2 exceeds the number of middle blocks");
  require(c.projection_radius > 0.0, "projection radius must be positive");
  if (c.gamma1) require(*c.gamma1 >= 0.0 && std::isfinite(*c.gamma1), "gamma1 must be >= 0");
  if (c.gamma2) require(*c.gamma2 >= 0.0 && std::isfinite(*c.gamma2), "gamma2 must be >= 0");
  if (c.w0) require(static_cast<std::size_t>(c.w0->size()) == problem.dim(), "w0 has wrong dimension");
}

// tau == 1 replaces the estimate outright; the default formula is undefined
// there and the correction is dropped.
double resolved_gamma(const SolverConfig& c, std::size_t n) {
  if (c.gamma) return *c.gamma;
  return c.tau >= 1.0 ? 0.0 : default_gamma(n, c.B1, c.tau);
}

double resolved_gamma1(const SolverConfig& c, std::size_t n1, std::size_t n2) {
  if (c.gamma1) return *c.gamma1;
  return c.tau1 >= 1.0 ? 0.0 : default_gamma(n1 * n2, c.B1 * c.B2, c.tau1);
}

double resolved_gamma2(const SolverConfig& c, std::size_t n1) {
  if (c.gamma2) return *c.gamma2;
  return c.tau2 >= 1.0 ? 0.0 : default_gamma(n1, c.B1, c.tau2);
}

}  // namespace fcco
