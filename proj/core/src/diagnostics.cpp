#include "fcco/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "fcco/estimators.hpp"

namespace fcco {

std::vector<Vector> exact_inner_values(const FccoProblem& problem, const Vector& w) {
  std::vector<Vector> out;
  out.reserve(problem.num_blocks());
  for (BlockId i = 0; i < problem.num_blocks(); ++i) {
    const std::vector<std::size_t> all = full_batch(problem.num_samples(i));
    out.push_back(problem.inner_value(i, w, all));
  }
  return out;
}

double full_fcco_objective(const FccoProblem& problem, const Vector& w) {
  const std::vector<Vector> g = exact_inner_values(problem, w);
  double total = 0.0;
  for (BlockId i = 0; i < g.size(); ++i) total += problem.outer_value(i, g[i]);
  return total / static_cast<double>(g.size());
}

Vector full_fcco_subgradient(const FccoProblem& problem, const Vector& w) {
  Vector G = Vector::Zero(w.size());
  for (BlockId i = 0; i < problem.num_blocks(); ++i) {
    const std::vector<std::size_t> all = full_batch(problem.num_samples(i));
    const Vector g = problem.inner_value(i, w, all);
    G.noalias() += problem.inner_subjacobian(i, w, all) * problem.outer_subgradient(i, g);
  }
  return G / static_cast<double>(problem.num_blocks());
}

Objective fcco_objective(const FccoProblem& problem) {
  return {[&problem](const Vector& w) { return full_fcco_objective(problem, w); },
          [&problem](const Vector& w) { return full_fcco_subgradient(problem, w); }};
}

std::vector<Vector> exact_innermost_values(const TccoProblem& problem, const Vector& w) {
  std::vector<Vector> out;
  out.reserve(problem.num_outer() * problem.num_middle());
  for (BlockId i = 0; i < problem.num_outer(); ++i) {
    for (BlockId j = 0; j < problem.num_middle(); ++j) {
      const std::vector<std::size_t> all = full_batch(problem.num_samples(i, j));
      out.push_back(problem.innermost_value(i, j, w, all));
    }
  }
  return out;
}

std::vector<Vector> exact_middle_means(const TccoProblem& problem, const Vector& w) {
  const std::size_t n2 = problem.num_middle();
  const std::vector<Vector> h = exact_innermost_values(problem, w);
  std::vector<Vector> out;
  out.reserve(problem.num_outer());
  for (BlockId i = 0; i < problem.num_outer(); ++i) {
    Vector mean = Vector::Zero(static_cast<Eigen::Index>(problem.middle_dim()));
    for (BlockId j = 0; j < n2; ++j) mean += problem.middle_value(i, h[i * n2 + j]);
    out.push_back(mean / static_cast<double>(n2));
  }
  return out;
}

double full_tcco_objective(const TccoProblem& problem, const Vector& w) {
  const std::vector<Vector> means = exact_middle_means(problem, w);
  double total = 0.0;
  for (BlockId i = 0; i < means.size(); ++i) total += problem.outer_value(i, means[i]);
  return total / static_cast<double>(means.size());
}

Vector full_tcco_subgradient(const TccoProblem& problem, const Vector& w) {
  const std::size_t n2 = problem.num_middle();
  const std::vector<Vector> h = exact_innermost_values(problem, w);
  Vector G = Vector::Zero(w.size());
  for (BlockId i = 0; i < problem.num_outer(); ++i) {
    Matrix M = Matrix::Zero(w.size(), static_cast<Eigen::Index>(problem.middle_dim()));
    Vector mean = Vector::Zero(static_cast<Eigen::Index>(problem.middle_dim()));
    for (BlockId j = 0; j < n2; ++j) {
      const std::vector<std::size_t> all = full_batch(problem.num_samples(i, j));
      const Vector& v = h[i * n2 + j];
      M.noalias() += problem.innermost_jacobian(i, j, w, all) * problem.middle_subjacobian(i, v);
      mean += problem.middle_value(i, v);
    }
    M /= static_cast<double>(n2);
    mean /= static_cast<double>(n2);
    G.noalias() += M * problem.outer_subgradient(i, mean);
  }
  return G / static_cast<double>(problem.num_outer());
}

Objective tcco_objective(const TccoProblem& problem) {
  return {[&problem](const Vector& w) { return full_tcco_objective(problem, w); },
          [&problem](const Vector& w) { return full_tcco_subgradient(problem, w); }};
}

ProxResult prox_point(const Objective& objective, const Vector& x, const MoreauConfig& cfg) {
  const double mu = cfg.rho_bar - cfg.rho_F;
  if (!(mu > 0.0)) throw InvalidConfig("prox_point needs rho_bar > rho_F");
  if (cfg.inner_iterations == 0 || cfg.restarts == 0) {
    throw InvalidConfig("prox_point needs positive iteration and restart counts");
  }
  const auto subproblem = [&](const Vector& y) {
    const double v = objective.value(y);
    if (!std::isfinite(v)) throw Error("prox_point: non-finite objective value");
    return v + 0.5 * cfg.rho_bar * (y - x).squaredNorm();
  };

  Vector best = x;
  double best_value = subproblem(x);
  double G_max = 0.0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Vector y = best;
    Vector avg = y;
    double weight_sum = 0.0;
    for (std::size_t k = 1; k <= cfg.inner_iterations; ++k) {
      const Vector g = objective.subgradient(y) + cfg.rho_bar * (y - x);
      if (!all_finite(g)) throw Error("prox_point: non-finite subgradient");
      G_max = std::max(G_max, g.norm());
      // Weighted average with weights k of the iterates y_1..y_K.
      weight_sum += static_cast<double>(k);
      avg += (static_cast<double>(k) / weight_sum) * (y - avg);
      y -= (2.0 * cfg.inner_step / (mu * static_cast<double>(k + 1))) * g;
    }
    for (const Vector* candidate : {&avg, &y}) {
      const double value = subproblem(*candidate);
      if (value < best_value) {
        best_value = value;
        best = *candidate;
      }
    }
  }

  ProxResult result;
  result.point = best;
  result.objective_value = objective.value(best);
  result.subproblem_value = best_value;
  result.gap_bound = 2.0 * G_max * G_max / (mu * static_cast<double>(cfg.inner_iterations + 1));
  return result;
}

MoreauReport moreau_grad_norm(const Objective& objective, const Vector& x,
                              const MoreauConfig& cfg) {
  const ProxResult prox = prox_point(objective, x, cfg);
  MoreauReport report;
  report.grad_norm = cfg.rho_bar * (x - prox.point).norm();
  report.envelope_value = prox.subproblem_value;
  report.value_at_x = objective.value(x);
  report.value_at_prox = prox.objective_value;
  report.gap_bound = prox.gap_bound;
  report.descent_ok = report.value_at_prox <= report.value_at_x + report.gap_bound;
  report.prox = prox.point;
  return report;
}

ProbeReport weak_convexity_probe(const std::function<double(const Vector&)>& objective,
                                 double rho, std::size_t trials, CounterRng& rng,
                                 const Vector& center, double radius, double tolerance) {
  if (rho < 0.0) throw InvalidConfig("weak_convexity_probe needs rho >= 0");
  const auto h = [&](const Vector& z) { return objective(z) + 0.5 * rho * z.squaredNorm(); };
  const auto draw_point = [&] {
    Vector z(center.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      z[k] = center[k] + radius * (2.0 * rng.uniform() - 1.0);
    }
    return z;
  };
  ProbeReport report;
  report.trials = trials;
  report.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    const Vector x = draw_point();
    const Vector y = draw_point();
    const double excess = h(0.5 * (x + y)) - 0.5 * (h(x) + h(y));
    report.worst_excess = std::max(report.worst_excess, excess);
    if (excess > tolerance) ++report.violations;
  }
  return report;
}

FiniteDifferenceReport finite_difference_check(
    const std::function<double(const Vector&)>& value_fn,
    const std::function<Vector(const Vector&)>& grad_fn, const Vector& x, double step) {
  if (!(step > 0.0)) throw InvalidConfig("finite difference step must be positive");
  const Vector g = grad_fn(x);
  if (g.size() != x.size()) throw ContractViolation("gradient has wrong dimension");
  const double f0 = value_fn(x);
  FiniteDifferenceReport report;
  Vector probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + step;
    const double fp = value_fn(probe);
    probe[k] = x[k] - step;
    const double fm = value_fn(probe);
    probe[k] = x[k];

    const double central = (fp - fm) / (2.0 * step);
    const double err = std::abs(central - g[k]) / std::max(1.0, std::abs(g[k]));
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_coordinate = static_cast<std::size_t>(k);
    }
    const double forward = (fp - f0) / step;
    const double backward = (f0 - fm) / step;
    const double scale = std::max({1.0, std::abs(forward), std::abs(backward)});
    if (std::abs(forward - backward) > 1e-3 * scale) {
      report.kinked.push_back(static_cast<std::size_t>(k));
    }
  }
  return report;
}

std::vector<double> track_estimator(const FccoProblem& problem,
                                    const std::function<Vector(std::size_t)>& path,
                                    const TrackingConfig& config) {
  const std::size_t n = problem.num_blocks();
  const auto draw = [&](std::uint64_t iteration, Purpose purpose, std::uint64_t sub,
                        std::size_t population, std::size_t batch) {
    if (batch >= population) return full_batch(population);
    CounterRng rng = stream(config.seed, iteration, purpose, sub);
    return sample_blocks(rng, population, batch);
  };

  Vector w = path(0);
  Vector w_prev = w;
  BlockEstimatorState u(n, problem.inner_dim());
  for (BlockId i = 0; i < n; ++i) {
    u.set(i, problem.inner_value(
                 i, w, draw(kInitIteration, Purpose::InnerBatch, i, problem.num_samples(i),
                            config.B2)));
  }
  std::vector<double> errors;
  errors.reserve(config.T);
  for (std::size_t t = 0; t < config.T; ++t) {
    const std::vector<BlockId> outer = draw(t, Purpose::OuterBatch, 0, n, config.B1);
    BatchValues g_curr;
    BatchValues g_prev;
    for (BlockId i : outer) {
      const std::vector<std::size_t> batch =
          draw(t, Purpose::InnerBatch, i, problem.num_samples(i), config.B2);
      g_curr.push_back(problem.inner_value(i, w, batch));
      if (!config.moving_average) g_prev.push_back(problem.inner_value(i, w_prev, batch));
    }
    if (config.moving_average) {
      ma_update(u, outer, g_curr, config.tau);
    } else {
      msvr_update(u, outer, g_curr, g_prev, config.tau, config.gamma);
    }
    w_prev = w;
    w = path(t + 1);
    errors.push_back(estimator_error(u, exact_inner_values(problem, w)));
  }
  return errors;
}

}  // namespace fcco
