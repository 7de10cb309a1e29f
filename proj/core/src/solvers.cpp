#include "fcco/solvers.hpp"

#include <algorithm>
#include <chrono>

#include "fcco/diagnostics.hpp"
#include "fcco/rng.hpp"

namespace fcco {

namespace {

enum class Variant { Msvr, MovingAverage };

std::vector<std::size_t> draw(std::uint64_t seed, std::uint64_t iteration, Purpose purpose,
                              std::uint64_t sub, std::size_t population, std::size_t batch) {
  if (batch >= population) return full_batch(population);
  CounterRng rng = stream(seed, iteration, purpose, sub);
  return sample_blocks(rng, population, batch);
}

Vector starting_point(const SolverConfig& config, const Vector& fallback) {
  return config.w0 ? *config.w0 : fallback;
}

void check_gradient(const Vector& G, std::size_t iteration) {
  if (!all_finite(G)) {
    throw RunAborted(RunAborted::Reason::NonFinite, iteration, "non-finite gradient");
  }
}

// w_{t+1} = w_t - eta G_t with the divergence guard.
template <class State>
void apply_step(State& state, const Vector& G, const SolverConfig& config) {
  check_gradient(G, state.iteration);
  Vector next = state.w - config.eta * G;
  if (!all_finite(next)) {
    throw RunAborted(RunAborted::Reason::NonFinite, state.iteration, "non-finite iterate");
  }
  state.w_prev = std::move(state.w);
  state.w = std::move(next);
  ++state.iteration;
  if (state.w.norm() > config.divergence_factor * state.reference_norm) {
    throw RunAborted(RunAborted::Reason::Diverged, state.iteration,
                     "iterate norm exceeded the divergence guard");
  }
}

double reference_norm(const Vector& w0) { return std::max(w0.norm(), 1.0); }

void fcco_step(const FccoProblem& problem, FccoState& state, const SolverConfig& config,
               Variant variant) {
  const FccoBatches batches = draw_fcco_batches(problem, config, state.iteration);
  const std::size_t B = batches.outer.size();
  BatchValues g_curr(B);
  BatchValues g_prev;
  if (variant == Variant::Msvr) g_prev.resize(B);
  for (std::size_t a = 0; a < B; ++a) {
    const BlockId i = batches.outer[a];
    g_curr[a] = problem.inner_value(i, state.w, batches.inner[a]);
    if (variant == Variant::Msvr) g_prev[a] = problem.inner_value(i, state.w_prev, batches.inner[a]);
  }

  Vector G;
  if (config.gradient_order == ReadOrder::PreUpdate) {
    G = sonx_gradient(problem, state.w, state.u, batches.outer, batches.inner);
  }
  if (variant == Variant::Msvr) {
    msvr_update(state.u, batches.outer, g_curr, g_prev, config.tau,
                resolved_gamma(config, problem.num_blocks()));
  } else {
    ma_update(state.u, batches.outer, g_curr, config.tau);
  }
  if (config.gradient_order == ReadOrder::PostUpdate) {
    G = sonx_gradient(problem, state.w, state.u, batches.outer, batches.inner);
  }
  apply_step(state, G, config);
}

// v_{i,j,0} = h_{i,j}(w_0; B3), projected like every later update (radius
// is unbounded for the moving-average variant).
Vector innermost_init(const TccoProblem& problem, const SolverConfig& config, BlockId i,
                      BlockId j, const Vector& w, double radius) {
  const std::size_t key = i * problem.num_middle() + j;
  const std::vector<std::size_t> batch =
      draw(config.seed, kInitIteration, Purpose::InnerBatch, key, problem.num_samples(i, j),
           config.B3);
  return project_ball(problem.innermost_value(i, j, w, batch), radius);
}

void tcco_step(const TccoProblem& problem, TccoState& state, const SolverConfig& config,
               Variant variant) {
  const TccoBatches batches = draw_tcco_batches(problem, config, state.iteration);
  const std::size_t n2 = problem.num_middle();
  const std::size_t B1 = batches.outer.size();
  const std::size_t B2 = batches.middle.size();
  const bool msvr = variant == Variant::Msvr;
  const double gamma1 = msvr ? resolved_gamma1(config, problem.num_outer(), n2) : 0.0;
  const double gamma2 = msvr ? resolved_gamma2(config, problem.num_outer()) : 0.0;

  std::vector<std::size_t> keys;
  keys.reserve(B1 * B2);
  BatchValues h_curr;
  BatchValues h_prev;
  for (std::size_t a = 0; a < B1; ++a) {
    for (std::size_t b = 0; b < B2; ++b) {
      const BlockId i = batches.outer[a];
      const BlockId j = batches.middle[b];
      const std::size_t key = i * n2 + j;
      if (!state.v.has(key)) {
        state.v.set(key, innermost_init(problem, config, i, j, state.w,
                                        msvr ? config.projection_radius : kUnbounded));
      }
      keys.push_back(key);
      h_curr.push_back(problem.innermost_value(i, j, state.w, batches.inner[a][b]));
      if (msvr) h_prev.push_back(problem.innermost_value(i, j, state.w_prev, batches.inner[a][b]));
    }
  }

  // Snapshots before the v update: v_{t} and v_{t-1}.
  std::unordered_map<std::size_t, Vector> changed;
  std::vector<Vector> v_t(keys.size());
  std::vector<Vector> v_tm1(keys.size());
  for (std::size_t k = 0; k < keys.size(); ++k) {
    v_t[k] = state.v.at(keys[k]);
    v_tm1[k] = state.v_before(keys[k]);
    changed.emplace(keys[k], v_t[k]);
  }

  if (msvr) {
    msvr_update_projected(state.v, keys, h_curr, h_prev, config.tau1, gamma1,
                          config.projection_radius);
  } else {
    ma_update(state.v, keys, h_curr, config.tau1);
  }

  // Values read by the u update and the gradient.
  std::vector<std::vector<Vector>> v_read(B1, std::vector<Vector>(B2));
  std::vector<std::vector<Vector>> v_read_prev(B1, std::vector<Vector>(B2));
  for (std::size_t a = 0; a < B1; ++a) {
    for (std::size_t b = 0; b < B2; ++b) {
      const std::size_t k = a * B2 + b;
      if (config.tracked_read == ReadOrder::PreUpdate) {
        v_read[a][b] = v_t[k];
        v_read_prev[a][b] = v_tm1[k];
      } else {
        v_read[a][b] = state.v.at(keys[k]);
        v_read_prev[a][b] = v_t[k];
      }
    }
  }

  PairBatchValues g_curr(B1, BatchValues(B2));
  PairBatchValues g_prev;
  if (gamma2 != 0.0) g_prev.assign(B1, BatchValues(B2));
  for (std::size_t a = 0; a < B1; ++a) {
    for (std::size_t b = 0; b < B2; ++b) {
      g_curr[a][b] = problem.middle_value(batches.outer[a], v_read[a][b]);
      if (gamma2 != 0.0) g_prev[a][b] = problem.middle_value(batches.outer[a], v_read_prev[a][b]);
    }
  }

  Vector G;
  if (config.gradient_order == ReadOrder::PreUpdate) {
    G = sont_gradient(problem, state.w, state.u, v_read, batches);
  }
  tcco_u_update(state.u, batches.outer, batches.middle, g_curr, g_prev, config.tau2, gamma2);
  if (config.gradient_order == ReadOrder::PostUpdate) {
    G = sont_gradient(problem, state.w, state.u, v_read, batches);
  }
  state.v_changed = std::move(changed);
  apply_step(state, G, config);
}

TraceRow fcco_row(const FccoProblem& problem, const FccoState& state, const SolverConfig& config,
                  RunTrace& trace, std::size_t& probes) {
  TraceRow row;
  row.iter = state.iteration;
  row.step_norm = (state.w - state.w_prev).norm();
  if (config.trace_exact_objective) {
    row.objective = full_fcco_objective(problem, state.w);
  } else {
    double total = 0.0;
    for (BlockId i = 0; i < problem.num_blocks(); ++i) total += problem.outer_value(i, state.u.at(i));
    row.objective = total / static_cast<double>(problem.num_blocks());
  }
  if (config.trace_estimator_error) {
    row.est_error = estimator_error(state.u, exact_inner_values(problem, state.w));
  }
  if (config.moreau_every > 0 && state.iteration % config.moreau_every == 0) {
    const double g = moreau_grad_norm(fcco_objective(problem), state.w, config.moreau).grad_norm;
    row.moreau_grad = g;
    ++probes;
    const double prev = trace.moreau_sq_mean.value_or(0.0);
    trace.moreau_sq_mean = prev + (g * g - prev) / static_cast<double>(probes);
  }
  return row;
}

TraceRow tcco_row(const TccoProblem& problem, const TccoState& state, const SolverConfig& config,
                  RunTrace& trace, std::size_t& probes) {
  TraceRow row;
  row.iter = state.iteration;
  row.step_norm = (state.w - state.w_prev).norm();
  if (config.trace_exact_objective) {
    row.objective = full_tcco_objective(problem, state.w);
  } else {
    double total = 0.0;
    for (BlockId i = 0; i < problem.num_outer(); ++i) total += problem.outer_value(i, state.u.at(i));
    row.objective = total / static_cast<double>(problem.num_outer());
  }
  if (config.trace_estimator_error) {
    row.est_error = estimator_error(state.u, exact_middle_means(problem, state.w));
  }
  if (config.moreau_every > 0 && state.iteration % config.moreau_every == 0) {
    const double g = moreau_grad_norm(tcco_objective(problem), state.w, config.moreau).grad_norm;
    row.moreau_grad = g;
    ++probes;
    const double prev = trace.moreau_sq_mean.value_or(0.0);
    trace.moreau_sq_mean = prev + (g * g - prev) / static_cast<double>(probes);
  }
  return row;
}

template <class Problem, class State, class Init, class Step, class Row, class Callback>
RunResult<State> run_loop(const Problem& problem, const SolverConfig& config, Init init,
                          Step step, Row make_row, const Callback& callback) {
  const auto start = std::chrono::steady_clock::now();
  RunResult<State> result{init(problem, config), RunTrace{}, std::nullopt};
  result.trace.trace_every = config.trace_every;
  result.trace.config = config;
  std::size_t probes = 0;
  for (std::size_t t = 0; t < config.T; ++t) {
    try {
      step(problem, result.state, config);
    } catch (const RunAborted& e) {
      result.aborted = e;
      break;
    }
    if (result.state.iteration % config.trace_every != 0) continue;
    TraceRow row = make_row(problem, result.state, config, result.trace, probes);
    if (callback) callback(result.state, row);
    result.trace.rows.push_back(std::move(row));
  }
  result.trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace

const Vector& TccoState::v_before(std::size_t key) const {
  const auto it = v_changed.find(key);
  return it != v_changed.end() ? it->second : v.at(key);
}

FccoBatches draw_fcco_batches(const FccoProblem& problem, const SolverConfig& config,
                              std::size_t iteration) {
  FccoBatches batches;
  batches.outer = draw(config.seed, iteration, Purpose::OuterBatch, 0, problem.num_blocks(),
                       config.B1);
  batches.inner.reserve(batches.outer.size());
  for (BlockId i : batches.outer) {
    batches.inner.push_back(draw(config.seed, iteration, Purpose::InnerBatch, i,
                                 problem.num_samples(i), config.B2));
  }
  return batches;
}

TccoBatches draw_tcco_batches(const TccoProblem& problem, const SolverConfig& config,
                              std::size_t iteration) {
  TccoBatches batches;
  const std::size_t n2 = problem.num_middle();
  batches.outer = draw(config.seed, iteration, Purpose::OuterBatch, 0, problem.num_outer(),
                       config.B1);
  batches.middle = draw(config.seed, iteration, Purpose::MiddleBatch, 0, n2, config.B2);
  batches.inner.resize(batches.outer.size());
  for (std::size_t a = 0; a < batches.outer.size(); ++a) {
    for (BlockId j : batches.middle) {
      const BlockId i = batches.outer[a];
      batches.inner[a].push_back(draw(config.seed, iteration, Purpose::InnerBatch, i * n2 + j,
                                      problem.num_samples(i, j), config.B3));
    }
  }
  return batches;
}

FccoState sonx_init(const FccoProblem& problem, const SolverConfig& config) {
  validate_fcco(config, problem);
  FccoState state;
  state.w = starting_point(config, problem.initial_point());
  state.w_prev = state.w;
  state.reference_norm = reference_norm(state.w);
  state.u = BlockEstimatorState(problem.num_blocks(), problem.inner_dim());
  for (BlockId i = 0; i < problem.num_blocks(); ++i) {
    const std::vector<std::size_t> batch = draw(config.seed, kInitIteration, Purpose::InnerBatch,
                                                i, problem.num_samples(i), config.B2);
    state.u.set(i, problem.inner_value(i, state.w, batch));
  }
  return state;
}

namespace {

TccoState tcco_init(const TccoProblem& problem, const SolverConfig& config, double radius) {
  validate_tcco(config, problem);
  const std::size_t n1 = problem.num_outer();
  const std::size_t n2 = problem.num_middle();
  TccoState state;
  state.w = starting_point(config, problem.initial_point());
  state.w_prev = state.w;
  state.reference_norm = reference_norm(state.w);
  state.v = BlockEstimatorState(n1 * n2, problem.inner_dim());
  state.u = BlockEstimatorState(n1, problem.middle_dim());
  for (BlockId i = 0; i < n1; ++i) {
    Vector mean = Vector::Zero(static_cast<Eigen::Index>(problem.middle_dim()));
    if (config.lazy_pair_init) {
      const std::vector<BlockId> js =
          draw(config.seed, kInitIteration, Purpose::MiddleBatch, i, n2, config.B2);
      for (BlockId j : js) {
        mean += problem.middle_value(i, innermost_init(problem, config, i, j, state.w, radius));
      }
      mean /= static_cast<double>(js.size());
    } else {
      for (BlockId j = 0; j < n2; ++j) {
        Vector v = innermost_init(problem, config, i, j, state.w, radius);
        mean += problem.middle_value(i, v);
        state.v.set(i * n2 + j, std::move(v));
      }
      mean /= static_cast<double>(n2);
    }
    state.u.set(i, std::move(mean));
  }
  return state;
}

TccoState sont_init_ma(const TccoProblem& problem, const SolverConfig& config) {
  return tcco_init(problem, config, kUnbounded);
}

}  // namespace

TccoState sont_init(const TccoProblem& problem, const SolverConfig& config) {
  return tcco_init(problem, config, config.projection_radius);
}

Vector sonx_gradient(const FccoProblem& problem, const Vector& w, const BlockEstimatorState& u,
                     std::span<const BlockId> batch1,
                     const std::vector<std::vector<std::size_t>>& inner_batches) {
  if (inner_batches.size() != batch1.size()) {
    throw ContractViolation("sonx_gradient: inner batches not aligned with the outer batch");
  }
  if (static_cast<std::size_t>(w.size()) != problem.dim()) {
    throw ContractViolation("sonx_gradient: w has wrong dimension");
  }
  Vector G = Vector::Zero(w.size());
  for (std::size_t a = 0; a < batch1.size(); ++a) {
    const Matrix J = problem.inner_subjacobian(batch1[a], w, inner_batches[a]);
    const Vector df = problem.outer_subgradient(batch1[a], u.at(batch1[a]));
    if (J.rows() != w.size() || J.cols() != df.size()) {
      throw ContractViolation("sonx_gradient: subjacobian shape mismatch");
    }
    G.noalias() += J * df;
  }
  if (!batch1.empty()) G /= static_cast<double>(batch1.size());
  return G;
}

Vector sont_gradient(const TccoProblem& problem, const Vector& w, const BlockEstimatorState& u,
                     const std::vector<std::vector<Vector>>& v_read, const TccoBatches& batches) {
  if (static_cast<std::size_t>(w.size()) != problem.dim()) {
    throw ContractViolation("sont_gradient: w has wrong dimension");
  }
  if (v_read.size() != batches.outer.size() || batches.inner.size() != batches.outer.size()) {
    throw ContractViolation("sont_gradient: values not aligned with the outer batch");
  }
  const std::size_t B2 = batches.middle.size();
  Vector G = Vector::Zero(w.size());
  for (std::size_t a = 0; a < batches.outer.size(); ++a) {
    const BlockId i = batches.outer[a];
    if (v_read[a].size() != B2 || batches.inner[a].size() != B2) {
      throw ContractViolation("sont_gradient: values not aligned with the middle batch");
    }
    Matrix M = Matrix::Zero(w.size(), static_cast<Eigen::Index>(problem.middle_dim()));
    for (std::size_t b = 0; b < B2; ++b) {
      const BlockId j = batches.middle[b];
      const Matrix Jh = problem.innermost_jacobian(i, j, w, batches.inner[a][b]);
      const Matrix Jg = problem.middle_subjacobian(i, v_read[a][b]);
      if (Jh.rows() != w.size() || Jh.cols() != Jg.rows() || Jg.cols() != M.cols()) {
        throw ContractViolation("sont_gradient: jacobian shape mismatch");
      }
      M.noalias() += Jh * Jg;
    }
    M /= static_cast<double>(B2);
    G.noalias() += M * problem.outer_subgradient(i, u.at(i));
  }
  if (!batches.outer.empty()) G /= static_cast<double>(batches.outer.size());
  return G;
}

void sonx_step(const FccoProblem& problem, FccoState& state, const SolverConfig& config) {
  fcco_step(problem, state, config, Variant::Msvr);
}

void sonx_step_ma(const FccoProblem& problem, FccoState& state, const SolverConfig& config) {
  fcco_step(problem, state, config, Variant::MovingAverage);
}

void sont_step(const TccoProblem& problem, TccoState& state, const SolverConfig& config) {
  tcco_step(problem, state, config, Variant::Msvr);
}

void sont_step_ma(const TccoProblem& problem, TccoState& state, const SolverConfig& config) {
  tcco_step(problem, state, config, Variant::MovingAverage);
}

FccoRun sonx_run(const FccoProblem& problem, const SolverConfig& config,
                 const FccoCallback& callback) {
  return run_loop<FccoProblem, FccoState>(problem, config, sonx_init, sonx_step, fcco_row,
                                          callback);
}

FccoRun sonx_run_ma(const FccoProblem& problem, const SolverConfig& config,
                    const FccoCallback& callback) {
  return run_loop<FccoProblem, FccoState>(problem, config, sonx_init, sonx_step_ma, fcco_row,
                                          callback);
}

TccoRun sont_run(const TccoProblem& problem, const SolverConfig& config,
                 const TccoCallback& callback) {
  return run_loop<TccoProblem, TccoState>(problem, config, sont_init, sont_step, tcco_row,
                                          callback);
}

TccoRun sont_run_ma(const TccoProblem& problem, const SolverConfig& config,
                    const TccoCallback& callback) {
  return run_loop<TccoProblem, TccoState>(problem, config, sont_init_ma, sont_step_ma, tcco_row,
                                          callback);
}

}  // namespace fcco
