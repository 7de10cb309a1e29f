#pragma once

#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fcco/config.hpp"
#include "fcco/estimators.hpp"
#include "fcco/problem.hpp"
#include "fcco/trace.hpp"

namespace fcco {

struct FccoState {
  Vector w;
  Vector w_prev;
  BlockEstimatorState u;
  std::size_t iteration = 0;
  double reference_norm = 1.0;  // max(||w_0||, 1), base of the divergence guard
};

struct TccoState {
  Vector w;
  Vector w_prev;
  BlockEstimatorState u;
  BlockEstimatorState v;  // keyed i * n2 + j
  // v_{i,j,t-1} for the pairs the last step changed; every other pair has
  // v_{i,j,t-1} == v_{i,j,t}.
  std::unordered_map<std::size_t, Vector> v_changed;
  std::size_t iteration = 0;
  double reference_norm = 1.0;

  const Vector& v_before(std::size_t key) const;
};

struct FccoBatches {
  std::vector<BlockId> outer;
  std::vector<std::vector<std::size_t>> inner;  // aligned with outer
};

struct TccoBatches {
  std::vector<BlockId> outer;
  std::vector<BlockId> middle;
  std::vector<std::vector<std::vector<std::size_t>>> inner;  // [a][b] for (outer[a], middle[b])
};

// Batches for iteration t, drawn from streams keyed by (seed, t, purpose).
// A batch covering every block or sample is returned in index order.
FccoBatches draw_fcco_batches(const FccoProblem& problem, const SolverConfig& config,
                              std::size_t iteration);
TccoBatches draw_tcco_batches(const TccoProblem& problem, const SolverConfig& config,
                              std::size_t iteration);

FccoState sonx_init(const FccoProblem& problem, const SolverConfig& config);
TccoState sont_init(const TccoProblem& problem, const SolverConfig& config);

// (1/B1) sum_{i in batch1} dg_i(w; B_i) df_i(u_i).
Vector sonx_gradient(const FccoProblem& problem, const Vector& w, const BlockEstimatorState& u,
                     std::span<const BlockId> batch1,
                     const std::vector<std::vector<std::size_t>>& inner_batches);

// (1/B1) sum_i [(1/B2) sum_j dh_{i,j}(w; B_ij) dg_i(v_{i,j})] df_i(u_i), reading
// v at the given keys (aligned with batches.inner).
Vector sont_gradient(const TccoProblem& problem, const Vector& w, const BlockEstimatorState& u,
                     const std::vector<std::vector<Vector>>& v_read, const TccoBatches& batches);

// One iteration in place. Throws RunAborted on a non-finite gradient or iterate
// and on divergence.
void sonx_step(const FccoProblem& problem, FccoState& state, const SolverConfig& config);
void sonx_step_ma(const FccoProblem& problem, FccoState& state, const SolverConfig& config);
void sont_step(const TccoProblem& problem, TccoState& state, const SolverConfig& config);
void sont_step_ma(const TccoProblem& problem, TccoState& state, const SolverConfig& config);

using FccoCallback = std::function<void(const FccoState&, const TraceRow&)>;
using TccoCallback = std::function<void(const TccoState&, const TraceRow&)>;

template <class State>
struct RunResult {
  State state;
  RunTrace trace;
  std::optional<RunAborted> aborted;  // set when the run stopped early
};

using FccoRun = RunResult<FccoState>;
using TccoRun = RunResult<TccoState>;

FccoRun sonx_run(const FccoProblem& problem, const SolverConfig& config,
                 const FccoCallback& callback = {});
// Moving-average variant: gamma forced to 0 and g(w_{t-1}) never evaluated.
FccoRun sonx_run_ma(const FccoProblem& problem, const SolverConfig& config,
                    const FccoCallback& callback = {});
TccoRun sont_run(const TccoProblem& problem, const SolverConfig& config,
                 const TccoCallback& callback = {});
// Moving-average variant: gamma1 = gamma2 = 0 and no projection of v.
TccoRun sont_run_ma(const TccoProblem& problem, const SolverConfig& config,
                    const TccoCallback& callback = {});

}  // namespace fcco
