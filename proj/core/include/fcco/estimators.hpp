#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fcco/types.hpp"

namespace fcco {

// Values aligned with a batch: values[k] belongs to batch[k].
using BatchValues = std::vector<Vector>;
// values[a][b] belongs to (batch1[a], batch2[b]).
using PairBatchValues = std::vector<std::vector<Vector>>;

// Per-block tracked estimates u_i (or v_{i,j} keyed by i * n2 + j).
//
// Entries start absent only under lazy initialization; every update call
// touches the batched entries and leaves all others bit-identical.
class BlockEstimatorState {
 public:
  BlockEstimatorState() = default;
  BlockEstimatorState(std::size_t num_blocks, std::size_t value_dim);

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t value_dim() const noexcept { return value_dim_; }
  // Number of update calls applied so far.
  std::size_t updates() const noexcept { return updates_; }

  bool has(BlockId id) const;
  bool fully_initialized() const;
  const Vector& at(BlockId id) const;
  void set(BlockId id, Vector value);

  // Index of the update call that last wrote this block, if any.
  std::optional<std::size_t> last_update(BlockId id) const;

  // Called once per update operation after the batched writes.
  void stamp(std::span<const BlockId> batch);

  bool operator==(const BlockEstimatorState& other) const;

 private:
  void check_id(BlockId id) const;

  std::vector<Vector> values_;
  std::vector<bool> present_;
  std::vector<std::optional<std::size_t>> last_update_;
  std::size_t value_dim_ = 0;
  std::size_t updates_ = 0;
};

// Euclidean projection onto {x : ||x|| <= radius}.
Vector project_ball(const Vector& x, double radius);

// MSVR: u_i <- (1 - tau) u_i + tau g_curr[i] + gamma (g_curr[i] - g_prev[i]) for
// i in batch. g_curr and g_prev must come from the same sample batch.
void msvr_update(BlockEstimatorState& state, std::span<const BlockId> batch,
                 const BatchValues& g_curr, const BatchValues& g_prev, double tau, double gamma);

// msvr_update followed by projection of each updated vector onto the ball.
void msvr_update_projected(BlockEstimatorState& state, std::span<const BlockId> batch,
                           const BatchValues& h_curr, const BatchValues& h_prev, double tau,
                           double gamma, double radius);

// Coordinate moving average: u_i <- (1 - tau) u_i + tau g_curr[i].
void ma_update(BlockEstimatorState& state, std::span<const BlockId> batch,
               const BatchValues& g_curr, double tau);

// Block-level TCCO update for i in batch1:
// u_i <- (1 - tau2) u_i + (1/B2) sum_j [tau2 g_i(v_{i,j,t}) + gamma2 (g_i(v_{i,j,t}) - g_i(v_{i,j,t-1}))].
// With gamma2 == 0, g_prev may be empty.
void tcco_u_update(BlockEstimatorState& state, std::span<const BlockId> batch1,
                   std::span<const BlockId> batch2, const PairBatchValues& g_curr,
                   const PairBatchValues& g_prev, double tau2, double gamma2);

// (1/n) sum_i ||state[i] - reference[i]||.
double estimator_error(const BlockEstimatorState& state, const std::vector<Vector>& reference);

}  // namespace fcco
