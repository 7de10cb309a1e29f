#include "fcco/estimators.hpp"

#include <string>

namespace fcco {

namespace {

void check_batch_values(const BlockEstimatorState& state, std::span<const BlockId> batch,
                        const BatchValues& values, const char* name) {
  if (values.size() != batch.size()) {
    throw ContractViolation(std::string(name) + ": expected " + std::to_string(batch.size()) +
                            " values, got " + std::to_string(values.size()));
  }
  for (const Vector& v : values) {
    if (static_cast<std::size_t>(v.size()) != state.value_dim()) {
      throw ContractViolation(std::string(name) + ": value dimension mismatch");
    }
  }
}

// (1 - tau) u + tau g, the literal moving-average blend.
Vector blend(const Vector& u, const Vector& g, double tau) { return (1.0 - tau) * u + tau * g; }

}  // namespace

BlockEstimatorState::BlockEstimatorState(std::size_t num_blocks, std::size_t value_dim)
    : values_(num_blocks), present_(num_blocks, false), last_update_(num_blocks),
      value_dim_(value_dim) {}

void BlockEstimatorState::check_id(BlockId id) const {
  if (id >= values_.size()) {
    throw ContractViolation("block id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(values_.size()) + ")");
  }
}

bool BlockEstimatorState::has(BlockId id) const {
  check_id(id);
  return present_[id];
}

bool BlockEstimatorState::fully_initialized() const {
  for (bool p : present_) {
    if (!p) return false;
  }
  return true;
}

const Vector& BlockEstimatorState::at(BlockId id) const {
  check_id(id);
  if (!present_[id]) throw ContractViolation("block " + std::to_string(id) + " has no estimate");
  return values_[id];
}

void BlockEstimatorState::set(BlockId id, Vector value) {
  check_id(id);
  if (static_cast<std::size_t>(value.size()) != value_dim_) {
    throw ContractViolation("estimate dimension mismatch for block " + std::to_string(id));
  }
  values_[id] = std::move(value);
  present_[id] = true;
}

std::optional<std::size_t> BlockEstimatorState::last_update(BlockId id) const {
  check_id(id);
  return last_update_[id];
}

void BlockEstimatorState::stamp(std::span<const BlockId> batch) {
  for (BlockId id : batch) last_update_[id] = updates_;
  ++updates_;
}

bool BlockEstimatorState::operator==(const BlockEstimatorState& other) const {
  if (value_dim_ != other.value_dim_ || present_ != other.present_) return false;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (present_[k] && values_[k] != other.values_[k]) return false;
  }
  return true;
}

Vector project_ball(const Vector& x, double radius) {
  if (!(radius > 0.0)) throw InvalidConfig("projection radius must be positive");
  const double norm = x.norm();
  if (norm <= radius) return x;
  return x * (radius / norm);
}

void msvr_update(BlockEstimatorState& state, std::span<const BlockId> batch,
                 const BatchValues& g_curr, const BatchValues& g_prev, double tau, double gamma) {
  check_batch_values(state, batch, g_curr, "msvr_update g_curr");
  check_batch_values(state, batch, g_prev, "msvr_update g_prev");
  for (std::size_t k = 0; k < batch.size(); ++k) {
    Vector next = blend(state.at(batch[k]), g_curr[k], tau);
    if (gamma != 0.0) next += gamma * (g_curr[k] - g_prev[k]);
    state.set(batch[k], std::move(next));
  }
  state.stamp(batch);
}

void msvr_update_projected(BlockEstimatorState& state, std::span<const BlockId> batch,
                           const BatchValues& h_curr, const BatchValues& h_prev, double tau,
                           double gamma, double radius) {
  if (!(radius > 0.0)) throw InvalidConfig("projection radius must be positive");
  msvr_update(state, batch, h_curr, h_prev, tau, gamma);
  for (BlockId id : batch) state.set(id, project_ball(state.at(id), radius));
}

void ma_update(BlockEstimatorState& state, std::span<const BlockId> batch,
               const BatchValues& g_curr, double tau) {
  check_batch_values(state, batch, g_curr, "ma_update g_curr");
  for (std::size_t k = 0; k < batch.size(); ++k) {
    state.set(batch[k], blend(state.at(batch[k]), g_curr[k], tau));
  }
  state.stamp(batch);
}

void tcco_u_update(BlockEstimatorState& state, std::span<const BlockId> batch1,
                   std::span<const BlockId> batch2, const PairBatchValues& g_curr,
                   const PairBatchValues& g_prev, double tau2, double gamma2) {
  const bool corrected = gamma2 != 0.0;
  if (g_curr.size() != batch1.size() || (corrected && g_prev.size() != batch1.size())) {
    throw ContractViolation("tcco_u_update: values not aligned with batch1");
  }
  if (batch2.empty()) throw ContractViolation("tcco_u_update: empty middle batch");
  const double inv_b2 = 1.0 / static_cast<double>(batch2.size());
  for (std::size_t a = 0; a < batch1.size(); ++a) {
    check_batch_values(state, batch2, g_curr[a], "tcco_u_update g_curr");
    Vector mean_curr = Vector::Zero(static_cast<Eigen::Index>(state.value_dim()));
    for (const Vector& g : g_curr[a]) mean_curr += g;
    mean_curr *= inv_b2;
    Vector next = blend(state.at(batch1[a]), mean_curr, tau2);
    if (corrected) {
      check_batch_values(state, batch2, g_prev[a], "tcco_u_update g_prev");
      Vector mean_prev = Vector::Zero(static_cast<Eigen::Index>(state.value_dim()));
      for (const Vector& g : g_prev[a]) mean_prev += g;
      mean_prev *= inv_b2;
      next += gamma2 * (mean_curr - mean_prev);
    }
    state.set(batch1[a], std::move(next));
  }
  state.stamp(batch1);
}

double estimator_error(const BlockEstimatorState& state, const std::vector<Vector>& reference) {
  if (reference.size() != state.size()) {
    throw ContractViolation("estimator_error: reference has " + std::to_string(reference.size()) +
                            " blocks, state has " + std::to_string(state.size()));
  }
  if (reference.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (static_cast<std::size_t>(reference[i].size()) != state.value_dim()) {
      throw ContractViolation("estimator_error: reference dimension mismatch");
    }
    total += (state.at(i) - reference[i]).norm();
  }
  return total / static_cast<double>(reference.size());
}

}  // namespace fcco
