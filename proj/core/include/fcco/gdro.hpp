#pragma once

#include <vector>

#include "fcco/problem.hpp"

namespace fcco {

enum class LossKind { Hinge, SquaredHinge, Logistic };

// Loss of a linear model on margin m = y x^T w with y in {-1, +1}.
double margin_loss(LossKind kind, double m);
double margin_loss_derivative(LossKind kind, double m);

struct GroupedDataset {
  std::vector<Matrix> features;  // one matrix per group, rows are examples
  std::vector<Vector> labels;    // {0, 1} per example
  LossKind loss = LossKind::Hinge;

  std::size_t num_groups() const noexcept { return features.size(); }
  std::size_t dim() const;
  // Throws DataError on empty groups, bad labels or mixed dimensions.
  void validate() const;
};

// Average loss of group k over the given rows, and its gradient in w.
double group_loss(const GroupedDataset& data, std::size_t k, const Vector& w, SampleBatch rows);
Vector group_loss_grad(const GroupedDataset& data, std::size_t k, const Vector& w,
                       SampleBatch rows);
std::vector<double> group_losses(const GroupedDataset& data, const Vector& w);

// (1/K) sum_k [L_k(w) - s]_+ + s.
double cvar_group_objective(const Vector& w, double s, const GroupedDataset& data, std::size_t K);
// Subgradient packed as [d_w, d_s].
Vector cvar_group_subgradient(const Vector& w, double s, const GroupedDataset& data,
                              std::size_t K);

// FCCO form over z = (w, s): g_k(z) = (L_k(w) - s, s) and
// f_k(u) = (N/K) [u_1]_+ + u_2, so (1/N) sum_k f_k(g_k(z)) is the CVaR objective.
class GroupDroProblem final : public FccoProblem {
 public:
  GroupDroProblem(GroupedDataset data, std::size_t K);

  std::size_t num_blocks() const override { return data_.num_groups(); }
  std::size_t dim() const override { return data_.dim() + 1; }
  std::size_t inner_dim() const override { return 2; }
  std::size_t num_samples(BlockId k) const override;
  Vector inner_value(BlockId k, const Vector& z, SampleBatch batch) const override;
  Matrix inner_subjacobian(BlockId k, const Vector& z, SampleBatch batch) const override;
  double outer_value(BlockId k, const Vector& u) const override;
  Vector outer_subgradient(BlockId k, const Vector& u) const override;
  FccoConstants constants() const override;

  const GroupedDataset& data() const noexcept { return data_; }
  std::size_t K() const noexcept { return K_; }

 private:
  GroupedDataset data_;
  std::size_t K_;
};

GroupDroProblem as_fcco(const GroupedDataset& data, std::size_t K);

}  // namespace fcco
