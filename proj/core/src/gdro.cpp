#include "fcco/gdro.hpp"

#include <algorithm>
#include <cmath>

#include "fcco/rng.hpp"

namespace fcco {

namespace {

void check_K(std::size_t K, std::size_t N) {
  if (K < 1 || K > N) throw InvalidConfig("K must lie in [1, number of groups]");
}

double signed_label(double label) { return label > 0.5 ? 1.0 : -1.0; }

}  // namespace

double margin_loss(LossKind kind, double m) {
  switch (kind) {
    case LossKind::Hinge:
      return std::max(0.0, 1.0 - m);
    case LossKind::SquaredHinge: {
      const double a = std::max(0.0, 1.0 - m);
      return a * a;
    }
    case LossKind::Logistic:
      // log(1 + exp(-m)) without overflow.
      return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }
  return 0.0;
}

double margin_loss_derivative(LossKind kind, double m) {
  switch (kind) {
    case LossKind::Hinge:
      return 1.0 - m > 0.0 ? -1.0 : 0.0;
    case LossKind::SquaredHinge:
      return -2.0 * std::max(0.0, 1.0 - m);
    case LossKind::Logistic:
      return m > 0.0 ? -std::exp(-m) / (1.0 + std::exp(-m)) : -1.0 / (1.0 + std::exp(m));
  }
  return 0.0;
}

std::size_t GroupedDataset::dim() const {
  return features.empty() ? 0 : static_cast<std::size_t>(features.front().cols());
}

void GroupedDataset::validate() const {
  if (features.empty()) throw DataError("grouped dataset has no groups");
  if (labels.size() != features.size()) throw SchemaError("labels and features disagree on group count");
  const Eigen::Index d = features.front().cols();
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].rows() == 0) throw DataError("group " + std::to_string(k) + " is empty");
    if (features[k].cols() != d) throw SchemaError("inconsistent feature dimension");
    if (labels[k].size() != features[k].rows()) throw SchemaError("label count mismatch in group " + std::to_string(k));
    for (Eigen::Index r = 0; r < labels[k].size(); ++r) {
      if (labels[k][r] != 0.0 && labels[k][r] != 1.0) throw DataError("labels must be 0 or 1");
    }
  }
}

double group_loss(const GroupedDataset& data, std::size_t k, const Vector& w, SampleBatch rows) {
  const Matrix& X = data.features.at(k);
  if (w.size() != X.cols()) throw ContractViolation("group_loss: w has wrong dimension");
  if (rows.empty()) throw ContractViolation("group_loss: empty batch");
  double total = 0.0;
  for (std::size_t r : rows) {
    const auto ri = static_cast<Eigen::Index>(r);
    total += margin_loss(data.loss, signed_label(data.labels[k][ri]) * X.row(ri).dot(w));
  }
  return total / static_cast<double>(rows.size());
}

Vector group_loss_grad(const GroupedDataset& data, std::size_t k, const Vector& w,
                       SampleBatch rows) {
  const Matrix& X = data.features.at(k);
  if (w.size() != X.cols()) throw ContractViolation("group_loss_grad: w has wrong dimension");
  if (rows.empty()) throw ContractViolation("group_loss_grad: empty batch");
  Vector g = Vector::Zero(w.size());
  for (std::size_t r : rows) {
    const auto ri = static_cast<Eigen::Index>(r);
    const double y = signed_label(data.labels[k][ri]);
    g += (margin_loss_derivative(data.loss, y * X.row(ri).dot(w)) * y) * X.row(ri).transpose();
  }
  return g / static_cast<double>(rows.size());
}

std::vector<double> group_losses(const GroupedDataset& data, const Vector& w) {
  std::vector<double> out;
  for (std::size_t k = 0; k < data.num_groups(); ++k) {
    const std::vector<std::size_t> all = full_batch(static_cast<std::size_t>(data.features[k].rows()));
    out.push_back(group_loss(data, k, w, all));
  }
  return out;
}

double cvar_group_objective(const Vector& w, double s, const GroupedDataset& data, std::size_t K) {
  check_K(K, data.num_groups());
  double total = 0.0;
  for (double L : group_losses(data, w)) total += std::max(0.0, L - s);
  return total / static_cast<double>(K) + s;
}

Vector cvar_group_subgradient(const Vector& w, double s, const GroupedDataset& data,
                              std::size_t K) {
  check_K(K, data.num_groups());
  Vector out = Vector::Zero(w.size() + 1);
  double active = 0.0;
  for (std::size_t k = 0; k < data.num_groups(); ++k) {
    const std::vector<std::size_t> all = full_batch(static_cast<std::size_t>(data.features[k].rows()));
    if (group_loss(data, k, w, all) - s > 0.0) {
      out.head(w.size()) += group_loss_grad(data, k, w, all);
      active += 1.0;
    }
  }
  out.head(w.size()) /= static_cast<double>(K);
  out[w.size()] = 1.0 - active / static_cast<double>(K);
  return out;
}

GroupDroProblem::GroupDroProblem(GroupedDataset data, std::size_t K)
    : data_(std::move(data)), K_(K) {
  data_.validate();
  check_K(K_, data_.num_groups());
}

std::size_t GroupDroProblem::num_samples(BlockId k) const {
  return static_cast<std::size_t>(data_.features.at(k).rows());
}

Vector GroupDroProblem::inner_value(BlockId k, const Vector& z, SampleBatch batch) const {
  if (static_cast<std::size_t>(z.size()) != dim()) throw ContractViolation("z has wrong dimension");
  const Eigen::Index d = z.size() - 1;
  const double s = z[d];
  Vector out(2);
  out << group_loss(data_, k, z.head(d), batch) - s, s;
  return out;
}

Matrix GroupDroProblem::inner_subjacobian(BlockId k, const Vector& z, SampleBatch batch) const {
  if (static_cast<std::size_t>(z.size()) != dim()) throw ContractViolation("z has wrong dimension");
  const Eigen::Index d = z.size() - 1;
  Matrix J = Matrix::Zero(z.size(), 2);
  J.col(0).head(d) = group_loss_grad(data_, k, z.head(d), batch);
  J(d, 0) = -1.0;
  J(d, 1) = 1.0;
  return J;
}

double GroupDroProblem::outer_value(BlockId, const Vector& u) const {
  const double scale = static_cast<double>(data_.num_groups()) / static_cast<double>(K_);
  return scale * std::max(0.0, u[0]) + u[1];
}

Vector GroupDroProblem::outer_subgradient(BlockId, const Vector& u) const {
  const double scale = static_cast<double>(data_.num_groups()) / static_cast<double>(K_);
  Vector g(2);
  g << (u[0] > 0.0 ? scale : 0.0), 1.0;
  return g;
}

FccoConstants GroupDroProblem::constants() const {
  const double scale = static_cast<double>(data_.num_groups()) / static_cast<double>(K_);
  double max_sq = 0.0;
  for (const Matrix& X : data_.features) max_sq = std::max(max_sq, X.rowwise().squaredNorm().maxCoeff());
  FccoConstants c;
  c.rho_f = 0.0;
  c.rho_g = 0.0;  // every supported loss is convex in w
  c.C_f = std::sqrt(scale * scale + 1.0);
  c.C_g = data_.loss == LossKind::SquaredHinge ? kUnbounded : std::sqrt(max_sq + 2.0);
  c.sigma = kUnbounded;
  return c;
}

GroupDroProblem as_fcco(const GroupedDataset& data, std::size_t K) { return GroupDroProblem(data, K); }

}  // namespace fcco
