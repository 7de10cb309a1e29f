#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fcco/gdro.hpp"
#include "fcco/problem.hpp"
#include "fcco/rng.hpp"
#include "fcco/tpauc.hpp"

namespace fcco {

enum class SyntheticKind { LinearCvarFcco, QuadraticFcco, Tcco, MilTpauc, GroupedDro };

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string synthetic_kind_name(SyntheticKind kind);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::LinearCvarFcco;
  std::size_t n = 8;         // FCCO blocks, TCCO n1
  std::size_t n2 = 4;        // TCCO middle blocks
  std::size_t d = 4;
  std::size_t d1 = 1;
  std::size_t d2 = 2;
  std::size_t samples = 64;  // empirical samples per block (or pair, or group)
  double sigma = 0.0;        // noise std
  std::uint64_t seed = 0;

  double kappa_f = 0.5;      // curvature of the atan term in f
  double kappa_g = 0.5;      // curvature of the concave term in g
  double theta = 0.0;        // hinge location in f

  // MIL TPAUC
  std::size_t n_pos = 20;
  std::size_t n_neg = 80;
  std::size_t bag_min = 1;
  std::size_t bag_max = 8;
  bool separable = true;

  // Group DRO
  LossKind loss = LossKind::Hinge;

  void validate() const;
};

// Standardized noise: each column has mean exactly 0 and population std sigma.
Matrix standardized_noise(CounterRng& rng, std::size_t rows, std::size_t cols, double sigma);

// g_i(w; xi) = A_i w + b_i + xi, f_i(u) = sum_k max(0, u_k).
class LinearFccoProblem final : public FccoProblem {
 public:
  explicit LinearFccoProblem(const SyntheticSpec& spec);

  std::size_t num_blocks() const override { return A_.size(); }
  std::size_t dim() const override { return d_; }
  std::size_t inner_dim() const override { return d1_; }
  std::size_t num_samples(BlockId) const override { return samples_; }
  Vector inner_value(BlockId i, const Vector& w, SampleBatch batch) const override;
  Matrix inner_subjacobian(BlockId i, const Vector& w, SampleBatch batch) const override;
  double outer_value(BlockId i, const Vector& u) const override;
  Vector outer_subgradient(BlockId i, const Vector& u) const override;
  FccoConstants constants() const override { return constants_; }

  const Matrix& A(BlockId i) const { return A_.at(i); }
  const Vector& b(BlockId i) const { return b_.at(i); }

 private:
  std::size_t d_, d1_, samples_;
  std::vector<Matrix> A_;      // d1 x d
  std::vector<Vector> b_;
  std::vector<Matrix> noise_;  // samples x d1
  FccoConstants constants_;
};

// g_ik(w; xi) = |a_ik^T w + b_ik| - (kappa_g / 2) huber(c_ik^T w) + xi_k with
// huber(x) = x^2 on |x| <= 1 and 2|x| - 1 outside;
// f_i(u) = sum_k max(0, u_k - theta) + kappa_f atan(u_k).
class QuadraticFccoProblem final : public FccoProblem {
 public:
  explicit QuadraticFccoProblem(const SyntheticSpec& spec);

  std::size_t num_blocks() const override { return a_.size(); }
  std::size_t dim() const override { return d_; }
  std::size_t inner_dim() const override { return d1_; }
  std::size_t num_samples(BlockId) const override { return samples_; }
  Vector inner_value(BlockId i, const Vector& w, SampleBatch batch) const override;
  Matrix inner_subjacobian(BlockId i, const Vector& w, SampleBatch batch) const override;
  double outer_value(BlockId i, const Vector& u) const override;
  Vector outer_subgradient(BlockId i, const Vector& u) const override;
  FccoConstants constants() const override { return constants_; }

 private:
  std::size_t d_, d1_, samples_;
  double kappa_f_, kappa_g_, theta_;
  std::vector<Matrix> a_;  // d1 x d
  std::vector<Vector> b_;
  std::vector<Matrix> c_;  // d1 x d
  std::vector<Matrix> noise_;
  FccoConstants constants_;
};

// h_ijk(w; xi) = sin(a_ijk^T w + b_ijk) + xi_k,
// g_i(v) = M_i (max(v, 0) + kappa_g atan(v)) with M_i >= 0,
// f_i as in QuadraticFccoProblem.
class SyntheticTccoProblem final : public TccoProblem {
 public:
  explicit SyntheticTccoProblem(const SyntheticSpec& spec);

  std::size_t num_outer() const override { return n1_; }
  std::size_t num_middle() const override { return n2_; }
  std::size_t dim() const override { return d_; }
  std::size_t middle_dim() const override { return d1_; }
  std::size_t inner_dim() const override { return d2_; }
  std::size_t num_samples(BlockId, BlockId) const override { return samples_; }
  Vector innermost_value(BlockId i, BlockId j, const Vector& w, SampleBatch batch) const override;
  Matrix innermost_jacobian(BlockId i, BlockId j, const Vector& w, SampleBatch batch) const override;
  Vector middle_value(BlockId i, const Vector& v) const override;
  Matrix middle_subjacobian(BlockId i, const Vector& v) const override;
  double outer_value(BlockId i, const Vector& u) const override;
  Vector outer_subgradient(BlockId i, const Vector& u) const override;
  TccoConstants constants() const override { return constants_; }

 private:
  std::size_t n1_, n2_, d_, d1_, d2_, samples_;
  double kappa_f_, kappa_g_, theta_;
  std::vector<Matrix> a_;      // per pair, d2 x d
  std::vector<Vector> b_;
  std::vector<Matrix> noise_;  // per pair, samples x d2
  std::vector<Matrix> M_;      // per outer block, d1 x d2
  TccoConstants constants_;
};

std::unique_ptr<FccoProblem> gen_fcco(const SyntheticSpec& spec);
std::unique_ptr<TccoProblem> gen_tcco(const SyntheticSpec& spec);

struct MilInstance {
  TpaucDataset data;
  Vector w_star;  // separating direction when spec.separable
};

// Instances of positive bags are centered at 1.8 e_0, negatives at 0, with
// isotropic noise of std sigma (default 1 when sigma == 0). With separable set,
// the e_0 component of the noise is clamped to [-0.4, 0.4].
MilInstance gen_mil_tpauc(const SyntheticSpec& spec);

// spec.n groups of spec.samples examples in dimension d around random group
// centers, labels from a shared direction with a per-group offset.
GroupedDataset gen_grouped_dro(const SyntheticSpec& spec);

}  // namespace fcco
