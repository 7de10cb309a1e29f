#include "fcco/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace fcco {

namespace {

// Largest magnitude of atan'' is 3 sqrt(3) / 8 at |u| = 1 / sqrt(3).
const double kAtanCurvature = 3.0 * std::sqrt(3.0) / 8.0;

Vector gaussian(CounterRng& rng, std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = rng.normal();
  return v;
}

Matrix gaussian(CounterRng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
  }
  return m;
}

Vector batch_noise(const Matrix& noise, SampleBatch batch) {
  if (batch.empty()) throw ContractViolation("empty sample batch");
  Vector mean = Vector::Zero(noise.cols());
  for (std::size_t k : batch) {
    if (k >= static_cast<std::size_t>(noise.rows())) throw ContractViolation("sample index out of range");
    mean += noise.row(static_cast<Eigen::Index>(k)).transpose();
  }
  return mean / static_cast<double>(batch.size());
}

double huber(double x) { return std::abs(x) <= 1.0 ? x * x : 2.0 * std::abs(x) - 1.0; }
double huber_derivative(double x) {
  return std::abs(x) <= 1.0 ? 2.0 * x : (x > 0.0 ? 2.0 : -2.0);
}
double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double hinge_atan_value(const Vector& u, double theta, double kappa) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) total += std::max(0.0, u[k] - theta) + kappa * std::atan(u[k]);
  return total;
}

Vector hinge_atan_subgradient(const Vector& u, double theta, double kappa) {
  Vector g(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    g[k] = (u[k] - theta > 0.0 ? 1.0 : 0.0) + kappa / (1.0 + u[k] * u[k]);
  }
  return g;
}

void check_dim(const Vector& w, std::size_t d) {
  if (static_cast<std::size_t>(w.size()) != d) throw ContractViolation("parameter has wrong dimension");
}

}  // namespace

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "linear-cvar-fcco") return SyntheticKind::LinearCvarFcco;
  if (name == "quadratic-fcco") return SyntheticKind::QuadraticFcco;
  if (name == "tcco") return SyntheticKind::Tcco;
  if (name == "mil-tpauc") return SyntheticKind::MilTpauc;
  if (name == "grouped-dro") return SyntheticKind::GroupedDro;
  throw InvalidConfig("unknown synthetic kind '" + name + "'");
}

std::string synthetic_kind_name(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::LinearCvarFcco: return "linear-cvar-fcco";
    case SyntheticKind::QuadraticFcco: return "quadratic-fcco";
    case SyntheticKind::Tcco: return "tcco";
    case SyntheticKind::MilTpauc: return "mil-tpauc";
    case SyntheticKind::GroupedDro: return "grouped-dro";
  }
  return "unknown";
}

void SyntheticSpec::validate() const {
  if (n == 0 || n2 == 0 || d == 0 || d1 == 0 || d2 == 0 || samples == 0) {
    throw InvalidConfig("synthetic sizes must be positive");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidConfig("sigma must be >= 0");
  if (kappa_f < 0.0 || kappa_g < 0.0) throw InvalidConfig("curvatures must be >= 0");
  if (kind == SyntheticKind::MilTpauc) {
    if (n_pos == 0 || n_neg == 0) throw InvalidConfig("need positive and negative bags");
    if (bag_min == 0 || bag_min > bag_max) throw InvalidConfig("bag sizes must satisfy 1 <= bag_min <= bag_max");
  }
}

Matrix standardized_noise(CounterRng& rng, std::size_t rows, std::size_t cols, double sigma) {
  Matrix noise = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (sigma == 0.0 || rows < 2) return noise;
  noise = gaussian(rng, rows, cols);
  for (Eigen::Index c = 0; c < noise.cols(); ++c) {
    noise.col(c).array() -= noise.col(c).mean();
    const double sd = std::sqrt(noise.col(c).squaredNorm() / static_cast<double>(rows));
    if (sd > 0.0) noise.col(c) *= sigma / sd;
  }
  return noise;
}

LinearFccoProblem::LinearFccoProblem(const SyntheticSpec& spec)
    : d_(spec.d), d1_(spec.d1), samples_(spec.samples) {
  spec.validate();
  CounterRng rng(spec.seed, 0, Purpose::Synthetic);
  double C_g = 0.0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    A_.push_back(gaussian(rng, d1_, d_) / std::sqrt(static_cast<double>(d_)));
    b_.push_back(gaussian(rng, d1_));
    noise_.push_back(standardized_noise(rng, samples_, d1_, spec.sigma));
    const double norm = d1_ == 1 ? A_.back().row(0).norm()
                                 : Eigen::JacobiSVD<Matrix>(A_.back()).singularValues()(0);
    C_g = std::max(C_g, norm);
  }
  constants_.C_f = std::sqrt(static_cast<double>(d1_));
  constants_.C_g = C_g;
  constants_.sigma = spec.sigma * std::sqrt(static_cast<double>(d1_));
}

Vector LinearFccoProblem::inner_value(BlockId i, const Vector& w, SampleBatch batch) const {
  check_dim(w, d_);
  return A_.at(i) * w + b_[i] + batch_noise(noise_[i], batch);
}

Matrix LinearFccoProblem::inner_subjacobian(BlockId i, const Vector& w, SampleBatch) const {
  check_dim(w, d_);
  return A_.at(i).transpose();
}

double LinearFccoProblem::outer_value(BlockId, const Vector& u) const {
  return hinge_atan_value(u, 0.0, 0.0);
}

Vector LinearFccoProblem::outer_subgradient(BlockId, const Vector& u) const {
  return hinge_atan_subgradient(u, 0.0, 0.0);
}

QuadraticFccoProblem::QuadraticFccoProblem(const SyntheticSpec& spec)
    : d_(spec.d), d1_(spec.d1), samples_(spec.samples), kappa_f_(spec.kappa_f),
      kappa_g_(spec.kappa_g), theta_(spec.theta) {
  spec.validate();
  CounterRng rng(spec.seed, 0, Purpose::Synthetic);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_));
  double rho_g = 0.0;
  double C_g = 0.0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    a_.push_back(gaussian(rng, d1_, d_) * scale);
    b_.push_back(gaussian(rng, d1_) * 0.5);
    c_.push_back(gaussian(rng, d1_, d_) * scale);
    noise_.push_back(standardized_noise(rng, samples_, d1_, spec.sigma));
    double frob = 0.0;
    for (std::size_t k = 0; k < d1_; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double cn = c_.back().row(kk).norm();
      rho_g = std::max(rho_g, kappa_g_ * cn * cn);
      const double lip = a_.back().row(kk).norm() + kappa_g_ * cn;
      frob += lip * lip;
    }
    C_g = std::max(C_g, std::sqrt(frob));
  }
  constants_.rho_f = kappa_f_ * kAtanCurvature;
  constants_.rho_g = rho_g;
  constants_.C_f = std::sqrt(static_cast<double>(d1_)) * (1.0 + kappa_f_);
  constants_.C_g = C_g;
  constants_.sigma = spec.sigma * std::sqrt(static_cast<double>(d1_));
}

Vector QuadraticFccoProblem::inner_value(BlockId i, const Vector& w, SampleBatch batch) const {
  check_dim(w, d_);
  const Vector lin = a_.at(i) * w + b_[i];
  const Vector cw = c_[i] * w;
  Vector g(static_cast<Eigen::Index>(d1_));
  for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = std::abs(lin[k]) - 0.5 * kappa_g_ * huber(cw[k]);
  return g + batch_noise(noise_[i], batch);
}

Matrix QuadraticFccoProblem::inner_subjacobian(BlockId i, const Vector& w, SampleBatch) const {
  check_dim(w, d_);
  const Vector lin = a_.at(i) * w + b_[i];
  const Vector cw = c_[i] * w;
  Matrix J(static_cast<Eigen::Index>(d_), static_cast<Eigen::Index>(d1_));
  for (Eigen::Index k = 0; k < J.cols(); ++k) {
    J.col(k) = sign0(lin[k]) * a_[i].row(k).transpose() -
               (0.5 * kappa_g_ * huber_derivative(cw[k])) * c_[i].row(k).transpose();
  }
  return J;
}

double QuadraticFccoProblem::outer_value(BlockId, const Vector& u) const {
  return hinge_atan_value(u, theta_, kappa_f_);
}

Vector QuadraticFccoProblem::outer_subgradient(BlockId, const Vector& u) const {
  return hinge_atan_subgradient(u, theta_, kappa_f_);
}

SyntheticTccoProblem::SyntheticTccoProblem(const SyntheticSpec& spec)
    : n1_(spec.n), n2_(spec.n2), d_(spec.d), d1_(spec.d1), d2_(spec.d2), samples_(spec.samples),
      kappa_f_(spec.kappa_f), kappa_g_(spec.kappa_g), theta_(spec.theta) {
  spec.validate();
  CounterRng rng(spec.seed, 0, Purpose::Synthetic);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_));
  double L_h = 0.0;
  double C_h = 0.0;
  for (std::size_t p = 0; p < n1_ * n2_; ++p) {
    a_.push_back(gaussian(rng, d2_, d_) * scale);
    b_.push_back(gaussian(rng, d2_));
    noise_.push_back(standardized_noise(rng, samples_, d2_, spec.sigma));
    L_h = std::max(L_h, a_.back().rowwise().squaredNorm().maxCoeff());
    C_h = std::max(C_h, a_.back().norm());
  }
  double max_entry = 0.0;
  double C_g = 0.0;
  for (std::size_t i = 0; i < n1_; ++i) {
    Matrix M(static_cast<Eigen::Index>(d1_), static_cast<Eigen::Index>(d2_));
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      for (Eigen::Index c = 0; c < M.cols(); ++c) M(r, c) = rng.uniform() / static_cast<double>(d2_);
    }
    max_entry = std::max(max_entry, M.maxCoeff());
    C_g = std::max(C_g, (1.0 + kappa_g_) * M.norm());
    M_.push_back(std::move(M));
  }
  constants_.rho_f = kappa_f_ * kAtanCurvature;
  constants_.rho_g = kappa_g_ * kAtanCurvature * max_entry;
  constants_.C_f = std::sqrt(static_cast<double>(d1_)) * (1.0 + kappa_f_);
  constants_.C_g = C_g;
  constants_.C_h = C_h;
  constants_.L_h = L_h;
  constants_.C_h_tilde = std::sqrt(static_cast<double>(d2_));
  constants_.sigma = spec.sigma * std::sqrt(static_cast<double>(d2_));
}

Vector SyntheticTccoProblem::innermost_value(BlockId i, BlockId j, const Vector& w,
                                             SampleBatch batch) const {
  check_dim(w, d_);
  const std::size_t p = i * n2_ + j;
  const Vector z = a_.at(p) * w + b_[p];
  return z.array().sin().matrix() + batch_noise(noise_[p], batch);
}

Matrix SyntheticTccoProblem::innermost_jacobian(BlockId i, BlockId j, const Vector& w,
                                                SampleBatch) const {
  check_dim(w, d_);
  const std::size_t p = i * n2_ + j;
  const Vector z = a_.at(p) * w + b_[p];
  Matrix J(static_cast<Eigen::Index>(d_), static_cast<Eigen::Index>(d2_));
  for (Eigen::Index k = 0; k < J.cols(); ++k) J.col(k) = std::cos(z[k]) * a_[p].row(k).transpose();
  return J;
}

Vector SyntheticTccoProblem::middle_value(BlockId i, const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != d2_) throw ContractViolation("v has wrong dimension");
  Vector phi(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) phi[k] = std::max(0.0, v[k]) + kappa_g_ * std::atan(v[k]);
  return M_.at(i) * phi;
}

Matrix SyntheticTccoProblem::middle_subjacobian(BlockId i, const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != d2_) throw ContractViolation("v has wrong dimension");
  Matrix J = M_.at(i).transpose();  // d2 x d1
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    J.row(k) *= (v[k] > 0.0 ? 1.0 : 0.0) + kappa_g_ / (1.0 + v[k] * v[k]);
  }
  return J;
}

double SyntheticTccoProblem::outer_value(BlockId, const Vector& u) const {
  return hinge_atan_value(u, theta_, kappa_f_);
}

Vector SyntheticTccoProblem::outer_subgradient(BlockId, const Vector& u) const {
  return hinge_atan_subgradient(u, theta_, kappa_f_);
}

std::unique_ptr<FccoProblem> gen_fcco(const SyntheticSpec& spec) {
  switch (spec.kind) {
    case SyntheticKind::LinearCvarFcco: return std::make_unique<LinearFccoProblem>(spec);
    case SyntheticKind::QuadraticFcco: return std::make_unique<QuadraticFccoProblem>(spec);
    case SyntheticKind::GroupedDro:
      return std::make_unique<GroupDroProblem>(gen_grouped_dro(spec), std::max<std::size_t>(1, spec.n / 5));
    default: throw InvalidConfig("synthetic kind " + synthetic_kind_name(spec.kind) + " is not an FCCO problem");
  }
}

std::unique_ptr<TccoProblem> gen_tcco(const SyntheticSpec& spec) {
  if (spec.kind != SyntheticKind::Tcco) {
    throw InvalidConfig("synthetic kind " + synthetic_kind_name(spec.kind) + " is not a TCCO problem");
  }
  return std::make_unique<SyntheticTccoProblem>(spec);
}

MilInstance gen_mil_tpauc(const SyntheticSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed, 0, Purpose::Synthetic);
  const double sigma = spec.sigma > 0.0 ? spec.sigma : 1.0;
  const auto make_bag = [&](double center) {
    const std::size_t size = spec.bag_min + rng.below(spec.bag_max - spec.bag_min + 1);
    Matrix bag = gaussian(rng, size, spec.d) * sigma;
    if (spec.separable) bag.col(0) = bag.col(0).cwiseMax(-0.4).cwiseMin(0.4);
    bag.col(0).array() += center;
    return bag;
  };
  MilInstance out;
  for (std::size_t i = 0; i < spec.n_pos; ++i) out.data.positives.push_back(make_bag(1.8));
  for (std::size_t j = 0; j < spec.n_neg; ++j) out.data.negatives.push_back(make_bag(0.0));
  out.w_star = Vector::Zero(static_cast<Eigen::Index>(spec.d));
  out.w_star[0] = 1.0;
  return out;
}

GroupedDataset gen_grouped_dro(const SyntheticSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed, 0, Purpose::Synthetic);
  Vector direction = gaussian(rng, spec.d);
  direction /= direction.norm();
  GroupedDataset data;
  data.loss = spec.loss;
  for (std::size_t k = 0; k < spec.n; ++k) {
    const Vector center = gaussian(rng, spec.d);
    const double offset = 0.5 * rng.normal();
    Matrix X(static_cast<Eigen::Index>(spec.samples), static_cast<Eigen::Index>(spec.d));
    Vector y(static_cast<Eigen::Index>(spec.samples));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      X.row(r) = (center + spec.sigma * gaussian(rng, spec.d)).transpose();
      y[r] = X.row(r).dot(direction) + offset > 0.0 ? 1.0 : 0.0;
    }
    data.features.push_back(std::move(X));
    data.labels.push_back(std::move(y));
  }
  return data;
}

}  // namespace fcco
