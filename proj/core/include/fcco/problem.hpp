#pragma once

#include <cmath>
#include <limits>
#include <span>

#include "fcco/types.hpp"

namespace fcco {

// Indices into a block's finite empirical sample set.
using SampleBatch = std::span<const std::size_t>;

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// Regularity constants declared by the problem author. They are metadata; the
// diagnostics module can falsify them empirically. kUnbounded marks a
// constant the problem cannot certify.
struct FccoConstants {
  double rho_f = 0.0;  // weak convexity of f_i
  double rho_g = 0.0;  // weak convexity of g_i
  double C_f = kUnbounded;
  double C_g = kUnbounded;
  double sigma = kUnbounded;
};

struct TccoConstants {
  double rho_f = 0.0;
  double rho_g = 0.0;
  double C_f = kUnbounded;
  double C_g = kUnbounded;
  double C_h = kUnbounded;
  double L_h = 0.0;               // weak convexity (or smoothness) of h_{i,j}
  double C_h_tilde = kUnbounded;  // bound on ||h_{i,j}(w)||
  double sigma = kUnbounded;
};

// min_w (1/n) sum_i f_i(E_xi[g_i(w; xi)]).
//
// Every block owns a finite sample set of size num_samples(i); a batch is a
// list of indices into it, and the full batch gives the exact g_i(w).
// Implementations must be safe to call concurrently.
class FccoProblem {
 public:
  virtual ~FccoProblem() = default;

  virtual std::size_t num_blocks() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t inner_dim() const = 0;
  virtual std::size_t num_samples(BlockId i) const = 0;

  // g_i(w; batch), length inner_dim().
  virtual Vector inner_value(BlockId i, const Vector& w, SampleBatch batch) const = 0;
  // Element of the subdifferential of g_i(.; batch) at w, dim() x inner_dim().
  virtual Matrix inner_subjacobian(BlockId i, const Vector& w, SampleBatch batch) const = 0;
  virtual double outer_value(BlockId i, const Vector& u) const = 0;
  // Element of the subdifferential of f_i at u; entries are >= 0.
  virtual Vector outer_subgradient(BlockId i, const Vector& u) const = 0;

  virtual FccoConstants constants() const = 0;
  virtual Vector initial_point() const { return Vector::Zero(static_cast<Eigen::Index>(dim())); }
};

// min_w (1/n1) sum_i f_i((1/n2) sum_j g_i(E_xi[h_{i,j}(w; xi)])).
class TccoProblem {
 public:
  virtual ~TccoProblem() = default;

  virtual std::size_t num_outer() const = 0;   // n1
  virtual std::size_t num_middle() const = 0;  // n2
  virtual std::size_t dim() const = 0;         // d
  virtual std::size_t middle_dim() const = 0;  // d1, output of g_i
  virtual std::size_t inner_dim() const = 0;   // d2, output of h_{i,j}
  virtual std::size_t num_samples(BlockId i, BlockId j) const = 0;

  virtual Vector innermost_value(BlockId i, BlockId j, const Vector& w,
                                 SampleBatch batch) const = 0;
  // dim() x inner_dim().
  virtual Matrix innermost_jacobian(BlockId i, BlockId j, const Vector& w,
                                    SampleBatch batch) const = 0;
  virtual Vector middle_value(BlockId i, const Vector& v) const = 0;
  // inner_dim() x middle_dim().
  virtual Matrix middle_subjacobian(BlockId i, const Vector& v) const = 0;
  virtual double outer_value(BlockId i, const Vector& u) const = 0;
  virtual Vector outer_subgradient(BlockId i, const Vector& u) const = 0;

  virtual TccoConstants constants() const = 0;
  virtual Vector initial_point() const { return Vector::Zero(static_cast<Eigen::Index>(dim())); }
};

// Weak convexity modulus of the two-level objective implied by the constants:
// sqrt(d1) rho_g C_f + rho_f C_g^2.
inline double fcco_weak_convexity(const FccoConstants& c, std::size_t d1) {
  return std::sqrt(static_cast<double>(d1)) * c.rho_g * c.C_f + c.rho_f * c.C_g * c.C_g;
}

// Envelope parameter for which the SONX rate holds:
// rho_F + rho_g C_f + 2 rho_f C_g^2.
inline double fcco_envelope_parameter(const FccoConstants& c, std::size_t d1) {
  return fcco_weak_convexity(c, d1) + c.rho_g * c.C_f + 2.0 * c.rho_f * c.C_g * c.C_g;
}

// sqrt(d1) (sqrt(d2) L_h C_g + rho_g C_h^2) C_f + rho_f C_g^2 C_h^2.
inline double tcco_weak_convexity(const TccoConstants& c, std::size_t d1, std::size_t d2) {
  const double ch2 = c.C_h * c.C_h;
  return std::sqrt(static_cast<double>(d1)) *
             (std::sqrt(static_cast<double>(d2)) * c.L_h * c.C_g + c.rho_g * ch2) * c.C_f +
         c.rho_f * c.C_g * c.C_g * ch2;
}

// rho_F + 4 rho_f C_g^2 + 2 rho_g C_f C_h^2 + C_f C_g L_h.
inline double tcco_envelope_parameter(const TccoConstants& c, std::size_t d1, std::size_t d2) {
  return tcco_weak_convexity(c, d1, d2) + 4.0 * c.rho_f * c.C_g * c.C_g +
         2.0 * c.rho_g * c.C_f * c.C_h * c.C_h + c.C_f * c.C_g * c.L_h;
}

}  // namespace fcco
