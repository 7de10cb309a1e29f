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

// A bag is a matrix whose rows are instances. Regular (non-MIL) data uses
// bags of one row.
using Bag = Matrix;

struct TpaucDataset {
  std::vector<Bag> positives;
  std::vector<Bag> negatives;

  std::size_t n_plus() const noexcept { return positives.size(); }
  std::size_t n_minus() const noexcept { return negatives.size(); }
  std::size_t feature_dim() const;
  // Throws DataError on empty classes, empty bags or mixed dimensions.
  void validate() const;
};

// Squared hinge l(x) = (c + x)_+^2 on the score difference x = h_neg - h_pos.
struct SurrogateLossSpec {
  double margin = 1.0;
  double alpha = 0.5;  // TPR budget
  double beta = 0.5;   // FPR budget
};

double squared_hinge(double x, double margin);
double squared_hinge_derivative(double x, double margin);

// Instance scorer phi(w; x): linear x^T w, or w2^T tanh(W1 x + b1) with
// parameters packed as [W1 row-major, b1, w2]. Optional sigmoid on the output.
struct Scorer {
  enum class Kind { Linear, Mlp };
  Kind kind = Kind::Linear;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  bool sigmoid_output = false;

  std::size_t num_params() const;
  double score(const Vector& w, const Eigen::Ref<const Vector>& x) const;
  Vector score_grad(const Vector& w, const Eigen::Ref<const Vector>& x) const;
  // Linear: zeros. Mlp: small deterministic random weights.
  Vector initial_params(std::uint64_t seed) const;
};

// Pooled bag score. Smoothed max is tau log(mean exp(phi / tau) + offset).
struct PoolingSpec {
  enum class Kind { Mean, SmoothedMax };
  Kind kind = Kind::Mean;
  double tau = 1.0;
  double offset = 0.0;
};

double mean_pool(const Bag& bag, const Vector& w, const Scorer& scorer);
double smoothed_max_pool(const Bag& bag, const Vector& w, const Scorer& scorer, double tau_pool,
                         double offset = 0.0);

// Pooled score over the given rows of the bag, and its gradient in w.
double pooled_score(const Bag& bag, const Vector& w, const Scorer& scorer,
                    const PoolingSpec& pooling, SampleBatch rows);
Vector pooled_score_grad(const Bag& bag, const Vector& w, const Scorer& scorer,
                         const PoolingSpec& pooling, SampleBatch rows);
double pooled_score(const Bag& bag, const Vector& w, const Scorer& scorer,
                    const PoolingSpec& pooling);
Vector pooled_score_grad(const Bag& bag, const Vector& w, const Scorer& scorer,
                         const PoolingSpec& pooling);

// Quantity tracked by v in the MIL solver: the mean score for mean pooling,
// mean exp(phi / tau) + offset for smoothed max. score = to_score(tracked).
double tracked_value(const Bag& bag, const Vector& w, const Scorer& scorer,
                     const PoolingSpec& pooling, SampleBatch rows);
Vector tracked_grad(const Bag& bag, const Vector& w, const Scorer& scorer,
                    const PoolingSpec& pooling, SampleBatch rows);
double tracked_to_score(const PoolingSpec& pooling, double v);
double tracked_to_score_derivative(const PoolingSpec& pooling, double v);

// f(g, s') = s' + (g - s')_+ / alpha.
double outer_f(double g, double s_prime, double alpha);
double outer_f_dg(double g, double s_prime, double alpha);
double outer_f_ds_prime(double g, double s_prime, double alpha);

// One pair term s + (l(h_neg - h_pos) - s)_+ / beta and its partials.
struct PairTerm {
  double value;
  double d_diff;  // derivative in h_neg - h_pos
  double d_s;
};
PairTerm pair_term(double h_neg, double h_pos, double s, const SurrogateLossSpec& spec);

// psi_i(w, s_i; batch) on precomputed scores, averaged over the negatives in batch.
double inner_psi(double score_pos, const std::vector<double>& scores_neg, double s,
                 const SurrogateLossSpec& spec);
struct PsiSubgradient {
  double value;
  Vector d_w;
  double d_s;
};
// psi_i and its subgradient for positive i over the negative batch with
// exact (full-bag) pooling.
PsiSubgradient inner_psi_subgradient(const TpaucDataset& data, std::size_t i,
                                     std::span<const BlockId> negatives, const Vector& w,
                                     double s, const Scorer& scorer, const PoolingSpec& pooling,
                                     const SurrogateLossSpec& spec);

// k1 = floor(n+ alpha) lowest positives against k2 = floor(n- beta) highest
// negatives, averaged with 1 / (k1 k2).
double exact_tpauc_surrogate(const std::vector<double>& scores_pos,
                             const std::vector<double>& scores_neg, const SurrogateLossSpec& spec);
double exact_tpauc_surrogate(const Vector& w, const TpaucDataset& data, const Scorer& scorer,
                             const PoolingSpec& pooling, const SurrogateLossSpec& spec);
Vector exact_tpauc_surrogate_subgradient(const Vector& w, const TpaucDataset& data,
                                         const Scorer& scorer, const PoolingSpec& pooling,
                                         const SurrogateLossSpec& spec);

// (1/n+) sum_i f(psi_i(s_i), s') on score lists.
double tpauc_cvar_objective(const std::vector<double>& scores_pos,
                            const std::vector<double>& scores_neg, const Vector& s,
                            double s_prime, const SurrogateLossSpec& spec);

// Correctly ordered pairs among the restricted sets; ties count 1/2.
double tpauc_metric(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg,
                    double alpha, double beta);

std::size_t restricted_count(std::size_t n, double fraction);

// Weak convexity of psi_i from the loss and score constants: 4 rho_l C_h^2 / beta.
double psi_weak_convexity(double rho_loss, double C_h, double beta);

struct TpaucConfig {
  SurrogateLossSpec loss;
  Scorer scorer;
  PoolingSpec pooling;

  double eta = 0.0;                // w step
  std::optional<double> eta1;      // s step, default eta
  std::optional<double> eta2;      // s' step, default eta

  double tau = 0.5;                // regular: u
  std::optional<double> gamma;     // regular: default_gamma(n+, B1, tau)
  double tau1 = 0.5;               // MIL: v
  std::optional<double> gamma1;    // MIL: positives, default_gamma(n+, B1, tau1)
  std::optional<double> gamma2;    // MIL: negatives, default_gamma(n-, B2, tau1)
  double tau2 = 0.5;               // MIL: u
  std::optional<double> gamma3;    // MIL: default_gamma(n+, B1, tau2)

  std::size_t B1 = 1;              // positives per step
  std::size_t B2 = 1;              // negatives per step
  std::size_t B3 = 1;              // instances per bag (MIL)
  std::size_t T = 0;
  std::uint64_t seed = 0;

  double projection_radius = kUnbounded;  // bound on |v|
  bool scale_s_by_batch = true;           // the 1/B1 factor in the s_i step
  ReadOrder gradient_order = ReadOrder::PreUpdate;
  ReadOrder tracked_read = ReadOrder::PreUpdate;

  std::size_t trace_every = 1;
  double divergence_factor = 1e6;
  std::optional<Vector> w0;
};

void validate_tpauc(const TpaucConfig& config, const TpaucDataset& data);

struct TpaucState {
  Vector w;
  Vector w_prev;
  Vector s;
  double s_prime = 0.0;
  std::unordered_map<std::size_t, double> s_changed;  // s_{i,t-1} of moved coordinates
  BlockEstimatorState u;  // one scalar per positive
  BlockEstimatorState v;  // MIL: positives first, then negatives
  std::unordered_map<std::size_t, Vector> v_changed;
  std::size_t iteration = 0;
  double reference_norm = 1.0;

  double s_before(std::size_t i) const;
  const Vector& v_before(std::size_t key) const;
};

// Full-data value of the reformulated objective at (w, s, s').
double tpauc_objective(const TpaucDataset& data, const TpaucConfig& config, const Vector& w,
                       const Vector& s, double s_prime);
// Its subgradient packed as [d_w, d_s, d_s'].
Vector tpauc_objective_subgradient(const TpaucDataset& data, const TpaucConfig& config,
                                   const Vector& w, const Vector& s, double s_prime);

TpaucState tpauc_init(const TpaucDataset& data, const TpaucConfig& config, bool mil);
void tpauc_sonx_step(const TpaucDataset& data, TpaucState& state, const TpaucConfig& config);
void tpauc_sont_step(const TpaucDataset& data, TpaucState& state, const TpaucConfig& config);

struct TpaucRun {
  TpaucState state;
  RunTrace trace;
  std::optional<RunAborted> aborted;
};

using TpaucCallback = std::function<void(const TpaucState&, const TraceRow&)>;

TpaucRun tpauc_sonx_run(const TpaucDataset& data, const TpaucConfig& config,
                        const TpaucCallback& callback = {});
TpaucRun tpauc_sont_run(const TpaucDataset& data, const TpaucConfig& config,
                        const TpaucCallback& callback = {});

// Pooled scores of every positive and negative under full pooling.
std::pair<std::vector<double>, std::vector<double>> dataset_scores(const TpaucDataset& data,
                                                                   const Vector& w,
                                                                   const Scorer& scorer,
                                                                   const PoolingSpec& pooling);

// Full-batch subgradient descent on the exact surrogate with step eta.
Vector tpauc_full_batch_baseline(const TpaucDataset& data, const TpaucConfig& config,
                                 std::size_t iterations, double eta);

}  // namespace fcco
