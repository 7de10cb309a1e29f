#include "fcco/tpauc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "fcco/rng.hpp"

namespace fcco {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_rows(const Bag& bag, SampleBatch rows) {
  if (bag.rows() == 0 || rows.empty()) throw DataError("pooling over an empty bag");
  for (std::size_t r : rows) {
    if (r >= static_cast<std::size_t>(bag.rows())) throw ContractViolation("bag row out of range");
  }
}

void check_pool_tau(const PoolingSpec& pooling) {
  if (pooling.kind == PoolingSpec::Kind::SmoothedMax && !(pooling.tau > 0.0)) {
    throw InvalidConfig("smoothed-max pooling needs tau > 0");
  }
}

std::vector<double> instance_scores(const Bag& bag, const Vector& w, const Scorer& scorer,
                                    SampleBatch rows) {
  std::vector<double> phi;
  phi.reserve(rows.size());
  for (std::size_t r : rows) phi.push_back(scorer.score(w, bag.row(static_cast<Eigen::Index>(r)).transpose()));
  return phi;
}

// log(mean exp(z)) computed with a max shift.
double log_mean_exp(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double x : z) total += std::exp(x - m);
  return m + std::log(total / static_cast<double>(z.size()));
}

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double eta_or(const std::optional<double>& value, double fallback) {
  return value ? *value : fallback;
}

double gamma_or_default(const std::optional<double>& gamma, std::size_t n, std::size_t B,
                        double tau) {
  if (gamma) return *gamma;
  return tau >= 1.0 ? 0.0 : default_gamma(n, B, tau);
}

std::vector<std::size_t> draw(std::uint64_t seed, std::uint64_t iteration, Purpose purpose,
                              std::uint64_t sub, std::size_t population, std::size_t batch) {
  if (batch >= population) return full_batch(population);
  CounterRng rng = stream(seed, iteration, purpose, sub);
  return sample_blocks(rng, population, batch);
}

// Indices sorted by score; ties keep index order.
std::vector<std::size_t> order_by(const std::vector<double>& scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

const Bag& example(const TpaucDataset& data, std::size_t key) {
  return key < data.n_plus() ? data.positives[key] : data.negatives[key - data.n_plus()];
}

// psi over precomputed scores and gradients; the sum is scaled by 1/B once.
struct PsiParts {
  double value = 0.0;
  Vector d_w;
  double d_s = 0.0;
};

PsiParts psi_from_scores(double h_pos, const Vector& g_pos, const std::vector<double>& h_neg,
                         const std::vector<Vector>& g_neg, double s,
                         const SurrogateLossSpec& spec, bool with_grad) {
  PsiParts out;
  if (with_grad) out.d_w = Vector::Zero(g_pos.size());
  for (std::size_t b = 0; b < h_neg.size(); ++b) {
    const PairTerm pt = pair_term(h_neg[b], h_pos, s, spec);
    out.value += pt.value;
    out.d_s += pt.d_s;
    if (with_grad) out.d_w += pt.d_diff * (g_neg[b] - g_pos);
  }
  const double inv = 1.0 / static_cast<double>(h_neg.size());
  out.value *= inv;
  out.d_s *= inv;
  if (with_grad) out.d_w *= inv;
  return out;
}

template <class F>
void guarded_step(TpaucState& state, const Vector& G, const TpaucConfig& config, F&& commit) {
  if (!all_finite(G)) {
    throw RunAborted(RunAborted::Reason::NonFinite, state.iteration, "non-finite gradient");
  }
  Vector next = state.w - config.eta * G;
  if (!all_finite(next)) {
    throw RunAborted(RunAborted::Reason::NonFinite, state.iteration, "non-finite iterate");
  }
  commit();
  state.w_prev = std::move(state.w);
  state.w = std::move(next);
  ++state.iteration;
  if (state.w.norm() > config.divergence_factor * state.reference_norm) {
    throw RunAborted(RunAborted::Reason::Diverged, state.iteration,
                     "iterate norm exceeded the divergence guard");
  }
}

}  // namespace

std::size_t TpaucDataset::feature_dim() const {
  if (!positives.empty()) return static_cast<std::size_t>(positives.front().cols());
  if (!negatives.empty()) return static_cast<std::size_t>(negatives.front().cols());
  return 0;
}

void TpaucDataset::validate() const {
  if (positives.empty() || negatives.empty()) {
    throw DataError("dataset needs at least one positive and one negative example");
  }
  const Eigen::Index d = static_cast<Eigen::Index>(feature_dim());
  for (const auto* side : {&positives, &negatives}) {
    for (const Bag& bag : *side) {
      if (bag.rows() == 0) throw DataError("empty bag");
      if (bag.cols() != d) throw SchemaError("inconsistent feature dimension");
    }
  }
}

double squared_hinge(double x, double margin) {
  const double a = std::max(0.0, margin + x);
  return a * a;
}

double squared_hinge_derivative(double x, double margin) {
  return 2.0 * std::max(0.0, margin + x);
}

std::size_t Scorer::num_params() const {
  return kind == Kind::Linear ? input_dim : hidden * input_dim + 2 * hidden;
}

double Scorer::score(const Vector& w, const Eigen::Ref<const Vector>& x) const {
  if (static_cast<std::size_t>(w.size()) != num_params() ||
      static_cast<std::size_t>(x.size()) != input_dim) {
    throw ContractViolation("scorer: parameter or input dimension mismatch");
  }
  double raw = 0.0;
  if (kind == Kind::Linear) {
    raw = x.dot(w);
  } else {
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto d = static_cast<Eigen::Index>(input_dim);
    Eigen::Map<const RowMajor> W1(w.data(), h, d);
    const Vector a = (W1 * x + w.segment(h * d, h)).array().tanh().matrix();
    raw = w.segment(h * d + h, h).dot(a);
  }
  return sigmoid_output ? sigmoid(raw) : raw;
}

Vector Scorer::score_grad(const Vector& w, const Eigen::Ref<const Vector>& x) const {
  if (static_cast<std::size_t>(w.size()) != num_params() ||
      static_cast<std::size_t>(x.size()) != input_dim) {
    throw ContractViolation("scorer: parameter or input dimension mismatch");
  }
  Vector g(w.size());
  double raw = 0.0;
  if (kind == Kind::Linear) {
    g = x;
    raw = x.dot(w);
  } else {
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto d = static_cast<Eigen::Index>(input_dim);
    Eigen::Map<const RowMajor> W1(w.data(), h, d);
    const Vector a = (W1 * x + w.segment(h * d, h)).array().tanh().matrix();
    const Vector w2 = w.segment(h * d + h, h);
    const Vector delta = (w2.array() * (1.0 - a.array().square())).matrix();
    Eigen::Map<RowMajor> dW1(g.data(), h, d);
    dW1 = delta * x.transpose();
    g.segment(h * d, h) = delta;
    g.segment(h * d + h, h) = a;
    raw = w2.dot(a);
  }
  if (sigmoid_output) {
    const double p = sigmoid(raw);
    g *= p * (1.0 - p);
  }
  return g;
}

Vector Scorer::initial_params(std::uint64_t seed) const {
  Vector w = Vector::Zero(static_cast<Eigen::Index>(num_params()));
  if (kind == Kind::Linear) return w;
  CounterRng rng(seed, 0, Purpose::Init);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto d = static_cast<Eigen::Index>(input_dim);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index k = 0; k < h * d; ++k) w[k] = s1 * rng.normal();
  for (Eigen::Index k = 0; k < h; ++k) w[h * d + h + k] = s2 * rng.normal();
  return w;
}

double pooled_score(const Bag& bag, const Vector& w, const Scorer& scorer,
                    const PoolingSpec& pooling, SampleBatch rows) {
  check_pool_tau(pooling);
  check_rows(bag, rows);
  const std::vector<double> phi = instance_scores(bag, w, scorer, rows);
  if (pooling.kind == PoolingSpec::Kind::Mean) {
    double total = 0.0;
    for (double p : phi) total += p;
    return total / static_cast<double>(phi.size());
  }
  std::vector<double> z(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k) z[k] = phi[k] / pooling.tau;
  double lme = log_mean_exp(z);
  if (pooling.offset > 0.0) lme = log_add_exp(lme, std::log(pooling.offset));
  return pooling.tau * lme;
}

Vector pooled_score_grad(const Bag& bag, const Vector& w, const Scorer& scorer,
                         const PoolingSpec& pooling, SampleBatch rows) {
  check_pool_tau(pooling);
  check_rows(bag, rows);
  Vector g = Vector::Zero(static_cast<Eigen::Index>(scorer.num_params()));
  if (pooling.kind == PoolingSpec::Kind::Mean) {
    for (std::size_t r : rows) g += scorer.score_grad(w, bag.row(static_cast<Eigen::Index>(r)).transpose());
    return g / static_cast<double>(rows.size());
  }
  const std::vector<double> phi = instance_scores(bag, w, scorer, rows);
  double m = -std::numeric_limits<double>::infinity();
  for (double p : phi) m = std::max(m, p / pooling.tau);
  double denom = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double e = std::exp(phi[k] / pooling.tau - m);
    denom += e;
    g += e * scorer.score_grad(w, bag.row(static_cast<Eigen::Index>(rows[k])).transpose());
  }
  denom /= static_cast<double>(rows.size());
  g /= static_cast<double>(rows.size());
  if (pooling.offset > 0.0) denom += std::exp(std::log(pooling.offset) - m);
  return g / denom;
}

double pooled_score(const Bag& bag, const Vector& w, const Scorer& scorer,
                    const PoolingSpec& pooling) {
  const std::vector<std::size_t> all = full_batch(static_cast<std::size_t>(bag.rows()));
  return pooled_score(bag, w, scorer, pooling, all);
}

Vector pooled_score_grad(const Bag& bag, const Vector& w, const Scorer& scorer,
                         const PoolingSpec& pooling) {
  const std::vector<std::size_t> all = full_batch(static_cast<std::size_t>(bag.rows()));
  return pooled_score_grad(bag, w, scorer, pooling, all);
}

double mean_pool(const Bag& bag, const Vector& w, const Scorer& scorer) {
  return pooled_score(bag, w, scorer, PoolingSpec{PoolingSpec::Kind::Mean, 1.0, 0.0});
}

double smoothed_max_pool(const Bag& bag, const Vector& w, const Scorer& scorer, double tau_pool,
                         double offset) {
  return pooled_score(bag, w, scorer, PoolingSpec{PoolingSpec::Kind::SmoothedMax, tau_pool, offset});
}

double tracked_value(const Bag& bag, const Vector& w, const Scorer& scorer,
                     const PoolingSpec& pooling, SampleBatch rows) {
  if (pooling.kind == PoolingSpec::Kind::Mean) return pooled_score(bag, w, scorer, pooling, rows);
  check_pool_tau(pooling);
  check_rows(bag, rows);
  double total = 0.0;
  for (double p : instance_scores(bag, w, scorer, rows)) total += std::exp(p / pooling.tau);
  return total / static_cast<double>(rows.size()) + pooling.offset;
}

Vector tracked_grad(const Bag& bag, const Vector& w, const Scorer& scorer,
                    const PoolingSpec& pooling, SampleBatch rows) {
  if (pooling.kind == PoolingSpec::Kind::Mean) {
    return pooled_score_grad(bag, w, scorer, pooling, rows);
  }
  check_pool_tau(pooling);
  check_rows(bag, rows);
  Vector g = Vector::Zero(static_cast<Eigen::Index>(scorer.num_params()));
  for (std::size_t r : rows) {
    const auto x = bag.row(static_cast<Eigen::Index>(r)).transpose();
    g += (std::exp(scorer.score(w, x) / pooling.tau) / pooling.tau) * scorer.score_grad(w, x);
  }
  return g / static_cast<double>(rows.size());
}

double tracked_to_score(const PoolingSpec& pooling, double v) {
  if (pooling.kind == PoolingSpec::Kind::Mean) return v;
  if (!(v > 0.0)) throw ContractViolation("smoothed-max tracked value must be positive");
  return pooling.tau * std::log(v);
}

double tracked_to_score_derivative(const PoolingSpec& pooling, double v) {
  if (pooling.kind == PoolingSpec::Kind::Mean) return 1.0;
  if (!(v > 0.0)) throw ContractViolation("smoothed-max tracked value must be positive");
  return pooling.tau / v;
}

double outer_f(double g, double s_prime, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidConfig("alpha must lie in (0, 1]");
  return s_prime + std::max(0.0, g - s_prime) / alpha;
}

double outer_f_dg(double g, double s_prime, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidConfig("alpha must lie in (0, 1]");
  return g - s_prime > 0.0 ? 1.0 / alpha : 0.0;
}

double outer_f_ds_prime(double g, double s_prime, double alpha) {
  return 1.0 - outer_f_dg(g, s_prime, alpha);
}

PairTerm pair_term(double h_neg, double h_pos, double s, const SurrogateLossSpec& spec) {
  const double x = h_neg - h_pos;
  const double l = squared_hinge(x, spec.margin);
  if (l - s > 0.0) {
    return {s + (l - s) / spec.beta, squared_hinge_derivative(x, spec.margin) / spec.beta,
            1.0 - 1.0 / spec.beta};
  }
  return {s, 0.0, 1.0};
}

double inner_psi(double score_pos, const std::vector<double>& scores_neg, double s,
                 const SurrogateLossSpec& spec) {
  if (scores_neg.empty()) throw ContractViolation("inner_psi: empty negative batch");
  return psi_from_scores(score_pos, Vector(), scores_neg, {}, s, spec, false).value;
}

PsiSubgradient inner_psi_subgradient(const TpaucDataset& data, std::size_t i,
                                     std::span<const BlockId> negatives, const Vector& w,
                                     double s, const Scorer& scorer, const PoolingSpec& pooling,
                                     const SurrogateLossSpec& spec) {
  if (negatives.empty()) throw ContractViolation("inner_psi: empty negative batch");
  const double h_pos = pooled_score(data.positives.at(i), w, scorer, pooling);
  const Vector g_pos = pooled_score_grad(data.positives[i], w, scorer, pooling);
  std::vector<double> h_neg;
  std::vector<Vector> g_neg;
  for (BlockId j : negatives) {
    h_neg.push_back(pooled_score(data.negatives.at(j), w, scorer, pooling));
    g_neg.push_back(pooled_score_grad(data.negatives[j], w, scorer, pooling));
  }
  PsiParts p = psi_from_scores(h_pos, g_pos, h_neg, g_neg, s, spec, true);
  return {p.value, std::move(p.d_w), p.d_s};
}

std::size_t restricted_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

double exact_tpauc_surrogate(const std::vector<double>& scores_pos,
                             const std::vector<double>& scores_neg,
                             const SurrogateLossSpec& spec) {
  const std::size_t k1 = restricted_count(scores_pos.size(), spec.alpha);
  const std::size_t k2 = restricted_count(scores_neg.size(), spec.beta);
  if (k1 == 0 || k2 == 0) throw InvalidConfig("empty restriction: floor(n alpha) or floor(n beta) is 0");
  const std::vector<std::size_t> pos = order_by(scores_pos, false);
  const std::vector<std::size_t> neg = order_by(scores_neg, true);
  double total = 0.0;
  for (std::size_t a = 0; a < k1; ++a) {
    for (std::size_t b = 0; b < k2; ++b) {
      total += squared_hinge(scores_neg[neg[b]] - scores_pos[pos[a]], spec.margin);
    }
  }
  return total / static_cast<double>(k1 * k2);
}

std::pair<std::vector<double>, std::vector<double>> dataset_scores(const TpaucDataset& data,
                                                                   const Vector& w,
                                                                   const Scorer& scorer,
                                                                   const PoolingSpec& pooling) {
  std::vector<double> pos;
  std::vector<double> neg;
  for (const Bag& bag : data.positives) pos.push_back(pooled_score(bag, w, scorer, pooling));
  for (const Bag& bag : data.negatives) neg.push_back(pooled_score(bag, w, scorer, pooling));
  return {pos, neg};
}

double exact_tpauc_surrogate(const Vector& w, const TpaucDataset& data, const Scorer& scorer,
                             const PoolingSpec& pooling, const SurrogateLossSpec& spec) {
  const auto [pos, neg] = dataset_scores(data, w, scorer, pooling);
  return exact_tpauc_surrogate(pos, neg, spec);
}

Vector exact_tpauc_surrogate_subgradient(const Vector& w, const TpaucDataset& data,
                                         const Scorer& scorer, const PoolingSpec& pooling,
                                         const SurrogateLossSpec& spec) {
  const auto [h_pos, h_neg] = dataset_scores(data, w, scorer, pooling);
  const std::size_t k1 = restricted_count(h_pos.size(), spec.alpha);
  const std::size_t k2 = restricted_count(h_neg.size(), spec.beta);
  if (k1 == 0 || k2 == 0) throw InvalidConfig("empty restriction: floor(n alpha) or floor(n beta) is 0");
  const std::vector<std::size_t> pos = order_by(h_pos, false);
  const std::vector<std::size_t> neg = order_by(h_neg, true);
  std::vector<Vector> g_pos(k1);
  std::vector<Vector> g_neg(k2);
  for (std::size_t a = 0; a < k1; ++a) g_pos[a] = pooled_score_grad(data.positives[pos[a]], w, scorer, pooling);
  for (std::size_t b = 0; b < k2; ++b) g_neg[b] = pooled_score_grad(data.negatives[neg[b]], w, scorer, pooling);
  Vector G = Vector::Zero(w.size());
  for (std::size_t a = 0; a < k1; ++a) {
    for (std::size_t b = 0; b < k2; ++b) {
      const double d = squared_hinge_derivative(h_neg[neg[b]] - h_pos[pos[a]], spec.margin);
      if (d != 0.0) G += d * (g_neg[b] - g_pos[a]);
    }
  }
  return G / static_cast<double>(k1 * k2);
}

double tpauc_cvar_objective(const std::vector<double>& scores_pos,
                            const std::vector<double>& scores_neg, const Vector& s,
                            double s_prime, const SurrogateLossSpec& spec) {
  if (static_cast<std::size_t>(s.size()) != scores_pos.size()) {
    throw ContractViolation("tpauc_cvar_objective: s must have one entry per positive");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < scores_pos.size(); ++i) {
    total += outer_f(inner_psi(scores_pos[i], scores_neg, s[static_cast<Eigen::Index>(i)], spec),
                     s_prime, spec.alpha);
  }
  return total / static_cast<double>(scores_pos.size());
}

double tpauc_metric(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg,
                    double alpha, double beta) {
  const std::size_t k1 = restricted_count(scores_pos.size(), alpha);
  const std::size_t k2 = restricted_count(scores_neg.size(), beta);
  if (k1 == 0 || k2 == 0) throw MetricUndefined("TPAUC restriction selects no pairs");
  const std::vector<std::size_t> pos = order_by(scores_pos, false);
  const std::vector<std::size_t> neg = order_by(scores_neg, true);
  double correct = 0.0;
  for (std::size_t a = 0; a < k1; ++a) {
    for (std::size_t b = 0; b < k2; ++b) {
      const double p = scores_pos[pos[a]];
      const double q = scores_neg[neg[b]];
      if (p > q) correct += 1.0;
      else if (p == q) correct += 0.5;
    }
  }
  return correct / static_cast<double>(k1 * k2);
}

double psi_weak_convexity(double rho_loss, double C_h, double beta) {
  return 4.0 * rho_loss * C_h * C_h / beta;
}

void validate_tpauc(const TpaucConfig& c, const TpaucDataset& data) {
  data.validate();
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidConfig(what);
  };
  const auto valid_tau = [](double t) { return t > 0.0 && t <= 1.0; };
  require(std::isfinite(c.eta) && c.eta >= 0.0, "eta must be a finite non-negative number");
  require(!c.eta1 || (std::isfinite(*c.eta1) && *c.eta1 >= 0.0), "eta1 must be >= 0");
  require(!c.eta2 || (std::isfinite(*c.eta2) && *c.eta2 >= 0.0), "eta2 must be >= 0");
  require(valid_tau(c.tau) && valid_tau(c.tau1) && valid_tau(c.tau2), "tau values must lie in (0, 1]");
  for (const auto* g : {&c.gamma, &c.gamma1, &c.gamma2, &c.gamma3}) {
    require(!*g || (std::isfinite(**g) && **g >= 0.0), "gamma values must be >= 0");
  }
  require(c.B1 >= 1 && c.B1 <= data.n_plus(), "B1 must lie in [1, n+]");
  require(c.B2 >= 1 && c.B2 <= data.n_minus(), "B2 must lie in [1, n-]");
  require(c.B3 >= 1, "B3 must be positive");
  require(c.loss.alpha > 0.0 && c.loss.alpha <= 1.0, "alpha must lie in (0, 1]");
  require(c.loss.beta > 0.0 && c.loss.beta <= 1.0, "beta must lie in (0, 1]");
  require(c.loss.margin > 0.0, "margin must be positive");
  require(c.projection_radius > 0.0, "projection radius must be positive");
  require(c.trace_every >= 1, "trace_every must be positive");
  require(c.divergence_factor > 1.0, "divergence_factor must exceed 1");
  require(c.scorer.input_dim == data.feature_dim(), "scorer input_dim does not match the data");
  require(c.scorer.kind == Scorer::Kind::Linear || c.scorer.hidden >= 1, "mlp scorer needs hidden >= 1");
  if (c.pooling.kind == PoolingSpec::Kind::SmoothedMax) {
    require(c.pooling.tau > 0.0, "smoothed-max pooling needs tau > 0");
    require(c.pooling.offset > 0.0, "smoothed-max pooling needs offset > 0");
  }
  if (c.w0) require(static_cast<std::size_t>(c.w0->size()) == c.scorer.num_params(), "w0 has wrong dimension");
}

double TpaucState::s_before(std::size_t i) const {
  const auto it = s_changed.find(i);
  return it != s_changed.end() ? it->second : s[static_cast<Eigen::Index>(i)];
}

const Vector& TpaucState::v_before(std::size_t key) const {
  const auto it = v_changed.find(key);
  return it != v_changed.end() ? it->second : v.at(key);
}

double tpauc_objective(const TpaucDataset& data, const TpaucConfig& config, const Vector& w,
                       const Vector& s, double s_prime) {
  const auto [pos, neg] = dataset_scores(data, w, config.scorer, config.pooling);
  return tpauc_cvar_objective(pos, neg, s, s_prime, config.loss);
}

Vector tpauc_objective_subgradient(const TpaucDataset& data, const TpaucConfig& config,
                                   const Vector& w, const Vector& s, double s_prime) {
  const std::size_t np = data.n_plus();
  const std::size_t nm = data.n_minus();
  const Eigen::Index d = w.size();
  std::vector<double> h_neg(nm);
  std::vector<Vector> g_neg(nm);
  for (std::size_t j = 0; j < nm; ++j) {
    h_neg[j] = pooled_score(data.negatives[j], w, config.scorer, config.pooling);
    g_neg[j] = pooled_score_grad(data.negatives[j], w, config.scorer, config.pooling);
  }
  Vector out = Vector::Zero(d + static_cast<Eigen::Index>(np) + 1);
  for (std::size_t i = 0; i < np; ++i) {
    const double h_pos = pooled_score(data.positives[i], w, config.scorer, config.pooling);
    const Vector g_pos = pooled_score_grad(data.positives[i], w, config.scorer, config.pooling);
    const auto ii = static_cast<Eigen::Index>(i);
    const PsiParts p = psi_from_scores(h_pos, g_pos, h_neg, g_neg, s[ii], config.loss, true);
    const double df = outer_f_dg(p.value, s_prime, config.loss.alpha);
    out.head(d) += df * p.d_w;
    out[d + ii] = df * p.d_s;
    out[d + static_cast<Eigen::Index>(np)] += outer_f_ds_prime(p.value, s_prime, config.loss.alpha);
  }
  return out / static_cast<double>(np);
}

TpaucState tpauc_init(const TpaucDataset& data, const TpaucConfig& config, bool mil) {
  validate_tpauc(config, data);
  const std::size_t np = data.n_plus();
  const std::size_t nm = data.n_minus();
  TpaucState state;
  state.w = config.w0 ? *config.w0 : config.scorer.initial_params(config.seed);
  state.w_prev = state.w;
  state.reference_norm = std::max(state.w.norm(), 1.0);
  state.s = Vector::Zero(static_cast<Eigen::Index>(np));
  state.s_prime = 0.0;
  state.u = BlockEstimatorState(np, 1);

  std::vector<double> score(np + nm);
  if (mil) {
    state.v = BlockEstimatorState(np + nm, 1);
    for (std::size_t key = 0; key < np + nm; ++key) {
      const Bag& bag = example(data, key);
      const std::vector<std::size_t> rows = draw(config.seed, kInitIteration, Purpose::InnerBatch,
                                                 key, static_cast<std::size_t>(bag.rows()), config.B3);
      const double v = std::clamp(tracked_value(bag, state.w, config.scorer, config.pooling, rows),
                                  -config.projection_radius, config.projection_radius);
      state.v.set(key, Vector::Constant(1, v));
      score[key] = tracked_to_score(config.pooling, v);
    }
  } else {
    for (std::size_t key = 0; key < np + nm; ++key) {
      score[key] = pooled_score(example(data, key), state.w, config.scorer, config.pooling);
    }
  }
  for (std::size_t i = 0; i < np; ++i) {
    const std::vector<std::size_t> js =
        draw(config.seed, kInitIteration, Purpose::MiddleBatch, i, nm, config.B2);
    std::vector<double> h_neg;
    for (std::size_t j : js) h_neg.push_back(score[np + j]);
    const double psi = psi_from_scores(score[i], Vector(), h_neg, {}, 0.0, config.loss, false).value;
    state.u.set(i, Vector::Constant(1, psi));
  }
  return state;
}

void tpauc_sonx_step(const TpaucDataset& data, TpaucState& state, const TpaucConfig& config) {
  const std::size_t np = data.n_plus();
  const std::size_t nm = data.n_minus();
  const std::uint64_t t = state.iteration;
  const std::vector<BlockId> B1 = draw(config.seed, t, Purpose::OuterBatch, 0, np, config.B1);
  const std::vector<BlockId> B2 = draw(config.seed, t, Purpose::MiddleBatch, 0, nm, config.B2);
  const double gamma = gamma_or_default(config.gamma, np, config.B1, config.tau);
  const bool corrected = gamma != 0.0;

  const auto scores_at = [&](const Vector& w, bool grads, std::vector<double>& h_neg,
                             std::vector<Vector>& g_neg) {
    for (BlockId j : B2) {
      h_neg.push_back(pooled_score(data.negatives[j], w, config.scorer, config.pooling));
      if (grads) g_neg.push_back(pooled_score_grad(data.negatives[j], w, config.scorer, config.pooling));
    }
  };
  std::vector<double> h_neg;
  std::vector<Vector> g_neg;
  scores_at(state.w, true, h_neg, g_neg);
  std::vector<double> h_neg_prev;
  std::vector<Vector> unused;
  if (corrected) scores_at(state.w_prev, false, h_neg_prev, unused);

  std::vector<PsiParts> parts;
  BatchValues psi_curr;
  BatchValues psi_prev;
  for (BlockId i : B1) {
    const double h_pos = pooled_score(data.positives[i], state.w, config.scorer, config.pooling);
    const Vector g_pos = pooled_score_grad(data.positives[i], state.w, config.scorer, config.pooling);
    const double s_i = state.s[static_cast<Eigen::Index>(i)];
    parts.push_back(psi_from_scores(h_pos, g_pos, h_neg, g_neg, s_i, config.loss, true));
    psi_curr.push_back(Vector::Constant(1, parts.back().value));
    if (corrected) {
      const double h_prev = pooled_score(data.positives[i], state.w_prev, config.scorer, config.pooling);
      psi_prev.push_back(Vector::Constant(
          1, psi_from_scores(h_prev, Vector(), h_neg_prev, {}, state.s_before(i), config.loss, false).value));
    } else {
      psi_prev.push_back(psi_curr.back());
    }
  }

  std::vector<double> u_pre;
  for (BlockId i : B1) u_pre.push_back(state.u.at(i)[0]);
  msvr_update(state.u, B1, psi_curr, psi_prev, config.tau, gamma);

  const double inv_b1 = 1.0 / static_cast<double>(B1.size());
  const double s_scale = config.scale_s_by_batch ? inv_b1 : 1.0;
  const double eta1 = eta_or(config.eta1, config.eta);
  const double eta2 = eta_or(config.eta2, config.eta);
  Vector G = Vector::Zero(state.w.size());
  Vector s_next = state.s;
  double ds_prime = 0.0;
  for (std::size_t a = 0; a < B1.size(); ++a) {
    const double u_read =
        config.gradient_order == ReadOrder::PreUpdate ? u_pre[a] : state.u.at(B1[a])[0];
    const double df = outer_f_dg(u_read, state.s_prime, config.loss.alpha);
    const auto ii = static_cast<Eigen::Index>(B1[a]);
    s_next[ii] = state.s[ii] - eta1 * s_scale * parts[a].d_s * df;
    ds_prime += outer_f_ds_prime(u_read, state.s_prime, config.loss.alpha);
    G += df * parts[a].d_w;
  }
  G *= inv_b1;
  const double s_prime_next = state.s_prime - eta2 * inv_b1 * ds_prime;

  guarded_step(state, G, config, [&] {
    state.s_changed.clear();
    for (BlockId i : B1) state.s_changed.emplace(i, state.s[static_cast<Eigen::Index>(i)]);
    state.s = std::move(s_next);
    state.s_prime = s_prime_next;
  });
}

void tpauc_sont_step(const TpaucDataset& data, TpaucState& state, const TpaucConfig& config) {
  const std::size_t np = data.n_plus();
  const std::size_t nm = data.n_minus();
  const std::uint64_t t = state.iteration;
  const std::vector<BlockId> B1 = draw(config.seed, t, Purpose::OuterBatch, 0, np, config.B1);
  const std::vector<BlockId> B2 = draw(config.seed, t, Purpose::MiddleBatch, 0, nm, config.B2);
  const double gamma1 = gamma_or_default(config.gamma1, np, config.B1, config.tau1);
  const double gamma2 = gamma_or_default(config.gamma2, nm, config.B2, config.tau1);
  const double gamma3 = gamma_or_default(config.gamma3, np, config.B1, config.tau2);
  const PoolingSpec& pool = config.pooling;
  const bool smx = pool.kind == PoolingSpec::Kind::SmoothedMax;

  // Tracked-value evaluations for every example touched this step.
  std::vector<std::size_t> keys;
  for (BlockId i : B1) keys.push_back(i);
  for (BlockId j : B2) keys.push_back(np + j);
  std::unordered_map<std::size_t, Vector> grad;
  BatchValues h_pos_curr, h_pos_prev, h_neg_curr, h_neg_prev;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const std::size_t key = keys[k];
    const Bag& bag = example(data, key);
    const std::vector<std::size_t> rows =
        draw(config.seed, t, Purpose::InnerBatch, key, static_cast<std::size_t>(bag.rows()), config.B3);
    const bool positive = key < np;
    const double gam = positive ? gamma1 : gamma2;
    Vector curr = Vector::Constant(1, tracked_value(bag, state.w, config.scorer, pool, rows));
    Vector prev = gam != 0.0
                      ? Vector::Constant(1, tracked_value(bag, state.w_prev, config.scorer, pool, rows))
                      : curr;
    grad.emplace(key, tracked_grad(bag, state.w, config.scorer, pool, rows));
    (positive ? h_pos_curr : h_neg_curr).push_back(std::move(curr));
    (positive ? h_pos_prev : h_neg_prev).push_back(std::move(prev));
  }

  // Snapshots v_t and v_{t-1} before the update.
  std::unordered_map<std::size_t, double> v_t;
  std::unordered_map<std::size_t, double> v_tm1;
  std::unordered_map<std::size_t, Vector> changed;
  for (std::size_t key : keys) {
    v_t[key] = state.v.at(key)[0];
    v_tm1[key] = state.v_before(key)[0];
    changed.emplace(key, state.v.at(key));
  }
  std::vector<BlockId> neg_keys;
  for (BlockId j : B2) neg_keys.push_back(np + j);
  if (smx) {
    msvr_update(state.v, B1, h_pos_curr, h_pos_prev, config.tau1, gamma1);
    msvr_update(state.v, neg_keys, h_neg_curr, h_neg_prev, config.tau1, gamma2);
    const double hi = config.projection_radius;
    for (std::size_t key : keys) {
      state.v.set(key, Vector::Constant(1, std::clamp(state.v.at(key)[0], pool.offset, std::max(hi, pool.offset))));
    }
  } else {
    msvr_update_projected(state.v, B1, h_pos_curr, h_pos_prev, config.tau1, gamma1,
                          config.projection_radius);
    msvr_update_projected(state.v, neg_keys, h_neg_curr, h_neg_prev, config.tau1, gamma2,
                          config.projection_radius);
  }

  const auto read = [&](std::size_t key) {
    return config.tracked_read == ReadOrder::PreUpdate ? v_t[key] : state.v.at(key)[0];
  };
  const auto read_prev = [&](std::size_t key) {
    return config.tracked_read == ReadOrder::PreUpdate ? v_tm1[key] : v_t[key];
  };

  const double inv_b2 = 1.0 / static_cast<double>(B2.size());
  PairBatchValues g_curr(B1.size(), BatchValues(B2.size()));
  PairBatchValues g_prev;
  if (gamma3 != 0.0) g_prev.assign(B1.size(), BatchValues(B2.size()));
  std::vector<Vector> d_w(B1.size());
  std::vector<double> d_s(B1.size(), 0.0);
  for (std::size_t a = 0; a < B1.size(); ++a) {
    const std::size_t i = B1[a];
    const double vi = read(i);
    const double hi = tracked_to_score(pool, vi);
    const double s_i = state.s[static_cast<Eigen::Index>(i)];
    d_w[a] = Vector::Zero(state.w.size());
    for (std::size_t b = 0; b < B2.size(); ++b) {
      const std::size_t j = np + B2[b];
      const double vj = read(j);
      const PairTerm pt = pair_term(tracked_to_score(pool, vj), hi, s_i, config.loss);
      g_curr[a][b] = Vector::Constant(1, pt.value);
      if (gamma3 != 0.0) {
        const PairTerm pp = pair_term(tracked_to_score(pool, read_prev(j)),
                                      tracked_to_score(pool, read_prev(i)), state.s_before(i),
                                      config.loss);
        g_prev[a][b] = Vector::Constant(1, pp.value);
      }
      d_s[a] += pt.d_s;
      if (smx) {
        d_w[a] += (pt.d_diff * tracked_to_score_derivative(pool, vj)) * grad.at(j) -
                  (pt.d_diff * tracked_to_score_derivative(pool, vi)) * grad.at(i);
      } else {
        d_w[a] += pt.d_diff * (grad.at(j) - grad.at(i));
      }
    }
    d_s[a] *= inv_b2;
    d_w[a] *= inv_b2;
  }

  std::vector<double> u_pre;
  for (BlockId i : B1) u_pre.push_back(state.u.at(i)[0]);
  tcco_u_update(state.u, B1, B2, g_curr, g_prev, config.tau2, gamma3);

  const double inv_b1 = 1.0 / static_cast<double>(B1.size());
  const double s_scale = config.scale_s_by_batch ? inv_b1 : 1.0;
  const double eta1 = eta_or(config.eta1, config.eta);
  const double eta2 = eta_or(config.eta2, config.eta);
  Vector G = Vector::Zero(state.w.size());
  Vector s_next = state.s;
  double ds_prime = 0.0;
  for (std::size_t a = 0; a < B1.size(); ++a) {
    const double u_read =
        config.gradient_order == ReadOrder::PreUpdate ? u_pre[a] : state.u.at(B1[a])[0];
    const double df = outer_f_dg(u_read, state.s_prime, config.loss.alpha);
    const auto ii = static_cast<Eigen::Index>(B1[a]);
    s_next[ii] = state.s[ii] - eta1 * s_scale * d_s[a] * df;
    ds_prime += outer_f_ds_prime(u_read, state.s_prime, config.loss.alpha);
    G += df * d_w[a];
  }
  G *= inv_b1;
  const double s_prime_next = state.s_prime - eta2 * inv_b1 * ds_prime;

  guarded_step(state, G, config, [&] {
    state.s_changed.clear();
    for (BlockId i : B1) state.s_changed.emplace(i, state.s[static_cast<Eigen::Index>(i)]);
    state.s = std::move(s_next);
    state.s_prime = s_prime_next;
    state.v_changed = std::move(changed);
  });
}

namespace {

template <class Step>
TpaucRun tpauc_run(const TpaucDataset& data, const TpaucConfig& config, bool mil, Step step,
                   const TpaucCallback& callback) {
  const auto start = std::chrono::steady_clock::now();
  TpaucRun run{tpauc_init(data, config, mil), RunTrace{}, std::nullopt};
  run.trace.trace_every = config.trace_every;
  SolverConfig& snap = run.trace.config;
  snap.eta = config.eta;
  snap.tau = config.tau;
  snap.tau1 = config.tau1;
  snap.tau2 = config.tau2;
  snap.B1 = config.B1;
  snap.B2 = config.B2;
  snap.B3 = config.B3;
  snap.T = config.T;
  snap.seed = config.seed;
  snap.trace_every = config.trace_every;
  for (std::size_t t = 0; t < config.T; ++t) {
    try {
      step(data, run.state, config);
    } catch (const RunAborted& e) {
      run.aborted = e;
      break;
    }
    if (run.state.iteration % config.trace_every != 0) continue;
    TraceRow row;
    row.iter = run.state.iteration;
    row.step_norm = (run.state.w - run.state.w_prev).norm();
    row.objective = tpauc_objective(data, config, run.state.w, run.state.s, run.state.s_prime);
    if (callback) callback(run.state, row);
    run.trace.rows.push_back(row);
  }
  run.trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

}  // namespace

TpaucRun tpauc_sonx_run(const TpaucDataset& data, const TpaucConfig& config,
                        const TpaucCallback& callback) {
  return tpauc_run(data, config, false, tpauc_sonx_step, callback);
}

TpaucRun tpauc_sont_run(const TpaucDataset& data, const TpaucConfig& config,
                        const TpaucCallback& callback) {
  return tpauc_run(data, config, true, tpauc_sont_step, callback);
}

Vector tpauc_full_batch_baseline(const TpaucDataset& data, const TpaucConfig& config,
                                 std::size_t iterations, double eta) {
  validate_tpauc(config, data);
  Vector w = config.w0 ? *config.w0 : config.scorer.initial_params(config.seed);
  Vector best = w;
  double best_value = exact_tpauc_surrogate(w, data, config.scorer, config.pooling, config.loss);
  for (std::size_t k = 0; k < iterations; ++k) {
    w -= eta * exact_tpauc_surrogate_subgradient(w, data, config.scorer, config.pooling, config.loss);
    const double value = exact_tpauc_surrogate(w, data, config.scorer, config.pooling, config.loss);
    if (value < best_value) {
      best_value = value;
      best = w;
    }
  }
  return best;
}

}  // namespace fcco
