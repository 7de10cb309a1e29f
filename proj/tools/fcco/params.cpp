#include "params.hpp"

#include <algorithm>
#include <cmath>

#include "output.hpp"

namespace fcco::cli {

namespace {

std::size_t clip(std::size_t population, std::size_t preferred) {
  return std::max<std::size_t>(1, std::min(population, preferred));
}

std::string order_name(ReadOrder order) { return order == ReadOrder::PreUpdate ? "pre" : "post"; }

void common(Section& p, SolverConfig& c) {
  c.T = p.count("T").value_or(1000);
  c.gradient_order = parse_order(p.text("gradient_order").value_or("pre"));
  c.divergence_factor = p.number("divergence_factor").value_or(c.divergence_factor);
  c.w0 = p.vector("w0");
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

}  // namespace

ReadOrder parse_order(const std::string& name) {
  if (name == "pre") return ReadOrder::PreUpdate;
  if (name == "post") return ReadOrder::PostUpdate;
  throw InvalidConfig("read order must be 'pre' or 'post', got '" + name + "'");
}

SolverConfig fcco_params(Section p, const FccoProblem& problem, bool moving_average) {
  SolverConfig c;
  const double epsilon = p.number("epsilon").value_or(0.1);
  c.epsilon_target = epsilon;
  const std::size_t n = problem.num_blocks();
  c.B1 = p.count("B1").value_or(clip(n, 4));
  c.B2 = p.count("B2").value_or(clip(problem.num_samples(0), 4));
  if (c.B1 == 0 || c.B2 == 0) throw InvalidConfig("batch sizes must be positive");
  const FccoSchedule s = moving_average ? theorem_schedule_fcco_ma(epsilon, n, c.B1, c.B2)
                                        : theorem_schedule_fcco(epsilon, n, c.B1, c.B2);
  c.eta = p.number("eta").value_or(s.eta);
  c.tau = p.number("tau").value_or(s.tau);
  c.gamma = p.number("gamma");
  if (moving_average && c.gamma && *c.gamma != 0.0) {
    throw InvalidConfig("moving-average solvers take no gamma");
  }
  common(p, c);
  p.finish();
  return c;
}

SolverConfig tcco_params(Section p, const TccoProblem& problem, bool moving_average) {
  SolverConfig c;
  const double epsilon = p.number("epsilon").value_or(0.1);
  c.epsilon_target = epsilon;
  const std::size_t n1 = problem.num_outer();
  const std::size_t n2 = problem.num_middle();
  c.B1 = p.count("B1").value_or(clip(n1, 4));
  c.B2 = p.count("B2").value_or(clip(n2, 4));
  c.B3 = p.count("B3").value_or(clip(problem.num_samples(0, 0), 4));
  if (c.B1 == 0 || c.B2 == 0 || c.B3 == 0) throw InvalidConfig("batch sizes must be positive");
  if (c.B1 > n1 || c.B2 > n2) throw InvalidConfig("batch sizes exceed the block counts");
  const TccoSchedule s = moving_average ? theorem_schedule_tcco_ma(epsilon, n1, n2, c.B1, c.B2, c.B3)
                                        : theorem_schedule_tcco(epsilon, n1, n2, c.B1, c.B2, c.B3);
  c.eta = p.number("eta").value_or(s.eta);
  c.tau1 = p.number("tau1").value_or(s.tau1);
  c.tau2 = p.number("tau2").value_or(s.tau2);
  c.gamma1 = p.number("gamma1");
  c.gamma2 = p.number("gamma2");
  if (moving_average && ((c.gamma1 && *c.gamma1 != 0.0) || (c.gamma2 && *c.gamma2 != 0.0))) {
    throw InvalidConfig("moving-average solvers take no gamma");
  }
  c.projection_radius = p.number("projection_radius").value_or(problem.constants().C_h_tilde);
  c.tracked_read = parse_order(p.text("tracked_read").value_or("pre"));
  c.lazy_pair_init = p.flag("lazy_pair_init").value_or(false);
  common(p, c);
  p.finish();
  return c;
}

TpaucConfig tpauc_params(Section p, Section m, const TpaucDataset& data, bool mil) {
  TpaucConfig c;
  c.loss.alpha = m.number("alpha").value_or(c.loss.alpha);
  c.loss.beta = m.number("beta").value_or(c.loss.beta);
  c.loss.margin = m.number("margin").value_or(c.loss.margin);
  const std::string scorer = m.text("scorer").value_or("linear");
  if (scorer == "linear") {
    c.scorer.kind = Scorer::Kind::Linear;
  } else if (scorer == "mlp") {
    c.scorer.kind = Scorer::Kind::Mlp;
  } else {
    throw InvalidConfig("model.scorer must be linear or mlp");
  }
  c.scorer.input_dim = data.feature_dim();
  c.scorer.hidden = m.count("hidden").value_or(c.scorer.kind == Scorer::Kind::Mlp ? 16 : 0);
  c.scorer.sigmoid_output = m.flag("sigmoid").value_or(false);
  const std::string pooling = m.text("pooling").value_or("mean");
  if (pooling == "mean") {
    c.pooling.kind = PoolingSpec::Kind::Mean;
  } else if (pooling == "smoothed-max") {
    c.pooling.kind = PoolingSpec::Kind::SmoothedMax;
  } else {
    throw InvalidConfig("model.pooling must be mean or smoothed-max");
  }
  c.pooling.tau = m.number("pool_tau").value_or(c.pooling.tau);
  c.pooling.offset = m.number("pool_offset").value_or(
      c.pooling.kind == PoolingSpec::Kind::SmoothedMax ? 1e-8 : 0.0);
  c.scale_s_by_batch = m.flag("scale_s_by_batch").value_or(true);
  m.finish();

  const double epsilon = p.number("epsilon").value_or(0.1);
  const std::size_t np = data.n_plus();
  const std::size_t nm = data.n_minus();
  c.B1 = p.count("B1").value_or(clip(np, 4));
  c.B2 = p.count("B2").value_or(clip(nm, 4));
  c.B3 = p.count("B3").value_or(4);
  if (c.B1 == 0 || c.B2 == 0 || c.B3 == 0) throw InvalidConfig("batch sizes must be positive");
  if (c.B1 > np || c.B2 > nm) throw InvalidConfig("batch sizes exceed the class counts");
  if (mil) {
    const TccoSchedule s = theorem_schedule_tcco(epsilon, np, nm, c.B1, c.B2, c.B3);
    c.eta = p.number("eta").value_or(s.eta);
    c.tau1 = p.number("tau1").value_or(s.tau1);
    c.tau2 = p.number("tau2").value_or(s.tau2);
  } else {
    const FccoSchedule s = theorem_schedule_fcco(epsilon, np, c.B1, c.B2);
    c.eta = p.number("eta").value_or(s.eta);
    c.tau = p.number("tau").value_or(s.tau);
  }
  c.eta1 = p.number("eta1");
  c.eta2 = p.number("eta2");
  c.gamma = p.number("gamma");
  c.gamma1 = p.number("gamma1");
  c.gamma2 = p.number("gamma2");
  c.gamma3 = p.number("gamma3");
  c.projection_radius = p.number("projection_radius").value_or(kUnbounded);
  c.gradient_order = parse_order(p.text("gradient_order").value_or("pre"));
  c.tracked_read = parse_order(p.text("tracked_read").value_or("pre"));
  c.T = p.count("T").value_or(1000);
  c.divergence_factor = p.number("divergence_factor").value_or(c.divergence_factor);
  c.w0 = p.vector("w0");
  p.finish();
  return c;
}

MoreauConfig moreau_settings(Section& s, double rho_bar_formula, double rho_F_formula) {
  MoreauConfig m;
  const auto rho_F = s.number("rho_F");
  const auto rho_bar = s.number("rho_bar");
  m.rho_F = rho_F.value_or(rho_F_formula);
  m.rho_bar = rho_bar.value_or(std::max(rho_bar_formula, 1.0));
  if (!std::isfinite(m.rho_F) || !std::isfinite(m.rho_bar)) {
    throw InvalidConfig("the problem does not certify its constants; set moreau.rho_bar and moreau.rho_F");
  }
  m.inner_iterations = s.count("inner_iterations").value_or(m.inner_iterations);
  m.inner_step = s.number("inner_step").value_or(m.inner_step);
  m.restarts = s.count("restarts").value_or(m.restarts);
  if (!(m.rho_bar > m.rho_F)) throw InvalidConfig("moreau.rho_bar must exceed moreau.rho_F");
  if (m.inner_iterations == 0 || m.restarts == 0 || !(m.inner_step > 0.0)) {
    throw InvalidConfig("moreau inner_iterations, restarts and inner_step must be positive");
  }
  return m;
}

MoreauConfig fcco_moreau(Section& s, const FccoProblem& problem) {
  const FccoConstants c = problem.constants();
  return moreau_settings(s, fcco_envelope_parameter(c, problem.inner_dim()),
                         fcco_weak_convexity(c, problem.inner_dim()));
}

MoreauConfig tcco_moreau(Section& s, const TccoProblem& problem) {
  const TccoConstants c = problem.constants();
  return moreau_settings(s, tcco_envelope_parameter(c, problem.middle_dim(), problem.inner_dim()),
                         tcco_weak_convexity(c, problem.middle_dim(), problem.inner_dim()));
}

Json solver_config_json(const SolverConfig& c) {
  Json j;
  j["eta"] = c.eta;
  j["tau"] = c.tau;
  j["gamma"] = optional_json(c.gamma);
  j["tau1"] = c.tau1;
  j["tau2"] = c.tau2;
  j["gamma1"] = optional_json(c.gamma1);
  j["gamma2"] = optional_json(c.gamma2);
  j["B1"] = c.B1;
  j["B2"] = c.B2;
  j["B3"] = c.B3;
  j["T"] = c.T;
  j["seed"] = c.seed;
  j["projection_radius"] = std::isfinite(c.projection_radius) ? Json(c.projection_radius) : Json("inf");
  j["epsilon"] = optional_json(c.epsilon_target);
  j["gradient_order"] = order_name(c.gradient_order);
  j["tracked_read"] = order_name(c.tracked_read);
  j["lazy_pair_init"] = c.lazy_pair_init;
  j["trace_every"] = c.trace_every;
  j["moreau_every"] = c.moreau_every;
  if (c.moreau_every > 0) {
    j["moreau"] = {{"rho_bar", c.moreau.rho_bar},
                   {"rho_F", c.moreau.rho_F},
                   {"inner_iterations", c.moreau.inner_iterations},
                   {"inner_step", c.moreau.inner_step},
                   {"restarts", c.moreau.restarts}};
  }
  j["divergence_factor"] = c.divergence_factor;
  if (c.w0) j["w0"] = vector_json(*c.w0);
  return j;
}

Json tpauc_config_json(const TpaucConfig& c) {
  Json j;
  j["alpha"] = c.loss.alpha;
  j["beta"] = c.loss.beta;
  j["margin"] = c.loss.margin;
  j["scorer"] = c.scorer.kind == Scorer::Kind::Linear ? "linear" : "mlp";
  j["hidden"] = c.scorer.hidden;
  j["sigmoid"] = c.scorer.sigmoid_output;
  j["pooling"] = c.pooling.kind == PoolingSpec::Kind::Mean ? "mean" : "smoothed-max";
  j["pool_tau"] = c.pooling.tau;
  j["pool_offset"] = c.pooling.offset;
  j["eta"] = c.eta;
  j["eta1"] = optional_json(c.eta1);
  j["eta2"] = optional_json(c.eta2);
  j["tau"] = c.tau;
  j["gamma"] = optional_json(c.gamma);
  j["tau1"] = c.tau1;
  j["gamma1"] = optional_json(c.gamma1);
  j["gamma2"] = optional_json(c.gamma2);
  j["tau2"] = c.tau2;
  j["gamma3"] = optional_json(c.gamma3);
  j["B1"] = c.B1;
  j["B2"] = c.B2;
  j["B3"] = c.B3;
  j["T"] = c.T;
  j["seed"] = c.seed;
  j["projection_radius"] = std::isfinite(c.projection_radius) ? Json(c.projection_radius) : Json("inf");
  j["scale_s_by_batch"] = c.scale_s_by_batch;
  j["gradient_order"] = order_name(c.gradient_order);
  j["tracked_read"] = order_name(c.tracked_read);
  j["trace_every"] = c.trace_every;
  return j;
}

}  // namespace fcco::cli
