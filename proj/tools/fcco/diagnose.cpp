#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "commands.hpp"
#include "config_json.hpp"
#include "fcco/data.hpp"
#include "fcco/diagnostics.hpp"
#include "fcco/solvers.hpp"
#include "output.hpp"
#include "params.hpp"

namespace fcco::cli {

namespace {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string note;
};

// The problem under diagnosis, seen through its full-data objective.
struct Target {
  std::unique_ptr<FccoProblem> fcco;
  std::unique_ptr<TccoProblem> tcco;

  std::size_t dim() const { return fcco ? fcco->dim() : tcco->dim(); }
  Vector initial_point() const { return fcco ? fcco->initial_point() : tcco->initial_point(); }
  Objective objective() const { return fcco ? fcco_objective(*fcco) : tcco_objective(*tcco); }
  double weak_convexity() const {
    if (fcco) return fcco_weak_convexity(fcco->constants(), fcco->inner_dim());
    return tcco_weak_convexity(tcco->constants(), tcco->middle_dim(), tcco->inner_dim());
  }
};

Target load_target(const ProblemSource& source) {
  Target t;
  if (source.synthetic) {
    switch (source.synthetic->kind) {
      case SyntheticKind::Tcco:
        t.tcco = std::move(load_tcco(source).tcco);
        return t;
      case SyntheticKind::MilTpauc:
        throw InvalidConfig("diagnose supports FCCO and TCCO problems");
      default:
        t.fcco = std::move(load_fcco(source).fcco);
        return t;
    }
  }
  if (source.format != "grouped") throw InvalidConfig("diagnose supports grouped datasets only");
  t.fcco = std::move(load_fcco(source).fcco);
  return t;
}

Vector load_checkpoint(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("w") || !j["w"].is_array()) {
    throw SchemaError("checkpoint '" + path + "' has no array 'w'");
  }
  const Json& w = j["w"];
  if (w.size() != dim) {
    throw SchemaError("checkpoint '" + path + "' has dimension " + std::to_string(w.size()) +
                      ", problem has " + std::to_string(dim));
  }
  Vector out(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < dim; ++k) {
    if (!w[k].is_number()) throw SchemaError("checkpoint '" + path + "' has a non-numeric entry");
    out[static_cast<Eigen::Index>(k)] = w[k].get<double>();
  }
  return out;
}

double relative_gap(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Batch oracles at full batches and exact estimators agree with the exact
// subgradient, and single-sample inner values average to the full-batch value.
CheckResult oracle_check(const Target& t, const Vector& x, Section s) {
  const std::size_t points = s.count("points").value_or(5);
  const double tol = s.number("tolerance").value_or(1e-8);
  const double radius = s.number("radius").value_or(1.0);
  const std::uint64_t seed = s.seed("seed").value_or(0);
  s.finish();
  CounterRng rng = stream(seed, 0, Purpose::Probe, 1);
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    Vector w = x;
    if (p > 0) {
      for (Eigen::Index k = 0; k < w.size(); ++k) w[k] += radius * (2.0 * rng.uniform() - 1.0);
    }
    if (t.fcco) {
      const FccoProblem& pr = *t.fcco;
      BlockEstimatorState u(pr.num_blocks(), pr.inner_dim());
      const std::vector<Vector> exact = exact_inner_values(pr, w);
      std::vector<std::vector<std::size_t>> inner;
      for (BlockId i = 0; i < pr.num_blocks(); ++i) {
        u.set(i, exact[i]);
        inner.push_back(full_batch(pr.num_samples(i)));
        Vector mean = Vector::Zero(static_cast<Eigen::Index>(pr.inner_dim()));
        for (std::size_t k = 0; k < pr.num_samples(i); ++k) {
          const std::vector<std::size_t> one{k};
          mean += pr.inner_value(i, w, one);
        }
        mean /= static_cast<double>(pr.num_samples(i));
        worst = std::max(worst, relative_gap(mean, exact[i]));
      }
      const std::vector<BlockId> all = full_batch(pr.num_blocks());
      worst = std::max(worst, relative_gap(sonx_gradient(pr, w, u, all, inner),
                                           full_fcco_subgradient(pr, w)));
    } else {
      const TccoProblem& pr = *t.tcco;
      const std::size_t n1 = pr.num_outer();
      const std::size_t n2 = pr.num_middle();
      const std::vector<Vector> h = exact_innermost_values(pr, w);
      const std::vector<Vector> means = exact_middle_means(pr, w);
      BlockEstimatorState u(n1, pr.middle_dim());
      TccoBatches batches;
      batches.outer = full_batch(n1);
      batches.middle = full_batch(n2);
      std::vector<std::vector<Vector>> v_read(n1);
      for (BlockId i = 0; i < n1; ++i) {
        u.set(i, means[i]);
        batches.inner.emplace_back();
        for (BlockId j = 0; j < n2; ++j) {
          batches.inner[i].push_back(full_batch(pr.num_samples(i, j)));
          v_read[i].push_back(h[i * n2 + j]);
        }
      }
      worst = std::max(worst, relative_gap(sont_gradient(pr, w, u, v_read, batches),
                                           full_tcco_subgradient(pr, w)));
    }
  }
  return {"oracle", worst <= tol, worst, tol, std::to_string(points) + " points"};
}

CheckResult probe_check(const Target& t, const Vector& x, Section s) {
  const double rho = s.number("rho").value_or(t.weak_convexity());
  const std::size_t trials = s.count("trials").value_or(1000);
  const double radius = s.number("radius").value_or(1.0);
  const double tol = s.number("tolerance").value_or(1e-9);
  const std::uint64_t seed = s.seed("seed").value_or(0);
  s.finish();
  if (!std::isfinite(rho)) throw InvalidConfig("probe rho must be finite");
  CounterRng rng = stream(seed, 0, Purpose::Probe, 0);
  const Objective obj = t.objective();
  const ProbeReport r = weak_convexity_probe(obj.value, rho, trials, rng, x, radius, tol);
  return {"weak-convexity probe", r.violations == 0, r.worst_excess, tol,
          std::to_string(r.violations) + "/" + std::to_string(trials) + " violations at rho " +
              format_double(rho)};
}

CheckResult moreau_check(const Target& t, const Vector& x, Section s) {
  const std::optional<double> max_grad = s.number("max_grad");
  const MoreauConfig cfg = t.fcco ? fcco_moreau(s, *t.fcco) : tcco_moreau(s, *t.tcco);
  s.finish();
  const MoreauReport r = moreau_grad_norm(t.objective(), x, cfg);
  CheckResult c{"moreau gradient", r.descent_ok, r.grad_norm, max_grad.value_or(kUnbounded),
                "rho_bar " + format_double(cfg.rho_bar)};
  if (max_grad) c.passed = c.passed && r.grad_norm <= *max_grad;
  if (!r.descent_ok) c.note += ", prox point not below f(x) + gap bound";
  return c;
}

CheckResult finite_difference(const Target& t, const Vector& x, Section s) {
  const double step = s.number("step").value_or(1e-6);
  const double tol = s.number("tolerance").value_or(1e-4);
  s.finish();
  const Objective obj = t.objective();
  const FiniteDifferenceReport r = finite_difference_check(obj.value, obj.subgradient, x, step);
  // A mismatch on a coordinate where the one-sided slopes disagree is a kink,
  // where any element of the subdifferential is acceptable.
  const bool kinked = std::find(r.kinked.begin(), r.kinked.end(), r.worst_coordinate) != r.kinked.end();
  CheckResult c{"finite difference", r.max_rel_error <= tol || kinked, r.max_rel_error, tol, ""};
  c.note = std::to_string(r.kinked.size()) + " kinked coordinates";
  return c;
}

void print_table(const std::vector<CheckResult>& results) {
  std::printf("%-22s %-6s %-14s %-14s %s\n", "check", "status", "value", "threshold", "note");
  for (const CheckResult& r : results) {
    std::printf("%-22s %-6s %-14.6g %-14.6g %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                r.value, r.threshold, r.note.c_str());
  }
}

}  // namespace

int cmd_diagnose(const Options& options) {
  return guarded("diagnose", [&] {
    const Json input = read_config_file(options.config_path);
    Section top(input, "config");
    const ProblemSource source = parse_problem(top.child("problem"));
    const std::optional<std::string> checkpoint = top.text("checkpoint");
    const std::optional<Vector> point = top.vector("point");
    if (checkpoint && point) throw InvalidConfig("give either checkpoint or point, not both");
    std::vector<std::string> suite{"oracle", "probe", "moreau", "finite-difference"};
    if (top.has("suite")) {
      const Json& raw = top.raw("suite");
      if (!raw.is_array()) throw InvalidConfig("config.suite must be a list");
      suite.clear();
      for (const Json& item : raw) {
        if (!item.is_string()) throw InvalidConfig("config.suite entries must be strings");
        suite.push_back(item.get<std::string>());
      }
    }
    for (const std::string& name : suite) {
      if (name != "oracle" && name != "probe" && name != "moreau" && name != "finite-difference") {
        throw InvalidConfig("unknown diagnostic '" + name + "'");
      }
    }
    Section oracle = top.child("oracle");
    Section probe = top.child("probe");
    Section moreau = top.child("moreau");
    Section fd = top.child("finite_difference");
    const std::optional<std::string> output = top.text("output");
    top.finish();

    const Target target = load_target(source);
    Vector x = target.initial_point();
    if (checkpoint) x = load_checkpoint(*checkpoint, target.dim());
    if (point) {
      if (static_cast<std::size_t>(point->size()) != target.dim()) {
        throw InvalidConfig("config.point has the wrong dimension");
      }
      x = *point;
    }

    std::vector<CheckResult> results;
    for (const std::string& name : suite) {
      if (name == "oracle") results.push_back(oracle_check(target, x, oracle));
      if (name == "probe") results.push_back(probe_check(target, x, probe));
      if (name == "moreau") results.push_back(moreau_check(target, x, moreau));
      if (name == "finite-difference") results.push_back(finite_difference(target, x, fd));
    }
    if (!options.quiet) print_table(results);

    const std::optional<std::string> out = options.out ? options.out : output;
    if (out) {
      std::filesystem::create_directories(*out);
      Json report = Json::array();
      for (const CheckResult& r : results) {
        report.push_back({{"check", r.name},
                          {"passed", r.passed},
                          {"value", r.value},
                          {"threshold", std::isfinite(r.threshold) ? Json(r.threshold) : Json()},
                          {"note", r.note}});
      }
      write_json_atomic(std::filesystem::path(*out) / "diagnose.json",
                        {{"point", vector_json(x)}, {"checks", report}});
    }
    const bool ok = std::all_of(results.begin(), results.end(),
                                [](const CheckResult& r) { return r.passed; });
    return ok ? kOk : kDiagnosticFailed;
  });
}

}  // namespace fcco::cli
