#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>

#include "commands.hpp"
#include "config_json.hpp"
#include "fcco/diagnostics.hpp"
#include "fcco/solvers.hpp"
#include "output.hpp"
#include "params.hpp"

namespace fcco::cli {

namespace {

namespace fs = std::filesystem;

struct RunContext {
  Json input;
  Solver solver = Solver::Sonx;
  std::uint64_t seed = 0;
  fs::path out;
  std::size_t checkpoint_every = 0;
  std::size_t trace_every = 1;
  bool exact_objective = true;
  bool estimator_error = false;
  bool quiet = false;
  std::string started;
};

class Checkpointer {
 public:
  Checkpointer(fs::path path, std::size_t every) : path_(std::move(path)), every_(every) {}

  bool due(std::size_t iteration) const { return every_ > 0 && iteration >= last_ + every_; }

  void write(std::size_t iteration, Json state) {
    write_json_atomic(path_, state);
    last_ = iteration;
  }

 private:
  fs::path path_;
  std::size_t every_;
  std::size_t last_ = 0;
};

Json checkpoint_json(const RunContext& ctx, std::size_t iteration, const Vector& w) {
  Json j;
  j["solver"] = solver_name(ctx.solver);
  j["seed"] = ctx.seed;
  j["iteration"] = iteration;
  j["w"] = vector_json(w);
  return j;
}

Json abort_json(const std::optional<RunAborted>& aborted) {
  if (!aborted) return Json();
  Json j;
  j["reason"] = aborted->reason() == RunAborted::Reason::Diverged ? "diverged" : "non-finite";
  j["iteration"] = aborted->iteration();
  j["message"] = aborted->what();
  return j;
}

Json base_summary(const RunContext& ctx, const RunTrace& trace, std::size_t iterations,
                  const std::optional<RunAborted>& aborted) {
  Json s;
  s["solver"] = solver_name(ctx.solver);
  s["status"] = aborted ? "aborted" : "completed";
  s["iterations"] = iterations;
  s["trace_rows"] = trace.rows.size();
  s["seed"] = ctx.seed;
  s["wall_seconds"] = trace.wall_seconds;
  s["git_describe"] = build_describe();
  if (aborted) s["abort"] = abort_json(aborted);
  return s;
}

int finish(const RunContext& ctx, Json summary, const Json& effective,
           const std::optional<RunAborted>& aborted) {
  summary["config"] = {{"input", ctx.input}, {"effective", effective}};
  write_json_atomic(ctx.out / "summary.json", summary);
  Json meta;
  meta["started_utc"] = ctx.started;
  meta["finished_utc"] = utc_now();
  meta["wall_seconds"] = summary["wall_seconds"];
  meta["git_describe"] = build_describe();
  write_json_atomic(ctx.out / "run_meta.json", meta);
  if (!ctx.quiet) {
    std::cout << solver_name(ctx.solver) << ": " << summary["status"].get<std::string>() << " after "
              << summary["iterations"] << " iterations, objective " << summary["final_objective"]
              << ", outputs in " << ctx.out.string() << "\n";
  }
  if (aborted) {
    std::cerr << "fcco run: " << aborted->what() << "\n";
    return kDiverged;
  }
  return kOk;
}

int run_fcco(const RunContext& ctx, const FccoProblem& problem, SolverConfig cfg, Section& moreau) {
  const bool ma = ctx.solver == Solver::SonxMa;
  cfg.seed = ctx.seed;
  cfg.trace_every = ctx.trace_every;
  cfg.trace_exact_objective = ctx.exact_objective;
  cfg.trace_estimator_error = ctx.estimator_error;
  cfg.moreau_every = moreau.count("every").value_or(0);
  if (cfg.moreau_every > 0 || moreau.has("rho_bar")) cfg.moreau = fcco_moreau(moreau, problem);
  moreau.finish();
  validate_fcco(cfg, problem);

  fs::create_directories(ctx.out);
  TraceWriter writer(ctx.out / "trace.csv", cfg.trace_estimator_error, cfg.moreau_every > 0);
  Checkpointer checkpoints(ctx.out / "checkpoint.json", ctx.checkpoint_every);
  const auto callback = [&](const FccoState& state, const TraceRow& row) {
    writer.append(row);
    if (checkpoints.due(row.iter)) {
      writer.sync();
      checkpoints.write(row.iter, checkpoint_json(ctx, row.iter, state.w));
    }
  };
  const FccoRun run = ma ? sonx_run_ma(problem, cfg, callback) : sonx_run(problem, cfg, callback);
  writer.sync();
  checkpoints.write(run.state.iteration, checkpoint_json(ctx, run.state.iteration, run.state.w));

  Json summary = base_summary(ctx, run.trace, run.state.iteration, run.aborted);
  summary["final_objective"] = full_fcco_objective(problem, run.state.w);
  if (cfg.moreau_every > 0) {
    summary["final_moreau_grad"] =
        moreau_grad_norm(fcco_objective(problem), run.state.w, cfg.moreau).grad_norm;
    summary["moreau_sq_mean"] = run.trace.moreau_sq_mean ? Json(*run.trace.moreau_sq_mean) : Json();
  }
  if (const auto* dro = dynamic_cast<const GroupDroProblem*>(&problem)) {
    const Eigen::Index d = static_cast<Eigen::Index>(dro->data().dim());
    const Vector w = run.state.w.head(d);
    std::vector<double> losses = group_losses(dro->data(), w);
    std::sort(losses.begin(), losses.end(), std::greater<>());
    double top = 0.0;
    for (std::size_t k = 0; k < dro->K(); ++k) top += losses[k];
    summary["groups"] = {{"K", dro->K()},
                         {"s", run.state.w[d]},
                         {"worst_group_loss", losses.front()},
                         {"top_k_mean_loss", top / static_cast<double>(dro->K())}};
  }
  return finish(ctx, std::move(summary), solver_config_json(cfg), run.aborted);
}

int run_tcco(const RunContext& ctx, const TccoProblem& problem, SolverConfig cfg, Section& moreau) {
  const bool ma = ctx.solver == Solver::SontMa;
  cfg.seed = ctx.seed;
  cfg.trace_every = ctx.trace_every;
  cfg.trace_exact_objective = ctx.exact_objective;
  cfg.trace_estimator_error = ctx.estimator_error;
  cfg.moreau_every = moreau.count("every").value_or(0);
  if (cfg.moreau_every > 0 || moreau.has("rho_bar")) cfg.moreau = tcco_moreau(moreau, problem);
  moreau.finish();
  validate_tcco(cfg, problem);

  fs::create_directories(ctx.out);
  TraceWriter writer(ctx.out / "trace.csv", cfg.trace_estimator_error, cfg.moreau_every > 0);
  Checkpointer checkpoints(ctx.out / "checkpoint.json", ctx.checkpoint_every);
  const auto callback = [&](const TccoState& state, const TraceRow& row) {
    writer.append(row);
    if (checkpoints.due(row.iter)) {
      writer.sync();
      checkpoints.write(row.iter, checkpoint_json(ctx, row.iter, state.w));
    }
  };
  const TccoRun run = ma ? sont_run_ma(problem, cfg, callback) : sont_run(problem, cfg, callback);
  writer.sync();
  checkpoints.write(run.state.iteration, checkpoint_json(ctx, run.state.iteration, run.state.w));

  Json summary = base_summary(ctx, run.trace, run.state.iteration, run.aborted);
  summary["final_objective"] = full_tcco_objective(problem, run.state.w);
  if (cfg.moreau_every > 0) {
    summary["final_moreau_grad"] =
        moreau_grad_norm(tcco_objective(problem), run.state.w, cfg.moreau).grad_norm;
    summary["moreau_sq_mean"] = run.trace.moreau_sq_mean ? Json(*run.trace.moreau_sq_mean) : Json();
  }
  return finish(ctx, std::move(summary), solver_config_json(cfg), run.aborted);
}

int run_tpauc(const RunContext& ctx, const TpaucDataset& data, TpaucConfig cfg) {
  const bool mil = ctx.solver == Solver::TpaucSont;
  cfg.seed = ctx.seed;
  cfg.trace_every = ctx.trace_every;
  validate_tpauc(cfg, data);

  fs::create_directories(ctx.out);
  TraceWriter writer(ctx.out / "trace.csv", false, false);
  Checkpointer checkpoints(ctx.out / "checkpoint.json", ctx.checkpoint_every);
  const auto state_json = [&](const TpaucState& state) {
    Json j = checkpoint_json(ctx, state.iteration, state.w);
    j["s"] = vector_json(state.s);
    j["s_prime"] = state.s_prime;
    return j;
  };
  const auto callback = [&](const TpaucState& state, const TraceRow& row) {
    writer.append(row);
    if (checkpoints.due(row.iter)) {
      writer.sync();
      checkpoints.write(row.iter, state_json(state));
    }
  };
  const TpaucRun run = mil ? tpauc_sont_run(data, cfg, callback) : tpauc_sonx_run(data, cfg, callback);
  writer.sync();
  checkpoints.write(run.state.iteration, state_json(run.state));

  Json summary = base_summary(ctx, run.trace, run.state.iteration, run.aborted);
  const TpaucState& st = run.state;
  summary["final_objective"] = tpauc_objective(data, cfg, st.w, st.s, st.s_prime);
  summary["exact_surrogate"] = exact_tpauc_surrogate(st.w, data, cfg.scorer, cfg.pooling, cfg.loss);
  const auto [pos, neg] = dataset_scores(data, st.w, cfg.scorer, cfg.pooling);
  try {
    summary["tpauc"] = tpauc_metric(pos, neg, cfg.loss.alpha, cfg.loss.beta);
  } catch (const MetricUndefined&) {
    summary["tpauc"] = Json();
  }
  return finish(ctx, std::move(summary), tpauc_config_json(cfg), run.aborted);
}

}  // namespace

int cmd_run(const Options& options) {
  return guarded("run", [&] {
    RunContext ctx;
    ctx.started = utc_now();
    ctx.quiet = options.quiet;
    ctx.input = read_config_file(options.config_path);
    Section top(ctx.input, "config");
    const auto solver = top.text("solver");
    if (!solver) throw InvalidConfig("config.solver is required");
    ctx.solver = parse_solver(*solver);
    const auto seed = top.seed("seed");
    ctx.seed = options.seed ? *options.seed : seed.value_or(0);
    const auto output = top.text("output");
    ctx.out = options.out ? *options.out : output.value_or("fcco-out");
    ctx.checkpoint_every = top.count("checkpoint_every").value_or(0);

    Section trace = top.child("trace");
    const auto every = trace.count("every");
    ctx.trace_every = options.trace_every ? *options.trace_every : every.value_or(1);
    ctx.exact_objective = trace.flag("exact_objective").value_or(true);
    ctx.estimator_error = trace.flag("estimator_error").value_or(false);
    trace.finish();
    if (ctx.trace_every == 0) throw InvalidConfig("trace every must be positive");

    const ProblemSource source = parse_problem(top.child("problem"));
    Section params = top.child("params");
    const bool tpauc = ctx.solver == Solver::TpaucSonx || ctx.solver == Solver::TpaucSont;
    if (tpauc) {
      if (top.has("moreau")) throw InvalidConfig("moreau probes are not available for TPAUC runs");
      if (ctx.estimator_error) throw InvalidConfig("estimator error is not traced for TPAUC runs");
      Section model = top.child("model");
      top.finish();
      const LoadedProblem loaded = load_tpauc(source);
      return run_tpauc(ctx, *loaded.tpauc,
                       tpauc_params(params, model, *loaded.tpauc, ctx.solver == Solver::TpaucSont));
    }
    if (top.has("model")) throw InvalidConfig("config.model applies to TPAUC solvers only");
    Section moreau = top.child("moreau");
    top.finish();
    switch (ctx.solver) {
      case Solver::Sont:
      case Solver::SontMa: {
        const LoadedProblem loaded = load_tcco(source);
        return run_tcco(ctx, *loaded.tcco,
                        tcco_params(params, *loaded.tcco, ctx.solver == Solver::SontMa), moreau);
      }
      case Solver::GdroSonx:
        if (!(source.synthetic ? source.synthetic->kind == SyntheticKind::GroupedDro
                               : source.format == "grouped")) {
          throw InvalidConfig("gdro-sonx needs a grouped-dro synthetic problem or a grouped dataset");
        }
        [[fallthrough]];
      default: {
        const LoadedProblem loaded = load_fcco(source);
        return run_fcco(ctx, *loaded.fcco,
                        fcco_params(params, *loaded.fcco, ctx.solver == Solver::SonxMa), moreau);
      }
    }
  });
}

}  // namespace fcco::cli
