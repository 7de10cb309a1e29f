#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "commands.hpp"
#include "config_json.hpp"
#include "fcco/data.hpp"
#include "fcco/diagnostics.hpp"
#include "fcco/solvers.hpp"
#include "output.hpp"
#include "params.hpp"

namespace fcco::cli {

namespace {

struct GammaChoice {
  std::string label;
  std::optional<double> value;  // unset: theoretical default
};

std::vector<GammaChoice> parse_gammas(const Json& raw) {
  if (!raw.is_array() || raw.empty()) throw InvalidConfig("config.gammas must be a non-empty list");
  std::vector<GammaChoice> out;
  for (const Json& g : raw) {
    if (g.is_string() && g.get<std::string>() == "theoretical") {
      out.push_back({"theoretical", std::nullopt});
    } else if (g.is_number()) {
      const double v = g.get<double>();
      if (!std::isfinite(v) || v < 0.0) throw InvalidConfig("gammas must be finite and >= 0");
      out.push_back({format_double(v), v});
    } else {
      throw InvalidConfig("gammas entries must be numbers or \"theoretical\"");
    }
  }
  return out;
}

// Runs task(k) for k in [0, count) on up to jobs threads. Results are stored
// by index, so the output does not depend on scheduling.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t k = 0; k < count; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          task(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Vector unit_direction(std::uint64_t seed, std::size_t dim) {
  CounterRng rng = stream(seed, 0, Purpose::Probe, 7);
  Vector dir(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < dir.size(); ++k) dir[k] = rng.normal();
  return dir / std::max(dir.norm(), 1e-300);
}

}  // namespace

int cmd_compare(const Options& options) {
  return guarded("compare", [&] {
    const Json input = read_config_file(options.config_path);
    Section top(input, "config");
    const std::string task = top.text("task").value_or("tracking");
    if (task != "tracking" && task != "solve") {
      throw InvalidConfig("config.task must be 'tracking' or 'solve'");
    }
    const std::uint64_t base_seed = options.seed ? *options.seed : top.seed("seed").value_or(0);
    const std::size_t seeds = top.count("seeds").value_or(1);
    if (seeds == 0) throw InvalidConfig("config.seeds must be positive");
    if (!top.has("gammas")) throw InvalidConfig("config.gammas is required");
    const std::vector<GammaChoice> gammas = parse_gammas(top.raw("gammas"));
    const ProblemSource source = parse_problem(top.child("problem"));
    const std::optional<std::string> output = top.text("output");
    Section tracking = top.child("tracking");
    Section params = top.child("params");
    const std::filesystem::path out = options.out ? *options.out : output.value_or("fcco-out");

    const LoadedProblem loaded = load_fcco(source);
    const FccoProblem& problem = *loaded.fcco;
    const std::size_t n = problem.num_blocks();

    // curves[g][s] is one error or objective sequence.
    std::vector<std::vector<std::vector<double>>> curves(gammas.size(),
                                                         std::vector<std::vector<double>>(seeds));
    std::vector<std::size_t> iters;
    std::size_t burn_in = 0;
    Json effective;

    if (task == "tracking") {
      if (top.has("params")) throw InvalidConfig("config.params applies to task 'solve' only");
      top.finish();
      TrackingConfig base;
      base.tau = tracking.number("tau").value_or(0.1);
      base.B1 = tracking.count("B1").value_or(std::min<std::size_t>(n, 4));
      base.B2 = tracking.count("B2").value_or(std::min<std::size_t>(problem.num_samples(0), 4));
      base.T = tracking.count("T").value_or(1000);
      const double drift = tracking.number("drift").value_or(0.01);
      burn_in = tracking.count("burn_in").value_or(base.T / 5);
      tracking.finish();
      if (!(base.tau > 0.0 && base.tau <= 1.0)) throw InvalidConfig("tracking.tau must be in (0, 1]");
      if (base.B1 == 0 || base.B2 == 0 || base.T == 0) {
        throw InvalidConfig("tracking batch sizes and T must be positive");
      }
      const Vector w0 = problem.initial_point();
      const Vector dir = unit_direction(base_seed, problem.dim());
      const auto path = [&](std::size_t t) -> Vector {
        return w0 + (drift * static_cast<double>(t)) * dir;
      };
      parallel_for(gammas.size() * seeds, options.jobs, [&](std::size_t k) {
        const std::size_t g = k / seeds;
        TrackingConfig cfg = base;
        cfg.seed = base_seed + k % seeds;
        cfg.gamma = gammas[g].value.value_or(default_gamma(n, cfg.B1, cfg.tau));
        curves[g][k % seeds] = track_estimator(problem, path, cfg);
      });
      for (std::size_t t = 1; t <= base.T; ++t) iters.push_back(t);
      effective = {{"tau", base.tau}, {"B1", base.B1}, {"B2", base.B2}, {"T", base.T},
                   {"drift", drift}, {"burn_in", burn_in}};
    } else {
      if (top.has("tracking")) throw InvalidConfig("config.tracking applies to task 'tracking' only");
      top.finish();
      SolverConfig base = fcco_params(params, problem, false);
      if (base.gamma) throw InvalidConfig("params.gamma is set by config.gammas");
      validate_fcco(base, problem);
      std::vector<std::size_t> first_iters;
      parallel_for(gammas.size() * seeds, options.jobs, [&](std::size_t k) {
        const std::size_t g = k / seeds;
        SolverConfig cfg = base;
        cfg.seed = base_seed + k % seeds;
        cfg.gamma = gammas[g].value;
        const FccoRun run = sonx_run(problem, cfg);
        if (run.aborted) throw *run.aborted;
        std::vector<double>& curve = curves[g][k % seeds];
        for (const TraceRow& row : run.trace.rows) curve.push_back(row.objective);
        if (k == 0) {
          for (const TraceRow& row : run.trace.rows) first_iters.push_back(row.iter);
        }
      });
      iters = first_iters;
      effective = solver_config_json(base);
    }

    // Seed-averaged curves, one column per gamma.
    const std::size_t rows = curves[0][0].size();
    iters.resize(std::min(iters.size(), rows));
    std::string csv = "iter";
    for (const GammaChoice& g : gammas) csv += ",gamma=" + g.label;
    csv += "\n";
    std::vector<double> tail_means(gammas.size(), 0.0);
    std::vector<std::size_t> tail_counts(gammas.size(), 0);
    for (std::size_t r = 0; r < rows; ++r) {
      csv += std::to_string(r < iters.size() ? iters[r] : r + 1);
      for (std::size_t g = 0; g < gammas.size(); ++g) {
        double mean = 0.0;
        for (std::size_t s = 0; s < seeds; ++s) mean += curves[g][s].at(r);
        mean /= static_cast<double>(seeds);
        csv += "," + format_double(mean);
        if (r >= burn_in) {
          tail_means[g] += mean;
          ++tail_counts[g];
        }
      }
      csv += "\n";
    }
    std::filesystem::create_directories(out);
    write_file_atomic(out / "compare.csv", csv);

    Json summary;
    summary["task"] = task;
    summary["seeds"] = seeds;
    summary["seed"] = base_seed;
    summary["git_describe"] = build_describe();
    summary["effective"] = effective;
    Json per_gamma = Json::array();
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      const double tail = tail_counts[g] ? tail_means[g] / static_cast<double>(tail_counts[g]) : NAN;
      per_gamma.push_back({{"gamma", gammas[g].label}, {"mean_after_burn_in", tail}});
      if (!options.quiet) {
        std::cout << "gamma=" << gammas[g].label << ": mean " << (task == "tracking" ? "error" : "objective")
                  << " after burn-in " << format_double(tail) << "\n";
      }
    }
    summary["gammas"] = per_gamma;
    summary["config"] = input;
    write_json_atomic(out / "compare_summary.json", summary);
    return kOk;
  });
}

}  // namespace fcco::cli
