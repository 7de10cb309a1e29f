#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "fcco/config.hpp"
#include "fcco/gdro.hpp"
#include "fcco/problem.hpp"
#include "fcco/synthetic.hpp"
#include "fcco/tpauc.hpp"

namespace fcco::cli {

using Json = nlohmann::ordered_json;

// Reads and parses a JSON file. A missing or malformed file is an InvalidConfig.
Json read_config_file(const std::string& path);

// Typed view of one JSON object that rejects keys nobody asked for.
class Section {
 public:
  Section(const Json& json, std::string name);

  bool has(const std::string& key) const;
  std::optional<double> number(const std::string& key);
  std::optional<std::size_t> count(const std::string& key);
  std::optional<std::uint64_t> seed(const std::string& key);
  std::optional<bool> flag(const std::string& key);
  std::optional<std::string> text(const std::string& key);
  std::optional<Vector> vector(const std::string& key);
  // Nested object; an absent key yields an empty section.
  Section child(const std::string& key);
  const Json& raw(const std::string& key);

  // Throws InvalidConfig naming the first unknown key.
  void finish() const;
  const std::string& name() const noexcept { return name_; }

 private:
  const Json* find(const std::string& key);

  Json json_;
  std::string name_;
  std::set<std::string> used_;
};

enum class Solver { Sonx, SonxMa, Sont, SontMa, TpaucSonx, TpaucSont, GdroSonx };

Solver parse_solver(const std::string& name);
std::string solver_name(Solver solver);

// Problem source: a synthetic generator or a dataset file.
struct ProblemSource {
  std::optional<SyntheticSpec> synthetic;
  std::string dataset;
  std::string format;  // binary | grouped | mil
  LossKind loss = LossKind::Hinge;
  std::optional<std::size_t> K;  // group DRO
};

ProblemSource parse_problem(Section section);
LossKind parse_loss(const std::string& name);
std::string loss_name(LossKind kind);

// Problems ready for a solver. Exactly one member is set.
struct LoadedProblem {
  std::unique_ptr<FccoProblem> fcco;
  std::unique_ptr<TccoProblem> tcco;
  std::unique_ptr<TpaucDataset> tpauc;
};

LoadedProblem load_fcco(const ProblemSource& source);
LoadedProblem load_tcco(const ProblemSource& source);
LoadedProblem load_tpauc(const ProblemSource& source);

}  // namespace fcco::cli
