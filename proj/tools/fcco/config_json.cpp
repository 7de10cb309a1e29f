#include "config_json.hpp"

#include <filesystem>
#include <fstream>

#include "fcco/data.hpp"

namespace fcco::cli {

Json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot read config file " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidConfig(path + ": " + e.what());
  }
}

Section::Section(const Json& json, std::string name) : json_(json), name_(std::move(name)) {
  if (json_.is_null()) json_ = Json::object();
  if (!json_.is_object()) throw InvalidConfig(name_ + " must be a JSON object");
}

bool Section::has(const std::string& key) const { return json_.contains(key) && !json_.at(key).is_null(); }

const Json* Section::find(const std::string& key) {
  used_.insert(key);
  if (!has(key)) return nullptr;
  return &json_.at(key);
}

std::optional<double> Section::number(const std::string& key) {
  const Json* j = find(key);
  if (!j) return std::nullopt;
  if (!j->is_number()) throw InvalidConfig(name_ + "." + key + " must be a number");
  return j->get<double>();
}

std::optional<std::size_t> Section::count(const std::string& key) {
  const Json* j = find(key);
  if (!j) return std::nullopt;
  if (!j->is_number_integer() || j->get<long long>() < 0) {
    throw InvalidConfig(name_ + "." + key + " must be a non-negative integer");
  }
  return j->get<std::size_t>();
}

std::optional<std::uint64_t> Section::seed(const std::string& key) {
  const Json* j = find(key);
  if (!j) return std::nullopt;
  if (!j->is_number_unsigned() && !(j->is_number_integer() && j->get<long long>() >= 0)) {
    throw InvalidConfig(name_ + "." + key + " must be a non-negative integer");
  }
  return j->get<std::uint64_t>();
}

std::optional<bool> Section::flag(const std::string& key) {
  const Json* j = find(key);
  if (!j) return std::nullopt;
  if (!j->is_boolean()) throw InvalidConfig(name_ + "." + key + " must be true or false");
  return j->get<bool>();
}

std::optional<std::string> Section::text(const std::string& key) {
  const Json* j = find(key);
  if (!j) return std::nullopt;
  if (!j->is_string()) throw InvalidConfig(name_ + "." + key + " must be a string");
  return j->get<std::string>();
}

std::optional<Vector> Section::vector(const std::string& key) {
  const Json* j = find(key);
  if (!j) return std::nullopt;
  if (!j->is_array()) throw InvalidConfig(name_ + "." + key + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j->size()));
  for (std::size_t k = 0; k < j->size(); ++k) {
    if (!(*j)[k].is_number()) throw InvalidConfig(name_ + "." + key + " must be an array of numbers");
    v[static_cast<Eigen::Index>(k)] = (*j)[k].get<double>();
  }
  return v;
}

Section Section::child(const std::string& key) {
  const Json* j = find(key);
  return Section(j ? *j : Json::object(), name_ + "." + key);
}

const Json& Section::raw(const std::string& key) {
  static const Json null_json;
  const Json* j = find(key);
  return j ? *j : null_json;
}

void Section::finish() const {
  for (const auto& item : json_.items()) {
    if (!used_.count(item.key())) throw InvalidConfig("unknown key " + name_ + "." + item.key());
  }
}

Solver parse_solver(const std::string& name) {
  if (name == "sonx") return Solver::Sonx;
  if (name == "sonx-ma") return Solver::SonxMa;
  if (name == "sont") return Solver::Sont;
  if (name == "sont-ma") return Solver::SontMa;
  if (name == "tpauc-sonx") return Solver::TpaucSonx;
  if (name == "tpauc-sont") return Solver::TpaucSont;
  if (name == "gdro-sonx") return Solver::GdroSonx;
  throw InvalidConfig("unknown solver '" + name + "'");
}

std::string solver_name(Solver solver) {
  switch (solver) {
    case Solver::Sonx: return "sonx";
    case Solver::SonxMa: return "sonx-ma";
    case Solver::Sont: return "sont";
    case Solver::SontMa: return "sont-ma";
    case Solver::TpaucSonx: return "tpauc-sonx";
    case Solver::TpaucSont: return "tpauc-sont";
    case Solver::GdroSonx: return "gdro-sonx";
  }
  return "unknown";
}

LossKind parse_loss(const std::string& name) {
  if (name == "hinge") return LossKind::Hinge;
  if (name == "squared-hinge") return LossKind::SquaredHinge;
  if (name == "logistic") return LossKind::Logistic;
  throw InvalidConfig("unknown loss '" + name + "'");
}

std::string loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::Hinge: return "hinge";
    case LossKind::SquaredHinge: return "squared-hinge";
    case LossKind::Logistic: return "logistic";
  }
  return "unknown";
}

ProblemSource parse_problem(Section s) {
  ProblemSource source;
  if (const auto loss = s.text("loss")) source.loss = parse_loss(*loss);
  source.K = s.count("K");
  const auto kind = s.text("synthetic");
  const auto path = s.text("dataset");
  if (kind.has_value() == path.has_value()) {
    throw InvalidConfig("problem needs exactly one of 'synthetic' and 'dataset'");
  }
  if (kind) {
    SyntheticSpec spec;
    spec.kind = parse_synthetic_kind(*kind);
    spec.n = s.count("n").value_or(spec.n);
    spec.n2 = s.count("n2").value_or(spec.n2);
    spec.d = s.count("d").value_or(spec.d);
    spec.d1 = s.count("d1").value_or(spec.d1);
    spec.d2 = s.count("d2").value_or(spec.d2);
    spec.samples = s.count("samples").value_or(spec.samples);
    spec.sigma = s.number("sigma").value_or(spec.sigma);
    spec.seed = s.seed("seed").value_or(spec.seed);
    spec.kappa_f = s.number("kappa_f").value_or(spec.kappa_f);
    spec.kappa_g = s.number("kappa_g").value_or(spec.kappa_g);
    spec.theta = s.number("theta").value_or(spec.theta);
    spec.n_pos = s.count("n_pos").value_or(spec.n_pos);
    spec.n_neg = s.count("n_neg").value_or(spec.n_neg);
    spec.bag_min = s.count("bag_min").value_or(spec.bag_min);
    spec.bag_max = s.count("bag_max").value_or(spec.bag_max);
    spec.separable = s.flag("separable").value_or(spec.separable);
    spec.loss = source.loss;
    spec.validate();
    source.synthetic = spec;
  } else {
    source.dataset = *path;
    source.format = s.text("format").value_or("");
    if (source.format != "binary" && source.format != "grouped" && source.format != "mil") {
      throw InvalidConfig("problem.format must be binary, grouped or mil");
    }
    if (!std::filesystem::exists(source.dataset)) {
      throw DataError("dataset file not found: " + source.dataset);
    }
  }
  s.finish();
  return source;
}

namespace {

std::size_t default_K(std::size_t groups) { return std::max<std::size_t>(1, groups / 5); }

}  // namespace

LoadedProblem load_fcco(const ProblemSource& source) {
  LoadedProblem out;
  if (source.synthetic) {
    const SyntheticSpec& spec = *source.synthetic;
    if (spec.kind == SyntheticKind::GroupedDro) {
      GroupedDataset data = gen_grouped_dro(spec);
      const std::size_t K = source.K.value_or(default_K(data.num_groups()));
      out.fcco = std::make_unique<GroupDroProblem>(std::move(data), K);
    } else {
      out.fcco = gen_fcco(spec);
    }
    return out;
  }
  if (source.format != "grouped") throw InvalidConfig("FCCO solvers need a grouped dataset");
  GroupedDataset data = load_grouped_csv(source.dataset, source.loss);
  data.validate();
  const std::size_t K = source.K.value_or(default_K(data.num_groups()));
  if (K < 1 || K > data.num_groups()) throw InvalidConfig("problem.K must lie in [1, number of groups]");
  out.fcco = std::make_unique<GroupDroProblem>(std::move(data), K);
  return out;
}

LoadedProblem load_tcco(const ProblemSource& source) {
  if (!source.synthetic) throw InvalidConfig("TCCO solvers need a synthetic tcco problem");
  LoadedProblem out;
  out.tcco = gen_tcco(*source.synthetic);
  return out;
}

LoadedProblem load_tpauc(const ProblemSource& source) {
  LoadedProblem out;
  if (source.synthetic) {
    if (source.synthetic->kind != SyntheticKind::MilTpauc) {
      throw InvalidConfig("TPAUC solvers need a mil-tpauc synthetic problem or a dataset");
    }
    out.tpauc = std::make_unique<TpaucDataset>(gen_mil_tpauc(*source.synthetic).data);
  } else if (source.format == "binary") {
    out.tpauc = std::make_unique<TpaucDataset>(load_csv_binary(source.dataset));
  } else if (source.format == "mil") {
    out.tpauc = std::make_unique<TpaucDataset>(load_mil_bags(source.dataset));
  } else {
    throw InvalidConfig("TPAUC solvers need a binary or mil dataset");
  }
  out.tpauc->validate();
  return out;
}

}  // namespace fcco::cli
