#pragma once

#include "config_json.hpp"

namespace fcco::cli {

ReadOrder parse_order(const std::string& name);

// Solver hyperparameters; unset schedule entries fall back to the default
// schedule at params.epsilon (default 0.1).
SolverConfig fcco_params(Section params, const FccoProblem& problem, bool moving_average);
SolverConfig tcco_params(Section params, const TccoProblem& problem, bool moving_average);
TpaucConfig tpauc_params(Section params, Section model, const TpaucDataset& data, bool mil);

// Moreau probe settings. rho_bar and rho_F default to the declared-constant
// formulas, with rho_bar at least 1.
MoreauConfig moreau_settings(Section& section, double rho_bar_formula, double rho_F_formula);
MoreauConfig fcco_moreau(Section& section, const FccoProblem& problem);
MoreauConfig tcco_moreau(Section& section, const TccoProblem& problem);

Json solver_config_json(const SolverConfig& c);
Json tpauc_config_json(const TpaucConfig& c);

}  // namespace fcco::cli
