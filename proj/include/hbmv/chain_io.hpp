#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hbmv/design.hpp"
#include "hbmv/sampler.hpp"

namespace hbmv {

// Flattened parameter layout of one draw, in column order:
//   gamma[<column label>]
//   u_team[<team id>|<effect label>], u_facility[<facility id>|<effect label>]
//   sigma_<level>[<row label>|<col label>] for row <= col
// Covariance labels at the patient level are the response names.
std::vector<std::string> parameter_names(const DesignLayout& layout);
std::vector<std::string> covariance_labels(const DesignLayout& layout, Level level);
std::string gamma_name(const std::string& column_label);
std::string sigma_name(Level level, const std::string& row, const std::string& col);

Eigen::VectorXd flatten(const ParameterState& state);
ParameterState unflatten(const Eigen::VectorXd& values, const DesignLayout& layout);

// Writes one CSV row per retained draw; columns = parameter_names + "deviance".
// Values are printed with 17 significant digits so they read back exactly.
void write_chain_csv(const std::filesystem::path& path, const ChainSamples& chain, const DesignLayout& layout);
ChainSamples read_chain_csv(const std::filesystem::path& path, const DesignLayout& layout);

// Sidecar describing the chain columns and the design needed to reuse draws.
nlohmann::json layout_manifest(const DesignLayout& layout, const McmcConfig& config);

}  // namespace hbmv
