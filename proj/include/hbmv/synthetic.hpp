#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hbmv/dataset.hpp"
#include "hbmv/design.hpp"
#include "hbmv/diagnostics.hpp"
#include "hbmv/model_spec.hpp"

namespace hbmv {

struct CovariateGenerator {
  enum class Kind { Binary, Continuous, Categorical };

  std::string name;
  Kind kind = Kind::Continuous;
  double probability = 0.5;           // binary
  double mean = 0.0, sd = 1.0;        // continuous
  std::vector<std::string> levels;    // categorical; levels[0] is the reference
  std::vector<double> frequencies;    // categorical, one per level

  // Column names produced: the name itself, or name_<level> per non-reference level.
  std::vector<std::string> columns() const;
};

struct CountRange {
  std::size_t min = 1;
  std::size_t max = 1;
};

struct PanelShape {
  std::size_t n_facilities = 1;
  CountRange teams_per_facility;
  CountRange patients_per_team;
};

struct GroundTruth {
  ModelSpec spec;
  PanelShape shape;
  std::vector<std::string> response_names;  // defaults to y_1..y_P
  std::vector<CovariateGenerator> patient_covariates;
  std::vector<CovariateGenerator> team_covariates;
  std::vector<CovariateGenerator> facility_covariates;
  Eigen::VectorXd gamma;  // one value per merged fixed column, on the raw covariate scale
  Eigen::MatrixXd sigma_patient;
  Eigen::MatrixXd sigma_team;
  Eigen::MatrixXd sigma_facility;

  CovariateNames names() const;
  const Eigen::MatrixXd& sigma(Level level) const;
};

// Throws InvalidTruth on non-SPD or wrongly sized covariances, zero counts,
// bad generators or a gamma of the wrong length.
void validate_truth(const GroundTruth& truth);

struct EffectsLedger {
  std::vector<std::string> effect_labels_team;
  std::vector<std::string> effect_labels_facility;
  std::map<std::string, Eigen::VectorXd> team_effects;
  std::map<std::string, Eigen::VectorXd> facility_effects;
  std::map<std::string, Eigen::VectorXd> residuals;  // by patient id
};

struct SyntheticPanel {
  PanelDataset dataset;
  EffectsLedger ledger;
};

// Deterministic in (truth, seed). Responses are on the model scale; for a log
// spec they are exponentiated so that apply_transform recovers them.
SyntheticPanel generate(const GroundTruth& truth, std::uint64_t seed);

struct RecoveryRow {
  std::string name;
  double truth = 0.0;
  double posterior_mean = 0.0;
  Interval hpd;
  bool covered = false;
};

struct RecoveryReport {
  std::vector<RecoveryRow> rows;
  double coverage = 0.0;        // over all rows
  double fixed_coverage = 0.0;  // over gamma rows only
};

// Truth gamma and covariances against a fit summary. The fit must use the
// truth's spec with standardize = false; LayoutMismatch otherwise.
RecoveryReport recovery_report(const GroundTruth& truth, const FitSummary& fit);

GroundTruth truth_from_json(const nlohmann::json& j);
nlohmann::json truth_to_json(const GroundTruth& truth);
nlohmann::json ledger_to_json(const EffectsLedger& ledger);

}  // namespace hbmv
