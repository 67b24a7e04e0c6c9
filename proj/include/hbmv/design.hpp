#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbmv/dataset.hpp"
#include "hbmv/model_spec.hpp"

namespace hbmv {

// One coefficient position before equality constraints are applied.
struct FixedSlot {
  CoefficientRef ref;
  std::string label;  // e.g. "y_1:x_age"
};

struct FixedEffectLayout {
  std::vector<FixedSlot> slots;            // outcome-major: intercept, patient, team, facility
  std::vector<std::size_t> slot_to_column;  // constraint map; several slots may share a column
  std::vector<std::string> column_labels;   // merged slots joined by '='

  std::size_t n_slots() const { return slots.size(); }
  std::size_t n_columns() const { return column_labels.size(); }
  std::optional<std::size_t> find_slot(const CoefficientRef& ref) const;
};

// Ordering of one unit's random-effect vector (a team's or a facility's).
struct RandomEffectLayout {
  std::vector<FixedSlot> slots;  // outcome-major, intercept first

  std::size_t dim() const { return slots.size(); }
  std::optional<std::size_t> intercept_index(std::size_t outcome) const;
  std::vector<std::string> labels() const;
};

// Affine map applied to a raw covariate: (x - center) / scale.
struct ColumnScaling {
  double center = 0.0;
  double scale = 1.0;

  double apply(double x) const { return (x - center) / scale; }
};

struct Standardization {
  std::vector<ColumnScaling> patient;
  std::vector<ColumnScaling> team;
  std::vector<ColumnScaling> facility;
};

// Everything about a fitted design except the per-patient rows: enough to
// rebuild design rows for new covariate profiles at prediction time.
struct DesignLayout {
  ModelSpec spec;
  CovariateNames names;
  FixedEffectLayout fixed;
  RandomEffectLayout team_effects;
  RandomEffectLayout facility_effects;
  Standardization scaling;

  std::vector<std::string> facility_ids;  // canonical order
  std::vector<std::string> team_ids;
  std::vector<std::size_t> facility_of_team;
  Eigen::MatrixXd team_covariates;      // raw Z, one row per canonical team
  Eigen::MatrixXd facility_covariates;  // raw W, one row per canonical facility

  std::size_t n_outcomes() const { return spec.n_outcomes; }
  std::size_t n_teams() const { return team_ids.size(); }
  std::size_t n_facilities() const { return facility_ids.size(); }

  // Fixed columns plus the free parameters of the three covariance blocks.
  std::size_t parameter_count() const;
  // Dimension of the covariance at a level (P for the patient level).
  std::size_t level_dim(Level level) const;
};

// P pseudo-rows for one patient: row p carries outcome p's active columns.
struct PatientDesign {
  Eigen::MatrixXd fixed;     // P x n_columns
  Eigen::MatrixXd team;      // P x team dim
  Eigen::MatrixXd facility;  // P x facility dim
};

PatientDesign patient_design(const DesignLayout& layout, const std::vector<double>& x_raw,
                             const std::vector<double>& z_raw, const std::vector<double>& w_raw);

struct DesignStructure {
  DesignLayout layout;

  std::vector<std::string> patient_ids;  // canonical order
  std::vector<std::size_t> team_of_patient;
  std::vector<std::vector<std::size_t>> patients_in_team;
  std::vector<std::vector<std::size_t>> teams_in_facility;

  // Stacked pseudo-observations; row i * P + p is outcome p of patient i.
  Eigen::MatrixXd fixed_rows;
  Eigen::MatrixXd team_rows;
  Eigen::MatrixXd facility_rows;
  Eigen::VectorXd y;

  std::size_t n_outcomes() const { return layout.n_outcomes(); }
  std::size_t n_patients() const { return patient_ids.size(); }
  std::size_t n_teams() const { return layout.n_teams(); }
  std::size_t n_facilities() const { return layout.n_facilities(); }
};

FixedEffectLayout make_fixed_layout(const ModelSpec& spec, const CovariateNames& names);
RandomEffectLayout make_team_layout(const ModelSpec& spec, const CovariateNames& names);
RandomEffectLayout make_facility_layout(const ModelSpec& spec, const CovariateNames& names);

// Binary (0/1) and constant columns keep the identity map.
Standardization compute_standardization(const PanelDataset& dataset, const HierarchyIndex& index,
                                        bool enabled);

// Responses in `dataset` are used as given; apply_transform first for log models.
DesignStructure build_design(const PanelDataset& dataset, const HierarchyIndex& index,
                             const ModelSpec& spec);

// Validates the hierarchy and applies spec.response_transform before building.
DesignStructure build_design(const PanelDataset& dataset, const ModelSpec& spec);

nlohmann::json layout_to_json(const DesignLayout& layout);
DesignLayout layout_from_json(const nlohmann::json& j);

}  // namespace hbmv
