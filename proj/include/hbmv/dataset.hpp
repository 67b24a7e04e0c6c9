#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace hbmv {

struct FacilityRecord {
  std::string id;
  std::vector<double> covariates;  // W_k
};

struct TeamRecord {
  std::string id;
  std::string facility_id;
  std::vector<double> covariates;  // Z_jk
};

struct PatientRecord {
  std::string id;
  std::string team_id;
  std::vector<double> covariates;  // X_ijk, already reference-coded
  std::vector<double> responses;   // Y_ijk, one entry per outcome
};

// Patients within teams within facilities. Covariates are numeric; any
// categorical encoding happens before a record gets here.
struct PanelDataset {
  std::vector<std::string> response_names;
  std::vector<std::string> patient_covariate_names;
  std::vector<std::string> team_covariate_names;
  std::vector<std::string> facility_covariate_names;

  std::vector<FacilityRecord> facilities;
  std::vector<TeamRecord> teams;
  std::vector<PatientRecord> patients;

  std::size_t n_outcomes() const { return response_names.size(); }
};

// Canonical (id-sorted) view of a validated dataset. Unit indices used across
// the library refer to positions in this order, not in the input vectors.
struct HierarchyIndex {
  // canonical position -> index into dataset vectors
  std::vector<std::size_t> facility_order;
  std::vector<std::size_t> team_order;
  std::vector<std::size_t> patient_order;

  std::vector<std::size_t> facility_of_team;    // canonical team -> canonical facility
  std::vector<std::size_t> team_of_patient;     // canonical patient -> canonical team
  std::vector<std::vector<std::size_t>> teams_in_facility;
  std::vector<std::vector<std::size_t>> patients_in_team;

  std::unordered_map<std::string, std::size_t> facility_by_id;
  std::unordered_map<std::string, std::size_t> team_by_id;

  std::size_t n_facilities() const { return facility_order.size(); }
  std::size_t n_teams() const { return team_order.size(); }
  std::size_t n_patients() const { return patient_order.size(); }

  std::optional<std::size_t> find_facility(const std::string& id) const;
  std::optional<std::size_t> find_team(const std::string& id) const;
};

// Throws hbmv::Error with OrphanTeam, OrphanPatient, CrossNesting,
// DuplicateId, DimensionMismatch, MissingValue or EmptyDataset.
HierarchyIndex validate_hierarchy(const PanelDataset& dataset);

enum class ResponseTransform { Identity, Log };

// Log requires strictly positive responses (NonPositiveResponse otherwise).
PanelDataset apply_transform(const PanelDataset& dataset, ResponseTransform transform);

double back_transform(double value, ResponseTransform transform);

}  // namespace hbmv
