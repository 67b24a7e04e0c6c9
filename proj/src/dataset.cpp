#include "hbmv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hbmv/error.hpp"

namespace hbmv {
namespace {

template <typename Records>
std::vector<std::size_t> sorted_by_id(const Records& records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].id < records[b].id;
  });
  return order;
}

void check_values(const std::vector<double>& values, std::size_t expected, const char* what,
                  const std::string& id) {
  if (values.size() != expected) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " of '" + id + "' has " + std::to_string(values.size()) +
                    " entries, expected " + std::to_string(expected));
  }
  for (double v : values) {
    if (std::isnan(v)) {
      throw Error(ErrorCode::MissingValue, std::string(what) + " of '" + id + "' has a missing value");
    }
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::ParseError, std::string(what) + " of '" + id + "' is not finite");
    }
  }
}

}  // namespace

std::optional<std::size_t> HierarchyIndex::find_facility(const std::string& id) const {
  auto it = facility_by_id.find(id);
  if (it == facility_by_id.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> HierarchyIndex::find_team(const std::string& id) const {
  auto it = team_by_id.find(id);
  if (it == team_by_id.end()) return std::nullopt;
  return it->second;
}

HierarchyIndex validate_hierarchy(const PanelDataset& dataset) {
  if (dataset.patients.empty() || dataset.teams.empty() || dataset.facilities.empty()) {
    throw Error(ErrorCode::EmptyDataset, "dataset needs at least one facility, team and patient");
  }
  const std::size_t n_outcomes = dataset.n_outcomes();
  if (n_outcomes == 0) {
    throw Error(ErrorCode::DimensionMismatch, "dataset declares no response columns");
  }

  HierarchyIndex index;
  index.facility_order = sorted_by_id(dataset.facilities);
  index.team_order = sorted_by_id(dataset.teams);
  index.patient_order = sorted_by_id(dataset.patients);

  for (std::size_t pos = 0; pos < index.facility_order.size(); ++pos) {
    const auto& f = dataset.facilities[index.facility_order[pos]];
    check_values(f.covariates, dataset.facility_covariate_names.size(), "facility covariates", f.id);
    if (!index.facility_by_id.emplace(f.id, pos).second) {
      throw Error(ErrorCode::DuplicateId, "facility id '" + f.id + "' appears twice");
    }
  }

  index.facility_of_team.resize(index.team_order.size());
  index.teams_in_facility.resize(index.facility_order.size());
  for (std::size_t pos = 0; pos < index.team_order.size(); ++pos) {
    const auto& t = dataset.teams[index.team_order[pos]];
    if (pos > 0) {
      const auto& prev = dataset.teams[index.team_order[pos - 1]];
      if (prev.id == t.id) {
        if (prev.facility_id != t.facility_id) {
          throw Error(ErrorCode::CrossNesting, "team '" + t.id + "' is listed under facilities '" +
                                                   prev.facility_id + "' and '" + t.facility_id + "'");
        }
        throw Error(ErrorCode::DuplicateId, "team id '" + t.id + "' appears twice");
      }
    }
    check_values(t.covariates, dataset.team_covariate_names.size(), "team covariates", t.id);
    auto facility = index.find_facility(t.facility_id);
    if (!facility) {
      throw Error(ErrorCode::OrphanTeam,
                  "team '" + t.id + "' references unknown facility '" + t.facility_id + "'");
    }
    index.team_by_id.emplace(t.id, pos);
    index.facility_of_team[pos] = *facility;
    index.teams_in_facility[*facility].push_back(pos);
  }

  index.team_of_patient.resize(index.patient_order.size());
  index.patients_in_team.resize(index.team_order.size());
  for (std::size_t pos = 0; pos < index.patient_order.size(); ++pos) {
    const auto& p = dataset.patients[index.patient_order[pos]];
    if (pos > 0 && dataset.patients[index.patient_order[pos - 1]].id == p.id) {
      throw Error(ErrorCode::DuplicateId, "patient id '" + p.id + "' appears twice");
    }
    check_values(p.covariates, dataset.patient_covariate_names.size(), "patient covariates", p.id);
    check_values(p.responses, n_outcomes, "responses", p.id);
    auto team = index.find_team(p.team_id);
    if (!team) {
      throw Error(ErrorCode::OrphanPatient,
                  "patient '" + p.id + "' references unknown team '" + p.team_id + "'");
    }
    index.team_of_patient[pos] = *team;
    index.patients_in_team[*team].push_back(pos);
  }
  return index;
}

PanelDataset apply_transform(const PanelDataset& dataset, ResponseTransform transform) {
  PanelDataset out = dataset;
  if (transform == ResponseTransform::Identity) return out;
  for (auto& patient : out.patients) {
    for (double& y : patient.responses) {
      if (!(y > 0.0)) {
        throw Error(ErrorCode::NonPositiveResponse,
                    "log transform needs positive responses; patient '" + patient.id + "' has " +
                        std::to_string(y));
      }
      y = std::log(y);
    }
  }
  return out;
}

double back_transform(double value, ResponseTransform transform) {
  return transform == ResponseTransform::Log ? std::exp(value) : value;
}

}  // namespace hbmv
