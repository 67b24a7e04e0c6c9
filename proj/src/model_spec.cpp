#include "hbmv/model_spec.hpp"

#include <algorithm>

#include "hbmv/error.hpp"

namespace hbmv {

using nlohmann::json;

std::string level_name(Level level) {
  switch (level) {
    case Level::Patient: return "patient";
    case Level::Team: return "team";
    case Level::Facility: return "facility";
  }
  return "?";
}

CovariateNames CovariateNames::of(const PanelDataset& dataset) {
  return {dataset.response_names, dataset.patient_covariate_names, dataset.team_covariate_names,
          dataset.facility_covariate_names};
}

namespace {

std::size_t resolve_column(const json& j, const std::vector<std::string>& names, const char* level) {
  if (j.is_number_integer()) {
    const auto idx = j.get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= names.size()) {
      throw Error(ErrorCode::BadPredictorIndex, std::string(level) + " predictor index " +
                                                    std::to_string(idx) + " out of range (" +
                                                    std::to_string(names.size()) + " columns)");
    }
    return static_cast<std::size_t>(idx);
  }
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      throw Error(ErrorCode::DimensionMismatch,
                  std::string(level) + " covariate column '" + name + "' not present in data");
    }
    return static_cast<std::size_t>(it - names.begin());
  }
  throw Error(ErrorCode::InvalidSpec, std::string(level) + " predictor column must be a name or index");
}

CovStructure parse_structure(const std::string& s) {
  if (s == "unstructured") return CovStructure::Unstructured;
  if (s == "pooled_diagonal") return CovStructure::PooledDiagonal;
  throw Error(ErrorCode::InvalidSpec, "unknown covariance structure '" + s + "'");
}

std::string structure_name(CovStructure s) {
  return s == CovStructure::Unstructured ? "unstructured" : "pooled_diagonal";
}

Term parse_term(const std::string& s) {
  if (s == "intercept") return Term::Intercept;
  if (s == "patient") return Term::Patient;
  if (s == "team") return Term::Team;
  if (s == "facility") return Term::Facility;
  throw Error(ErrorCode::InvalidSpec, "unknown coefficient term '" + s + "'");
}

std::string term_name(Term t) {
  switch (t) {
    case Term::Intercept: return "intercept";
    case Term::Patient: return "patient";
    case Term::Team: return "team";
    case Term::Facility: return "facility";
  }
  return "?";
}

const std::vector<std::string>& names_for(Term t, const CovariateNames& names) {
  static const std::vector<std::string> none;
  switch (t) {
    case Term::Patient: return names.patient;
    case Term::Team: return names.team;
    case Term::Facility: return names.facility;
    case Term::Intercept: break;
  }
  return none;
}

std::size_t parse_outcome(const json& j, std::size_t n_outcomes) {
  const auto p = j.get<long long>();
  if (p < 1 || static_cast<std::size_t>(p) > n_outcomes) {
    throw Error(ErrorCode::InvalidConstraint,
                "constraint outcome " + std::to_string(p) + " outside 1.." + std::to_string(n_outcomes));
  }
  return static_cast<std::size_t>(p - 1);
}

CoefficientRef parse_coefficient(const json& j, std::size_t n_outcomes, const CovariateNames& names) {
  CoefficientRef ref;
  ref.term = parse_term(j.value("term", std::string("intercept")));
  ref.outcome = parse_outcome(j.at("outcome"), n_outcomes);
  if (ref.term != Term::Intercept) {
    ref.column = resolve_column(j.at("column"), names_for(ref.term, names), term_name(ref.term).c_str());
  }
  return ref;
}

json coefficient_json(const CoefficientRef& ref, const CovariateNames& names) {
  json j{{"term", term_name(ref.term)}, {"outcome", ref.outcome + 1}};
  if (ref.term != Term::Intercept) {
    const auto& cols = names_for(ref.term, names);
    if (ref.column < cols.size()) {
      j["column"] = cols[ref.column];
    } else {
      j["column"] = ref.column;
    }
  }
  return j;
}

json column_json(std::size_t column, const std::vector<std::string>& names) {
  if (column < names.size()) return names[column];
  return column;
}

}  // namespace

ModelSpec spec_from_json(const json& j, const CovariateNames& names) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidSpec, "model spec must be a JSON object");
  try {
    ModelSpec spec;
    spec.name = j.value("name", std::string("model"));
    const std::size_t default_p = names.responses.empty() ? 2 : names.responses.size();
    spec.n_outcomes = j.value("n_outcomes", default_p);
    if (spec.n_outcomes < 1) throw Error(ErrorCode::InvalidSpec, "n_outcomes must be >= 1");

    for (const auto& p : j.value("patient_predictors", json::array())) {
      PatientPredictor pred;
      pred.column = resolve_column(p.is_object() ? p.at("column") : p, names.patient, "patient");
      if (p.is_object()) {
        pred.random_over_team = p.value("random_over_team", false);
        pred.random_over_facility = p.value("random_over_facility", false);
      }
      spec.patient_predictors.push_back(pred);
    }
    for (const auto& t : j.value("team_predictors", json::array())) {
      TeamPredictor pred;
      pred.column = resolve_column(t.is_object() ? t.at("column") : t, names.team, "team");
      if (t.is_object()) pred.random_over_facility = t.value("random_over_facility", false);
      spec.team_predictors.push_back(pred);
    }
    for (const auto& f : j.value("facility_predictors", json::array())) {
      FacilityPredictor pred;
      pred.column = resolve_column(f.is_object() ? f.at("column") : f, names.facility, "facility");
      spec.facility_predictors.push_back(pred);
    }
    if (j.contains("random_intercept")) {
      const auto& ri = j.at("random_intercept");
      spec.team_random_intercept = ri.value("team", true);
      spec.facility_random_intercept = ri.value("facility", true);
    }
    for (const auto& c : j.value("equality_constraints", json::array())) {
      if (c.contains("outcomes")) {
        // shorthand: same coefficient, two outcomes
        const auto& outs = c.at("outcomes");
        if (!outs.is_array() || outs.size() != 2) {
          throw Error(ErrorCode::InvalidConstraint, "constraint 'outcomes' must list two outcomes");
        }
        json first = c, second = c;
        first["outcome"] = outs[0];
        second["outcome"] = outs[1];
        spec.equality_constraints.push_back({parse_coefficient(first, spec.n_outcomes, names),
                                             parse_coefficient(second, spec.n_outcomes, names)});
      } else {
        spec.equality_constraints.push_back({parse_coefficient(c.at("first"), spec.n_outcomes, names),
                                             parse_coefficient(c.at("second"), spec.n_outcomes, names)});
      }
    }
    if (j.contains("cov_structure")) {
      const auto& cs = j.at("cov_structure");
      for (Level level : kLevels) {
        const auto key = level_name(level);
        if (cs.contains(key)) {
          spec.cov_structure[static_cast<int>(level)] = parse_structure(cs.at(key).get<std::string>());
        }
      }
    }
    const auto transform = j.value("response_transform", std::string("identity"));
    if (transform == "identity") {
      spec.response_transform = ResponseTransform::Identity;
    } else if (transform == "log") {
      spec.response_transform = ResponseTransform::Log;
    } else {
      throw Error(ErrorCode::InvalidSpec, "unknown response_transform '" + transform + "'");
    }
    spec.standardize = j.value("standardize", true);
    return spec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("malformed model spec: ") + e.what());
  }
}

json spec_to_json(const ModelSpec& spec, const CovariateNames& names) {
  json j;
  j["name"] = spec.name;
  j["n_outcomes"] = spec.n_outcomes;
  j["patient_predictors"] = json::array();
  for (const auto& p : spec.patient_predictors) {
    j["patient_predictors"].push_back({{"column", column_json(p.column, names.patient)},
                                       {"random_over_team", p.random_over_team},
                                       {"random_over_facility", p.random_over_facility}});
  }
  j["team_predictors"] = json::array();
  for (const auto& t : spec.team_predictors) {
    j["team_predictors"].push_back(
        {{"column", column_json(t.column, names.team)}, {"random_over_facility", t.random_over_facility}});
  }
  j["facility_predictors"] = json::array();
  for (const auto& f : spec.facility_predictors) {
    j["facility_predictors"].push_back({{"column", column_json(f.column, names.facility)}});
  }
  j["random_intercept"] = {{"team", spec.team_random_intercept},
                           {"facility", spec.facility_random_intercept}};
  j["equality_constraints"] = json::array();
  for (const auto& c : spec.equality_constraints) {
    j["equality_constraints"].push_back(
        {{"first", coefficient_json(c.first, names)}, {"second", coefficient_json(c.second, names)}});
  }
  j["cov_structure"] = json::object();
  for (Level level : kLevels) j["cov_structure"][level_name(level)] = structure_name(spec.structure(level));
  j["response_transform"] = spec.response_transform == ResponseTransform::Log ? "log" : "identity";
  j["standardize"] = spec.standardize;
  return j;
}

ModelSpec unconditional_spec(std::size_t n_outcomes) {
  ModelSpec spec;
  spec.name = "unconditional";
  spec.n_outcomes = n_outcomes;
  return spec;
}

}  // namespace hbmv
