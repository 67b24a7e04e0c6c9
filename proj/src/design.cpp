#include "hbmv/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "hbmv/error.hpp"

namespace hbmv {

using nlohmann::json;

namespace {

std::string outcome_label(const CovariateNames& names, std::size_t p) {
  if (p < names.responses.size()) return names.responses[p];
  return "y_" + std::to_string(p + 1);
}

std::string column_label(const std::vector<std::string>& names, std::size_t column, const char* prefix) {
  if (column < names.size()) return names[column];
  return std::string(prefix) + std::to_string(column);
}

std::string slot_label(const CovariateNames& names, const CoefficientRef& ref) {
  std::string predictor;
  switch (ref.term) {
    case Term::Intercept: predictor = "(Intercept)"; break;
    case Term::Patient: predictor = column_label(names.patient, ref.column, "x"); break;
    case Term::Team: predictor = column_label(names.team, ref.column, "z"); break;
    case Term::Facility: predictor = column_label(names.facility, ref.column, "w"); break;
  }
  return outcome_label(names, ref.outcome) + ":" + predictor;
}

std::size_t uf_find(std::vector<std::size_t>& parent, std::size_t a) {
  while (parent[a] != a) {
    parent[a] = parent[parent[a]];
    a = parent[a];
  }
  return a;
}

template <typename Predictors>
void check_columns(const Predictors& preds, std::size_t n_columns, const char* level) {
  std::set<std::size_t> seen;
  for (const auto& p : preds) {
    if (p.column >= n_columns) {
      throw Error(ErrorCode::BadPredictorIndex, std::string(level) + " predictor index " +
                                                    std::to_string(p.column) + " out of range (" +
                                                    std::to_string(n_columns) + " columns)");
    }
    if (!seen.insert(p.column).second) {
      throw Error(ErrorCode::InvalidSpec,
                  std::string(level) + " predictor " + std::to_string(p.column) + " listed twice");
    }
  }
}

ColumnScaling scaling_for(const std::vector<double>& values, bool enabled) {
  ColumnScaling s;
  if (!enabled || values.size() < 2) return s;
  const bool binary = std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0 || v == 1.0; });
  if (binary) return s;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  if (!(sd > 0.0)) return s;
  s.center = mean;
  s.scale = sd;
  return s;
}

json scaling_json(const std::vector<ColumnScaling>& cols) {
  json arr = json::array();
  for (const auto& c : cols) arr.push_back({c.center, c.scale});
  return arr;
}

std::vector<ColumnScaling> scaling_from(const json& arr) {
  std::vector<ColumnScaling> out;
  for (const auto& c : arr) out.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& rows, Eigen::Index n_cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), n_cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& row = rows.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != n_cols) {
      throw Error(ErrorCode::LayoutMismatch, "covariate row width does not match layout");
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

}  // namespace

std::optional<std::size_t> FixedEffectLayout::find_slot(const CoefficientRef& ref) const {
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const auto& r = slots[s].ref;
    if (r.outcome == ref.outcome && r.term == ref.term &&
        (ref.term == Term::Intercept || r.column == ref.column)) {
      return s;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> RandomEffectLayout::intercept_index(std::size_t outcome) const {
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].ref.outcome == outcome && slots[s].ref.term == Term::Intercept) return s;
  }
  return std::nullopt;
}

std::vector<std::string> RandomEffectLayout::labels() const {
  std::vector<std::string> out;
  out.reserve(slots.size());
  for (const auto& s : slots) out.push_back(s.label);
  return out;
}

std::size_t DesignLayout::level_dim(Level level) const {
  switch (level) {
    case Level::Patient: return spec.n_outcomes;
    case Level::Team: return team_effects.dim();
    case Level::Facility: return facility_effects.dim();
  }
  return 0;
}

std::size_t DesignLayout::parameter_count() const {
  std::size_t count = fixed.n_columns();
  for (Level level : kLevels) {
    const std::size_t q = level_dim(level);
    if (q == 0) continue;
    count += spec.structure(level) == CovStructure::Unstructured ? q * (q + 1) / 2 : 1;
  }
  return count;
}

FixedEffectLayout make_fixed_layout(const ModelSpec& spec, const CovariateNames& names) {
  FixedEffectLayout layout;
  for (std::size_t p = 0; p < spec.n_outcomes; ++p) {
    auto add = [&](Term term, std::size_t column) {
      CoefficientRef ref{p, term, term == Term::Intercept ? 0 : column};
      layout.slots.push_back({ref, slot_label(names, ref)});
    };
    add(Term::Intercept, 0);
    for (const auto& x : spec.patient_predictors) add(Term::Patient, x.column);
    for (const auto& z : spec.team_predictors) add(Term::Team, z.column);
    for (const auto& w : spec.facility_predictors) add(Term::Facility, w.column);
  }

  std::vector<std::size_t> parent(layout.slots.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (const auto& c : spec.equality_constraints) {
    auto a = layout.find_slot(c.first);
    auto b = layout.find_slot(c.second);
    if (!a || !b) {
      throw Error(ErrorCode::InvalidConstraint, "equality constraint references a coefficient absent from the model");
    }
    if (*a == *b) {
      throw Error(ErrorCode::InvalidConstraint, "equality constraint equates '" + layout.slots[*a].label +
                                                    "' with itself");
    }
    auto ra = uf_find(parent, *a);
    auto rb = uf_find(parent, *b);
    if (ra == rb) {
      throw Error(ErrorCode::InvalidConstraint, "equality constraint between '" + layout.slots[*a].label +
                                                    "' and '" + layout.slots[*b].label + "' is redundant");
    }
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }

  // Columns in order of the first slot of each merged class.
  std::vector<std::size_t> root_column(layout.slots.size(), static_cast<std::size_t>(-1));
  layout.slot_to_column.resize(layout.slots.size());
  for (std::size_t s = 0; s < layout.slots.size(); ++s) {
    const auto root = uf_find(parent, s);
    if (root_column[root] == static_cast<std::size_t>(-1)) {
      root_column[root] = layout.column_labels.size();
      layout.column_labels.push_back(layout.slots[s].label);
    } else {
      layout.column_labels[root_column[root]] += "=" + layout.slots[s].label;
    }
    layout.slot_to_column[s] = root_column[root];
  }
  return layout;
}

RandomEffectLayout make_team_layout(const ModelSpec& spec, const CovariateNames& names) {
  RandomEffectLayout layout;
  for (std::size_t p = 0; p < spec.n_outcomes; ++p) {
    if (spec.team_random_intercept) {
      CoefficientRef ref{p, Term::Intercept, 0};
      layout.slots.push_back({ref, slot_label(names, ref)});
    }
    for (const auto& x : spec.patient_predictors) {
      if (!x.random_over_team) continue;
      CoefficientRef ref{p, Term::Patient, x.column};
      layout.slots.push_back({ref, slot_label(names, ref)});
    }
  }
  return layout;
}

RandomEffectLayout make_facility_layout(const ModelSpec& spec, const CovariateNames& names) {
  RandomEffectLayout layout;
  for (std::size_t p = 0; p < spec.n_outcomes; ++p) {
    if (spec.facility_random_intercept) {
      CoefficientRef ref{p, Term::Intercept, 0};
      layout.slots.push_back({ref, slot_label(names, ref)});
    }
    for (const auto& x : spec.patient_predictors) {
      if (!x.random_over_facility) continue;
      CoefficientRef ref{p, Term::Patient, x.column};
      layout.slots.push_back({ref, slot_label(names, ref)});
    }
    for (const auto& z : spec.team_predictors) {
      if (!z.random_over_facility) continue;
      CoefficientRef ref{p, Term::Team, z.column};
      layout.slots.push_back({ref, slot_label(names, ref)});
    }
  }
  return layout;
}

Standardization compute_standardization(const PanelDataset& dataset, const HierarchyIndex& index,
                                        bool enabled) {
  Standardization s;
  std::vector<double> values;
  for (std::size_t c = 0; c < dataset.patient_covariate_names.size(); ++c) {
    values.clear();
    for (auto i : index.patient_order) values.push_back(dataset.patients[i].covariates[c]);
    s.patient.push_back(scaling_for(values, enabled));
  }
  for (std::size_t c = 0; c < dataset.team_covariate_names.size(); ++c) {
    values.clear();
    for (auto i : index.team_order) values.push_back(dataset.teams[i].covariates[c]);
    s.team.push_back(scaling_for(values, enabled));
  }
  for (std::size_t c = 0; c < dataset.facility_covariate_names.size(); ++c) {
    values.clear();
    for (auto i : index.facility_order) values.push_back(dataset.facilities[i].covariates[c]);
    s.facility.push_back(scaling_for(values, enabled));
  }
  return s;
}

PatientDesign patient_design(const DesignLayout& layout, const std::vector<double>& x_raw,
                             const std::vector<double>& z_raw, const std::vector<double>& w_raw) {
  if (x_raw.size() != layout.names.patient.size() || z_raw.size() != layout.names.team.size() ||
      w_raw.size() != layout.names.facility.size()) {
    throw Error(ErrorCode::DimensionMismatch, "covariate vector length does not match the design");
  }
  const auto& sc = layout.scaling;
  auto value = [&](const CoefficientRef& ref) {
    switch (ref.term) {
      case Term::Intercept: return 1.0;
      case Term::Patient: return sc.patient[ref.column].apply(x_raw[ref.column]);
      case Term::Team: return sc.team[ref.column].apply(z_raw[ref.column]);
      case Term::Facility: return sc.facility[ref.column].apply(w_raw[ref.column]);
    }
    return 0.0;
  };

  const auto P = static_cast<Eigen::Index>(layout.n_outcomes());
  PatientDesign d;
  d.fixed = Eigen::MatrixXd::Zero(P, static_cast<Eigen::Index>(layout.fixed.n_columns()));
  d.team = Eigen::MatrixXd::Zero(P, static_cast<Eigen::Index>(layout.team_effects.dim()));
  d.facility = Eigen::MatrixXd::Zero(P, static_cast<Eigen::Index>(layout.facility_effects.dim()));

  // A slot is active only on the pseudo-row of its own outcome.
  for (std::size_t s = 0; s < layout.fixed.n_slots(); ++s) {
    const auto& ref = layout.fixed.slots[s].ref;
    d.fixed(static_cast<Eigen::Index>(ref.outcome), static_cast<Eigen::Index>(layout.fixed.slot_to_column[s])) +=
        value(ref);
  }
  for (std::size_t s = 0; s < layout.team_effects.dim(); ++s) {
    const auto& ref = layout.team_effects.slots[s].ref;
    d.team(static_cast<Eigen::Index>(ref.outcome), static_cast<Eigen::Index>(s)) = value(ref);
  }
  for (std::size_t s = 0; s < layout.facility_effects.dim(); ++s) {
    const auto& ref = layout.facility_effects.slots[s].ref;
    d.facility(static_cast<Eigen::Index>(ref.outcome), static_cast<Eigen::Index>(s)) = value(ref);
  }
  return d;
}

DesignStructure build_design(const PanelDataset& dataset, const HierarchyIndex& index,
                             const ModelSpec& spec) {
  if (spec.n_outcomes != dataset.n_outcomes()) {
    throw Error(ErrorCode::DimensionMismatch, "model has " + std::to_string(spec.n_outcomes) +
                                                  " outcomes but data has " +
                                                  std::to_string(dataset.n_outcomes()));
  }
  check_columns(spec.patient_predictors, dataset.patient_covariate_names.size(), "patient");
  check_columns(spec.team_predictors, dataset.team_covariate_names.size(), "team");
  check_columns(spec.facility_predictors, dataset.facility_covariate_names.size(), "facility");

  DesignStructure design;
  DesignLayout& layout = design.layout;
  layout.spec = spec;
  layout.names = CovariateNames::of(dataset);
  layout.fixed = make_fixed_layout(spec, layout.names);
  layout.team_effects = make_team_layout(spec, layout.names);
  layout.facility_effects = make_facility_layout(spec, layout.names);
  layout.scaling = compute_standardization(dataset, index, spec.standardize);

  const auto n_fac = index.n_facilities();
  const auto n_team = index.n_teams();
  const auto n_pat = index.n_patients();
  const auto P = dataset.n_outcomes();

  layout.facility_covariates.resize(static_cast<Eigen::Index>(n_fac),
                                    static_cast<Eigen::Index>(dataset.facility_covariate_names.size()));
  for (std::size_t k = 0; k < n_fac; ++k) {
    const auto& f = dataset.facilities[index.facility_order[k]];
    layout.facility_ids.push_back(f.id);
    for (std::size_t c = 0; c < f.covariates.size(); ++c) {
      layout.facility_covariates(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = f.covariates[c];
    }
  }
  layout.team_covariates.resize(static_cast<Eigen::Index>(n_team),
                                static_cast<Eigen::Index>(dataset.team_covariate_names.size()));
  for (std::size_t j = 0; j < n_team; ++j) {
    const auto& t = dataset.teams[index.team_order[j]];
    layout.team_ids.push_back(t.id);
    for (std::size_t c = 0; c < t.covariates.size(); ++c) {
      layout.team_covariates(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = t.covariates[c];
    }
  }
  layout.facility_of_team = index.facility_of_team;
  design.team_of_patient = index.team_of_patient;
  design.patients_in_team = index.patients_in_team;
  design.teams_in_facility = index.teams_in_facility;

  const auto rows = static_cast<Eigen::Index>(n_pat * P);
  design.fixed_rows.resize(rows, static_cast<Eigen::Index>(layout.fixed.n_columns()));
  design.team_rows.resize(rows, static_cast<Eigen::Index>(layout.team_effects.dim()));
  design.facility_rows.resize(rows, static_cast<Eigen::Index>(layout.facility_effects.dim()));
  design.y.resize(rows);
  design.patient_ids.reserve(n_pat);

  for (std::size_t i = 0; i < n_pat; ++i) {
    const auto& patient = dataset.patients[index.patient_order[i]];
    const auto team = index.team_of_patient[i];
    const auto& z = dataset.teams[index.team_order[team]].covariates;
    const auto& w = dataset.facilities[index.facility_order[index.facility_of_team[team]]].covariates;
    const PatientDesign d = patient_design(layout, patient.covariates, z, w);
    const auto r0 = static_cast<Eigen::Index>(i * P);
    const auto nP = static_cast<Eigen::Index>(P);
    design.fixed_rows.middleRows(r0, nP) = d.fixed;
    design.team_rows.middleRows(r0, nP) = d.team;
    design.facility_rows.middleRows(r0, nP) = d.facility;
    for (std::size_t p = 0; p < P; ++p) design.y(r0 + static_cast<Eigen::Index>(p)) = patient.responses[p];
    design.patient_ids.push_back(patient.id);
  }
  return design;
}

DesignStructure build_design(const PanelDataset& dataset, const ModelSpec& spec) {
  const HierarchyIndex index = validate_hierarchy(dataset);
  return build_design(apply_transform(dataset, spec.response_transform), index, spec);
}

json layout_to_json(const DesignLayout& layout) {
  json j;
  j["spec"] = spec_to_json(layout.spec, layout.names);
  j["names"] = {{"responses", layout.names.responses},
                {"patient", layout.names.patient},
                {"team", layout.names.team},
                {"facility", layout.names.facility}};
  json slots = json::array();
  for (std::size_t s = 0; s < layout.fixed.n_slots(); ++s) {
    slots.push_back({{"label", layout.fixed.slots[s].label}, {"column", layout.fixed.slot_to_column[s]}});
  }
  j["fixed_effects"] = {{"slots", slots}, {"columns", layout.fixed.column_labels}};
  j["team_effects"] = layout.team_effects.labels();
  j["facility_effects"] = layout.facility_effects.labels();
  j["scaling"] = {{"patient", scaling_json(layout.scaling.patient)},
                  {"team", scaling_json(layout.scaling.team)},
                  {"facility", scaling_json(layout.scaling.facility)}};
  j["facility_ids"] = layout.facility_ids;
  j["team_ids"] = layout.team_ids;
  j["facility_of_team"] = layout.facility_of_team;
  j["team_covariates"] = matrix_json(layout.team_covariates);
  j["facility_covariates"] = matrix_json(layout.facility_covariates);
  return j;
}

DesignLayout layout_from_json(const json& j) {
  try {
    DesignLayout layout;
    const auto& n = j.at("names");
    layout.names.responses = n.at("responses").get<std::vector<std::string>>();
    layout.names.patient = n.at("patient").get<std::vector<std::string>>();
    layout.names.team = n.at("team").get<std::vector<std::string>>();
    layout.names.facility = n.at("facility").get<std::vector<std::string>>();
    layout.spec = spec_from_json(j.at("spec"), layout.names);
    layout.fixed = make_fixed_layout(layout.spec, layout.names);
    layout.team_effects = make_team_layout(layout.spec, layout.names);
    layout.facility_effects = make_facility_layout(layout.spec, layout.names);
    if (j.at("fixed_effects").at("columns").get<std::vector<std::string>>() != layout.fixed.column_labels ||
        j.at("team_effects").get<std::vector<std::string>>() != layout.team_effects.labels() ||
        j.at("facility_effects").get<std::vector<std::string>>() != layout.facility_effects.labels()) {
      throw Error(ErrorCode::LayoutMismatch, "stored layout labels disagree with the stored model spec");
    }
    layout.scaling.patient = scaling_from(j.at("scaling").at("patient"));
    layout.scaling.team = scaling_from(j.at("scaling").at("team"));
    layout.scaling.facility = scaling_from(j.at("scaling").at("facility"));
    layout.facility_ids = j.at("facility_ids").get<std::vector<std::string>>();
    layout.team_ids = j.at("team_ids").get<std::vector<std::string>>();
    layout.facility_of_team = j.at("facility_of_team").get<std::vector<std::size_t>>();
    layout.team_covariates =
        matrix_from(j.at("team_covariates"), static_cast<Eigen::Index>(layout.names.team.size()));
    layout.facility_covariates =
        matrix_from(j.at("facility_covariates"), static_cast<Eigen::Index>(layout.names.facility.size()));
    if (layout.scaling.patient.size() != layout.names.patient.size() ||
        layout.scaling.team.size() != layout.names.team.size() ||
        layout.scaling.facility.size() != layout.names.facility.size() ||
        layout.facility_of_team.size() != layout.team_ids.size() ||
        static_cast<std::size_t>(layout.team_covariates.rows()) != layout.team_ids.size() ||
        static_cast<std::size_t>(layout.facility_covariates.rows()) != layout.facility_ids.size()) {
      throw Error(ErrorCode::LayoutMismatch, "stored layout has inconsistent dimensions");
    }
    return layout;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::LayoutMismatch, std::string("malformed layout manifest: ") + e.what());
  }
}

}  // namespace hbmv
