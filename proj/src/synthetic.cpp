#include "hbmv/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hbmv/chain_io.hpp"
#include "hbmv/error.hpp"
#include "hbmv/random.hpp"

namespace hbmv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

std::vector<std::string> CovariateGenerator::columns() const {
  if (kind != Kind::Categorical) return {name};
  std::vector<std::string> out;
  for (std::size_t l = 1; l < levels.size(); ++l) out.push_back(name + "_" + levels[l]);
  return out;
}

namespace {

std::vector<std::string> columns_of(const std::vector<CovariateGenerator>& gens) {
  std::vector<std::string> out;
  for (const auto& g : gens) {
    const auto cols = g.columns();
    out.insert(out.end(), cols.begin(), cols.end());
  }
  return out;
}

void check_generator(const CovariateGenerator& g) {
  using Kind = CovariateGenerator::Kind;
  if (g.name.empty()) throw Error(ErrorCode::InvalidTruth, "covariate generator without a name");
  switch (g.kind) {
    case Kind::Binary:
      if (!(g.probability >= 0.0 && g.probability <= 1.0)) {
        throw Error(ErrorCode::InvalidTruth, "binary covariate '" + g.name + "' needs a probability in [0, 1]");
      }
      break;
    case Kind::Continuous:
      if (!(g.sd >= 0.0) || !std::isfinite(g.mean)) {
        throw Error(ErrorCode::InvalidTruth, "continuous covariate '" + g.name + "' needs a finite mean and sd >= 0");
      }
      break;
    case Kind::Categorical: {
      if (g.levels.size() < 2 || g.frequencies.size() != g.levels.size()) {
        throw Error(ErrorCode::InvalidTruth,
                    "categorical covariate '" + g.name + "' needs >= 2 levels with one frequency each");
      }
      double total = 0.0;
      for (double f : g.frequencies) {
        if (!(f >= 0.0)) throw Error(ErrorCode::InvalidTruth, "negative frequency in '" + g.name + "'");
        total += f;
      }
      if (!(total > 0.0)) throw Error(ErrorCode::InvalidTruth, "frequencies of '" + g.name + "' sum to zero");
      break;
    }
  }
}

void check_spd(const MatrixXd& m, std::size_t dim, const std::string& what) {
  if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim) {
    throw Error(ErrorCode::InvalidTruth, what + " covariance must be " + std::to_string(dim) + " x " +
                                             std::to_string(dim));
  }
  if (dim == 0) return;
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::InvalidTruth, what + " covariance is not symmetric");
  }
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::InvalidTruth, what + " covariance is not positive definite");
}

void append_draw(const CovariateGenerator& g, Rng& rng, std::vector<double>& out) {
  using Kind = CovariateGenerator::Kind;
  switch (g.kind) {
    case Kind::Binary: {
      std::bernoulli_distribution b(g.probability);
      out.push_back(b(rng) ? 1.0 : 0.0);
      break;
    }
    case Kind::Continuous: {
      std::normal_distribution<double> n(g.mean, g.sd);
      out.push_back(g.sd > 0.0 ? n(rng) : g.mean);
      break;
    }
    case Kind::Categorical: {
      std::discrete_distribution<std::size_t> d(g.frequencies.begin(), g.frequencies.end());
      const std::size_t level = d(rng);
      for (std::size_t l = 1; l < g.levels.size(); ++l) out.push_back(level == l ? 1.0 : 0.0);
      break;
    }
  }
}

std::vector<double> draw_covariates(const std::vector<CovariateGenerator>& gens, Rng& rng) {
  std::vector<double> out;
  for (const auto& g : gens) append_draw(g, rng, out);
  return out;
}

std::size_t draw_count(const CountRange& r, Rng& rng) {
  if (r.min == r.max) return r.min;
  std::uniform_int_distribution<std::size_t> u(r.min, r.max);
  return u(rng);
}

std::string padded(char prefix, std::size_t value, std::size_t width) {
  std::string digits = std::to_string(value);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

std::size_t width_for(std::size_t n, std::size_t minimum) { return std::max(minimum, std::to_string(n).size()); }

VectorXd draw_gaussian(const MatrixXd& cov, Rng& rng) {
  if (cov.rows() == 0) return VectorXd();
  Eigen::LLT<MatrixXd> llt(cov);
  return llt.matrixL() * standard_normal_vector(cov.rows(), rng);
}

double term_value(const CoefficientRef& ref, const std::vector<double>& x, const std::vector<double>& z,
                  const std::vector<double>& w) {
  switch (ref.term) {
    case Term::Intercept: return 1.0;
    case Term::Patient: return x[ref.column];
    case Term::Team: return z[ref.column];
    case Term::Facility: return w[ref.column];
  }
  return 0.0;
}

}  // namespace

CovariateNames GroundTruth::names() const {
  CovariateNames n;
  n.responses = response_names;
  if (n.responses.empty()) {
    for (std::size_t p = 0; p < spec.n_outcomes; ++p) n.responses.push_back("y_" + std::to_string(p + 1));
  }
  n.patient = columns_of(patient_covariates);
  n.team = columns_of(team_covariates);
  n.facility = columns_of(facility_covariates);
  return n;
}

const MatrixXd& GroundTruth::sigma(Level level) const {
  switch (level) {
    case Level::Patient: return sigma_patient;
    case Level::Team: return sigma_team;
    case Level::Facility: return sigma_facility;
  }
  return sigma_patient;
}

void validate_truth(const GroundTruth& truth) {
  if (truth.spec.n_outcomes < 1) throw Error(ErrorCode::InvalidTruth, "truth needs at least one outcome");
  if (!truth.response_names.empty() && truth.response_names.size() != truth.spec.n_outcomes) {
    throw Error(ErrorCode::InvalidTruth, "response name count differs from n_outcomes");
  }
  const auto& s = truth.shape;
  if (s.n_facilities < 1 || s.teams_per_facility.min < 1 || s.patients_per_team.min < 1 ||
      s.teams_per_facility.max < s.teams_per_facility.min || s.patients_per_team.max < s.patients_per_team.min) {
    throw Error(ErrorCode::InvalidTruth, "shape counts must be >= 1 with min <= max");
  }
  for (const auto* gens : {&truth.patient_covariates, &truth.team_covariates, &truth.facility_covariates}) {
    for (const auto& g : *gens) check_generator(g);
  }
  const CovariateNames names = truth.names();
  const FixedEffectLayout fixed = make_fixed_layout(truth.spec, names);
  if (static_cast<std::size_t>(truth.gamma.size()) != fixed.n_columns() || !truth.gamma.allFinite()) {
    throw Error(ErrorCode::InvalidTruth, "gamma must hold " + std::to_string(fixed.n_columns()) + " finite values");
  }
  check_spd(truth.sigma_patient, truth.spec.n_outcomes, "patient");
  check_spd(truth.sigma_team, make_team_layout(truth.spec, names).dim(), "team");
  check_spd(truth.sigma_facility, make_facility_layout(truth.spec, names).dim(), "facility");
}

SyntheticPanel generate(const GroundTruth& truth, std::uint64_t seed) {
  validate_truth(truth);
  const CovariateNames names = truth.names();
  const FixedEffectLayout fixed = make_fixed_layout(truth.spec, names);
  const RandomEffectLayout team_layout = make_team_layout(truth.spec, names);
  const RandomEffectLayout fac_layout = make_facility_layout(truth.spec, names);
  const std::size_t P = truth.spec.n_outcomes;

  Rng rng = make_rng(seed, 0x5EED);
  SyntheticPanel out;
  PanelDataset& ds = out.dataset;
  ds.response_names = names.responses;
  ds.patient_covariate_names = names.patient;
  ds.team_covariate_names = names.team;
  ds.facility_covariate_names = names.facility;
  out.ledger.effect_labels_team = team_layout.labels();
  out.ledger.effect_labels_facility = fac_layout.labels();

  std::vector<std::size_t> teams_per(truth.shape.n_facilities);
  std::vector<std::vector<std::size_t>> patients_per(truth.shape.n_facilities);
  std::size_t n_teams = 0, n_patients = 0;
  for (std::size_t k = 0; k < truth.shape.n_facilities; ++k) {
    teams_per[k] = draw_count(truth.shape.teams_per_facility, rng);
    for (std::size_t j = 0; j < teams_per[k]; ++j) {
      patients_per[k].push_back(draw_count(truth.shape.patients_per_team, rng));
      n_patients += patients_per[k].back();
    }
    n_teams += teams_per[k];
  }
  const std::size_t fw = width_for(truth.shape.n_facilities, 3);
  const std::size_t tw = width_for(n_teams, 4);
  const std::size_t pw = width_for(n_patients, 6);

  std::size_t team_counter = 0, patient_counter = 0;
  for (std::size_t k = 0; k < truth.shape.n_facilities; ++k) {
    FacilityRecord f;
    f.id = padded('F', k + 1, fw);
    f.covariates = draw_covariates(truth.facility_covariates, rng);
    const VectorXd u_f = draw_gaussian(truth.sigma_facility, rng);
    out.ledger.facility_effects[f.id] = u_f;

    for (std::size_t j = 0; j < teams_per[k]; ++j) {
      TeamRecord t;
      t.id = padded('T', ++team_counter, tw);
      t.facility_id = f.id;
      t.covariates = draw_covariates(truth.team_covariates, rng);
      const VectorXd u_t = draw_gaussian(truth.sigma_team, rng);
      out.ledger.team_effects[t.id] = u_t;

      for (std::size_t i = 0; i < patients_per[k][j]; ++i) {
        PatientRecord p;
        p.id = padded('P', ++patient_counter, pw);
        p.team_id = t.id;
        p.covariates = draw_covariates(truth.patient_covariates, rng);
        const VectorXd e = draw_gaussian(truth.sigma_patient, rng);
        VectorXd eta = e;
        for (std::size_t s = 0; s < fixed.n_slots(); ++s) {
          const auto& ref = fixed.slots[s].ref;
          eta(static_cast<Index>(ref.outcome)) +=
              truth.gamma(static_cast<Index>(fixed.slot_to_column[s])) * term_value(ref, p.covariates, t.covariates, f.covariates);
        }
        for (std::size_t s = 0; s < team_layout.dim(); ++s) {
          const auto& ref = team_layout.slots[s].ref;
          eta(static_cast<Index>(ref.outcome)) +=
              u_t(static_cast<Index>(s)) * term_value(ref, p.covariates, t.covariates, f.covariates);
        }
        for (std::size_t s = 0; s < fac_layout.dim(); ++s) {
          const auto& ref = fac_layout.slots[s].ref;
          eta(static_cast<Index>(ref.outcome)) +=
              u_f(static_cast<Index>(s)) * term_value(ref, p.covariates, t.covariates, f.covariates);
        }
        p.responses.resize(P);
        for (std::size_t q = 0; q < P; ++q) {
          p.responses[q] = truth.spec.response_transform == ResponseTransform::Log ? std::exp(eta(static_cast<Index>(q)))
                                                                                   : eta(static_cast<Index>(q));
        }
        out.ledger.residuals[p.id] = e;
        ds.patients.push_back(std::move(p));
      }
      ds.teams.push_back(std::move(t));
    }
    ds.facilities.push_back(std::move(f));
  }
  return out;
}

RecoveryReport recovery_report(const GroundTruth& truth, const FitSummary& fit) {
  const CovariateNames names = truth.names();
  DesignLayout layout;
  layout.spec = truth.spec;
  layout.names = names;
  layout.fixed = make_fixed_layout(truth.spec, names);
  layout.team_effects = make_team_layout(truth.spec, names);
  layout.facility_effects = make_facility_layout(truth.spec, names);

  std::size_t fit_gamma = 0;
  for (const auto& p : fit.parameters) {
    if (p.name.rfind("gamma[", 0) == 0) ++fit_gamma;
  }
  if (fit_gamma != layout.fixed.n_columns()) {
    throw Error(ErrorCode::LayoutMismatch, "fit has " + std::to_string(fit_gamma) + " fixed effects, truth has " +
                                               std::to_string(layout.fixed.n_columns()));
  }

  RecoveryReport report;
  auto add = [&](const std::string& name, double value) {
    const ParameterSummary* s = fit.find(name);
    if (s == nullptr) throw Error(ErrorCode::LayoutMismatch, "fit summary has no parameter '" + name + "'");
    RecoveryRow row{name, value, s->mean, s->hpd, s->hpd.lower <= value && value <= s->hpd.upper};
    report.rows.push_back(row);
  };
  for (std::size_t c = 0; c < layout.fixed.n_columns(); ++c) {
    add(gamma_name(layout.fixed.column_labels[c]), truth.gamma(static_cast<Index>(c)));
  }
  const std::size_t n_fixed = report.rows.size();
  for (Level level : kLevels) {
    const auto labels = covariance_labels(layout, level);
    const MatrixXd& sigma = truth.sigma(level);
    for (std::size_t r = 0; r < labels.size(); ++r) {
      for (std::size_t c = r; c < labels.size(); ++c) {
        add(sigma_name(level, labels[r], labels[c]), sigma(static_cast<Index>(r), static_cast<Index>(c)));
      }
    }
  }
  std::size_t covered = 0, fixed_covered = 0;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    if (!report.rows[i].covered) continue;
    ++covered;
    if (i < n_fixed) ++fixed_covered;
  }
  report.coverage = static_cast<double>(covered) / static_cast<double>(report.rows.size());
  report.fixed_coverage = n_fixed == 0 ? 0.0 : static_cast<double>(fixed_covered) / static_cast<double>(n_fixed);
  return report;
}

namespace {

CountRange range_from_json(const json& j) {
  if (j.is_array()) {
    if (j.size() != 2) throw Error(ErrorCode::InvalidTruth, "count ranges are [min, max]");
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
  }
  const auto n = j.get<long long>();
  if (n < 1) throw Error(ErrorCode::InvalidTruth, "shape counts must be >= 1");
  return {static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
}

json range_to_json(const CountRange& r) {
  if (r.min == r.max) return r.min;
  return json::array({r.min, r.max});
}

CovariateGenerator generator_from_json(const json& j) {
  CovariateGenerator g;
  g.name = j.at("name").get<std::string>();
  const auto type = j.value("type", std::string("continuous"));
  if (type == "binary") {
    g.kind = CovariateGenerator::Kind::Binary;
    g.probability = j.value("p", 0.5);
  } else if (type == "continuous") {
    g.kind = CovariateGenerator::Kind::Continuous;
    g.mean = j.value("mean", 0.0);
    g.sd = j.value("sd", 1.0);
  } else if (type == "categorical") {
    g.kind = CovariateGenerator::Kind::Categorical;
    g.levels = j.at("levels").get<std::vector<std::string>>();
    g.frequencies = j.at("frequencies").get<std::vector<double>>();
  } else {
    throw Error(ErrorCode::InvalidTruth, "unknown covariate type '" + type + "'");
  }
  return g;
}

json generator_to_json(const CovariateGenerator& g) {
  switch (g.kind) {
    case CovariateGenerator::Kind::Binary: return {{"name", g.name}, {"type", "binary"}, {"p", g.probability}};
    case CovariateGenerator::Kind::Continuous:
      return {{"name", g.name}, {"type", "continuous"}, {"mean", g.mean}, {"sd", g.sd}};
    case CovariateGenerator::Kind::Categorical:
      return {{"name", g.name}, {"type", "categorical"}, {"levels", g.levels}, {"frequencies", g.frequencies}};
  }
  return {};
}

std::vector<CovariateGenerator> generators_from_json(const json& j, const char* level) {
  std::vector<CovariateGenerator> out;
  if (!j.contains(level)) return out;
  for (const auto& g : j.at(level)) out.push_back(generator_from_json(g));
  return out;
}

MatrixXd matrix_from_json(const json& j, std::size_t dim) {
  const auto d = static_cast<Index>(dim);
  if (j.is_number()) return MatrixXd::Identity(d, d) * j.get<double>();
  const auto rows = j.get<std::vector<std::vector<double>>>();
  MatrixXd m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Index>(rows[r].size()) != m.cols()) throw Error(ErrorCode::InvalidTruth, "ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

GroundTruth truth_from_json(const json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidTruth, "truth must be a JSON object");
    GroundTruth t;
    if (j.contains("responses")) t.response_names = j.at("responses").get<std::vector<std::string>>();
    const json& shape = j.at("shape");
    t.shape.n_facilities = range_from_json(shape.at("facilities")).min;
    t.shape.teams_per_facility = range_from_json(shape.at("teams_per_facility"));
    t.shape.patients_per_team = range_from_json(shape.at("patients_per_team"));
    const json cov = j.value("covariates", json::object());
    t.patient_covariates = generators_from_json(cov, "patient");
    t.team_covariates = generators_from_json(cov, "team");
    t.facility_covariates = generators_from_json(cov, "facility");

    CovariateNames names;
    names.responses = t.response_names;
    names.patient = columns_of(t.patient_covariates);
    names.team = columns_of(t.team_covariates);
    names.facility = columns_of(t.facility_covariates);
    t.spec = spec_from_json(j.value("spec", json::object()), names);
    names = t.names();

    const FixedEffectLayout fixed = make_fixed_layout(t.spec, names);
    const json& g = j.at("gamma");
    t.gamma = VectorXd::Zero(static_cast<Index>(fixed.n_columns()));
    if (g.is_array()) {
      const auto values = g.get<std::vector<double>>();
      if (values.size() != fixed.n_columns()) {
        throw Error(ErrorCode::InvalidTruth, "gamma must hold " + std::to_string(fixed.n_columns()) + " values");
      }
      for (std::size_t c = 0; c < values.size(); ++c) t.gamma(static_cast<Index>(c)) = values[c];
    } else {
      for (std::size_t c = 0; c < fixed.n_columns(); ++c) {
        const auto& label = fixed.column_labels[c];
        if (!g.contains(label)) throw Error(ErrorCode::InvalidTruth, "gamma lacks a value for '" + label + "'");
        t.gamma(static_cast<Index>(c)) = g.at(label).get<double>();
      }
      if (g.size() != fixed.n_columns()) throw Error(ErrorCode::InvalidTruth, "gamma names unknown coefficients");
    }

    const json& sig = j.at("sigma");
    const std::size_t qt = make_team_layout(t.spec, names).dim();
    const std::size_t qf = make_facility_layout(t.spec, names).dim();
    t.sigma_patient = matrix_from_json(sig.at("patient"), t.spec.n_outcomes);
    t.sigma_team = sig.contains("team") ? matrix_from_json(sig.at("team"), qt) : MatrixXd(0, 0);
    t.sigma_facility = sig.contains("facility") ? matrix_from_json(sig.at("facility"), qf) : MatrixXd(0, 0);
    validate_truth(t);
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidTruth, std::string("malformed truth: ") + e.what());
  }
}

json truth_to_json(const GroundTruth& t) {
  const CovariateNames names = t.names();
  json j;
  j["responses"] = names.responses;
  j["shape"] = {{"facilities", t.shape.n_facilities},
                {"teams_per_facility", range_to_json(t.shape.teams_per_facility)},
                {"patients_per_team", range_to_json(t.shape.patients_per_team)}};
  json cov = json::object();
  for (auto [key, gens] : {std::pair{"patient", &t.patient_covariates}, std::pair{"team", &t.team_covariates},
                           std::pair{"facility", &t.facility_covariates}}) {
    cov[key] = json::array();
    for (const auto& g : *gens) cov[key].push_back(generator_to_json(g));
  }
  j["covariates"] = cov;
  j["spec"] = spec_to_json(t.spec, names);
  const FixedEffectLayout fixed = make_fixed_layout(t.spec, names);
  json g = json::object();
  for (std::size_t c = 0; c < fixed.n_columns(); ++c) g[fixed.column_labels[c]] = t.gamma(static_cast<Index>(c));
  j["gamma"] = g;
  j["sigma"] = {{"patient", matrix_to_json(t.sigma_patient)},
                {"team", matrix_to_json(t.sigma_team)},
                {"facility", matrix_to_json(t.sigma_facility)}};
  return j;
}

json ledger_to_json(const EffectsLedger& ledger) {
  json j;
  j["team_effect_labels"] = ledger.effect_labels_team;
  j["facility_effect_labels"] = ledger.effect_labels_facility;
  j["team_effects"] = json::object();
  for (const auto& [id, v] : ledger.team_effects) j["team_effects"][id] = vector_to_json(v);
  j["facility_effects"] = json::object();
  for (const auto& [id, v] : ledger.facility_effects) j["facility_effects"][id] = vector_to_json(v);
  j["residuals"] = json::object();
  for (const auto& [id, v] : ledger.residuals) j["residuals"][id] = vector_to_json(v);
  return j;
}

}  // namespace hbmv
