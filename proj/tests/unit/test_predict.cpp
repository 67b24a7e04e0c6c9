#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "helpers.hpp"
#include "hbmv/csv.hpp"
#include "hbmv/error.hpp"
#include "hbmv/predict.hpp"
#include "hbmv/synthetic.hpp"

using namespace hbmv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

CsvTable table_of(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in, "requests");
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected hbmv::Error");
  return ErrorCode::Usage;
}

// Hand-built draws on the small panel: intercepts 2 and 5, slopes 0.1 and -0.2
// on x_age, zero unit effects.
struct Fixture {
  DesignStructure design;
  std::vector<ChainSamples> chains;
};

Fixture hand_built(double team_var = 0.5, double facility_var = 0.25) {
  ModelSpec spec = unconditional_spec(2);
  spec.standardize = false;
  spec.patient_predictors = {{0, false, false}};
  Fixture f{build_design(testing::small_panel(), spec), {}};
  ChainSamples c;
  for (int d = 0; d < 4; ++d) {
    ParameterState s;
    s.gamma = Eigen::Vector4d(2.0, 0.1, 5.0, -0.2);
    s.team_effects = MatrixXd::Zero(3, 2);
    s.facility_effects = MatrixXd::Zero(2, 2);
    s.sigma_patient = testing::cov2(1.0, 2.0, 0.5);
    s.sigma_team = MatrixXd::Identity(2, 2) * team_var;
    s.sigma_facility = MatrixXd::Identity(2, 2) * facility_var;
    c.draws.push_back(s);
    c.deviance.push_back(0.0);
  }
  f.chains.push_back(c);
  return f;
}

PredictionRequest request(double age, const std::string& team, const std::string& facility = "") {
  PredictionRequest r;
  r.x = {age, 0.0};
  r.team_id = team;
  r.facility_id = facility;
  return r;
}

}  // namespace

TEST_CASE("zero covariates and zero effects predict the intercepts") {
  const auto f = hand_built();
  const auto s = posterior_predict(f.chains, f.design.layout, request(0.0, "T1"));
  REQUIRE(s.outcomes.size() == 2);
  CHECK(s.outcomes[0].name == "y_pc");
  CHECK(s.outcomes[0].mean == doctest::Approx(2.0));
  CHECK(s.outcomes[1].mean == doctest::Approx(5.0));
  CHECK(s.outcomes[0].sd == doctest::Approx(1.0));
  CHECK(s.outcomes[1].sd == doctest::Approx(std::sqrt(2.0)));
  CHECK(s.correlation(0, 1) == doctest::Approx(0.5));
  // a single Gaussian: equal-tailed 95% is mean +- 1.96 sd
  CHECK(s.outcomes[0].interval.lower == doctest::Approx(2.0 - 1.959964).epsilon(1e-6));
  CHECK(s.outcomes[0].interval.upper == doctest::Approx(2.0 + 1.959964).epsilon(1e-6));
  CHECK_FALSE(s.new_team);
  CHECK_FALSE(s.back_transformed);
}

TEST_CASE("new units add their level covariance to the predictive spread") {
  const auto f = hand_built(0.5, 0.25);
  PredictOptions allow;
  allow.allow_new_units = true;
  const auto known = posterior_predict(f.chains, f.design.layout, request(10.0, "T1"), allow);
  auto new_team_req = request(10.0, "T9", "F1");
  new_team_req.z = {1000.0};
  const auto new_team = posterior_predict(f.chains, f.design.layout, new_team_req, allow);
  auto new_fac_req = request(10.0, "T9", "F9");
  new_fac_req.w = {0.0};
  new_fac_req.z = {1000.0};
  const auto new_fac = posterior_predict(f.chains, f.design.layout, new_fac_req, allow);
  CHECK(new_team.new_team);
  CHECK_FALSE(new_team.new_facility);
  CHECK(new_fac.new_facility);
  CHECK(new_team.outcomes[0].sd * new_team.outcomes[0].sd == doctest::Approx(1.5));
  CHECK(new_fac.outcomes[0].sd * new_fac.outcomes[0].sd == doctest::Approx(1.75));
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK(known.outcomes[p].mean == doctest::Approx(new_fac.outcomes[p].mean));
    CHECK(new_team.outcomes[p].sd >= known.outcomes[p].sd);
    CHECK(new_fac.outcomes[p].sd >= new_team.outcomes[p].sd);
    CHECK(new_fac.outcomes[p].interval.upper - new_fac.outcomes[p].interval.lower >
          known.outcomes[p].interval.upper - known.outcomes[p].interval.lower);
  }
}

TEST_CASE("predictive mean is affine in the patient covariates") {
  auto truth = testing::intercept_truth(4, 3, 10, testing::cov2(1.0, 1.0, 0.2), testing::cov2(0.3, 0.3, 0.0),
                                        testing::cov2(0.2, 0.2, 0.0));
  truth.patient_covariates = {testing::continuous("x_a", 3.0, 2.0)};
  truth.spec.patient_predictors = {{0, true, false}};
  truth.spec.standardize = true;
  truth.gamma = Eigen::Vector4d(1.0, 0.5, 2.0, -0.5);
  truth.sigma_team = MatrixXd::Identity(4, 4) * 0.2;
  const auto ds = generate(truth, 3).dataset;
  const auto design = build_design(ds, truth.spec);
  const auto chains = run_chains(design, default_priors(design.layout), testing::config(300, 100, 2));
  auto at = [&](double x) {
    PredictionRequest r;
    r.x = {x};
    r.team_id = design.layout.team_ids[1];
    return posterior_predict(chains, design.layout, r);
  };
  const auto a = at(-1.0), b = at(7.0), mid = at(3.0);
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK(mid.outcomes[p].mean == doctest::Approx(0.5 * (a.outcomes[p].mean + b.outcomes[p].mean)).epsilon(1e-10));
  }
}

TEST_CASE("prediction errors") {
  const auto f = hand_built();
  CHECK(code_of([&] { posterior_predict(f.chains, f.design.layout, request(1.0, "T9")); }) == ErrorCode::UnknownUnit);
  CHECK(code_of([&] { posterior_predict(f.chains, f.design.layout, request(1.0, "T1", "F2")); }) ==
        ErrorCode::CrossNesting);
  auto bad = request(1.0, "T1");
  bad.x.push_back(3.0);
  CHECK(code_of([&] { posterior_predict(f.chains, f.design.layout, bad); }) == ErrorCode::DimensionMismatch);
  PredictOptions allow;
  allow.allow_new_units = true;
  auto no_w = request(1.0, "T9", "F9");
  no_w.z = {1.0};
  CHECK(code_of([&] { posterior_predict(f.chains, f.design.layout, no_w, allow); }) == ErrorCode::DimensionMismatch);
  std::vector<ChainSamples> empty(1);
  CHECK(code_of([&] { posterior_predict(empty, f.design.layout, request(1.0, "T1")); }) == ErrorCode::EmptySamples);
}

TEST_CASE("log-scale predictions are positive and use lognormal moments") {
  const auto f = [] {
    auto fx = hand_built();
    fx.design.layout.spec.response_transform = ResponseTransform::Log;
    return fx;
  }();
  const auto s = posterior_predict(f.chains, f.design.layout, request(0.0, "T1"));
  CHECK(s.back_transformed);
  CHECK(s.outcomes[0].mean == doctest::Approx(std::exp(2.0 + 0.5)));
  const double v = (std::exp(1.0) - 1.0) * std::exp(2.0 * 2.0 + 1.0);
  CHECK(s.outcomes[0].sd == doctest::Approx(std::sqrt(v)));
  for (const auto& o : s.outcomes) {
    CHECK(o.interval.lower > 0.0);
    CHECK(o.mean > 0.0);
  }
  auto raw = request(0.0, "T1");
  raw.back_transform = false;
  CHECK(posterior_predict(f.chains, f.design.layout, raw).outcomes[0].mean == doctest::Approx(2.0));
}

TEST_CASE("held-out patients in known teams are covered at the nominal rate") {
  auto truth = testing::intercept_truth(10, 5, 40, testing::cov2(1.0, 1.5, 0.5), testing::cov2(0.4, 0.3, 0.2),
                                        testing::cov2(0.3, 0.5, 0.1));
  truth.patient_covariates = {testing::continuous("x_a", 0.0, 1.0), testing::binary("x_b", 0.4)};
  truth.spec.patient_predictors = {{0, false, false}, {1, false, false}};
  truth.gamma = VectorXd(6);
  truth.gamma << 1.0, 0.5, -0.3, 2.0, -0.4, 0.8;
  auto ds = generate(truth, 99).dataset;

  // Hold out ten patients per team; they share the fitted teams' effects.
  std::map<std::string, int> seen;
  PanelDataset train = ds;
  train.patients.clear();
  std::vector<PatientRecord> held;
  for (const auto& p : ds.patients) (seen[p.team_id]++ < 10 ? held : train.patients).push_back(p);
  REQUIRE(held.size() == 500);

  const auto design = build_design(train, truth.spec);
  const auto chains = run_chains(design, default_priors(design.layout), testing::config(2500, 500, 2, 1, 4));
  int covered = 0, total = 0;
  for (const auto& p : held) {
    PredictionRequest r;
    r.x = p.covariates;
    r.team_id = p.team_id;
    const auto s = posterior_predict(chains, design.layout, r);
    for (std::size_t k = 0; k < 2; ++k) {
      covered += s.outcomes[k].interval.lower <= p.responses[k] && p.responses[k] <= s.outcomes[k].interval.upper;
      ++total;
    }
    if (total == 2) CHECK(s.correlation(0, 1) > 0.0);
  }
  const double rate = static_cast<double>(covered) / total;
  MESSAGE("held-out coverage " << rate);
  CHECK(rate >= 0.92);
  CHECK(rate <= 0.98);
}

TEST_CASE("request CSV parsing and prediction CSV layout") {
  const auto f = hand_built();
  const auto table = table_of("request_id,team_id,facility_id,x_age,x_female\nr1,T1,,40,1\nr2,T3,F2,55,0\n");
  const auto reqs = requests_from_csv(table, f.design.layout);
  REQUIRE(reqs.size() == 2);
  CHECK(reqs[0].x == std::vector<double>{40.0, 1.0});
  CHECK(reqs[1].facility_id == "F2");
  std::vector<PredictiveSummary> results;
  for (const auto& r : reqs) results.push_back(posterior_predict(f.chains, f.design.layout, r));
  const auto csv = predictions_csv(reqs, results, f.design.layout, {"r1", "r2"});
  CHECK(csv.rfind("request_id,team_id,facility_id,new_team,new_facility,y_pc_mean,y_pc_sd,y_pc_lower,y_pc_upper,"
                  "y_npc_mean,y_npc_sd,y_npc_lower,y_npc_upper\nr1,T1,,0,0,",
                  0) == 0);
  CHECK(code_of([&] { requests_from_csv(table_of("team_id,x_age\nT1,3\n"), f.design.layout); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { requests_from_csv(table_of("x_age,x_female\n3,1\n"), f.design.layout); }) ==
        ErrorCode::DimensionMismatch);
}
