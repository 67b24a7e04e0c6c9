#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "helpers.hpp"
#include "hbmv/error.hpp"

namespace fs = std::filesystem;
using hbmv::ErrorCode;
using nlohmann::json;

namespace {

const char* kTruth = R"({
  "responses": ["y_pc", "y_npc"],
  "shape": {"facilities": 4, "teams_per_facility": 3, "patients_per_team": 10},
  "covariates": {
    "patient": [{"name": "x_age", "type": "continuous", "mean": 60, "sd": 10},
                {"name": "x_female", "type": "binary", "p": 0.4}],
    "team": [{"name": "z_size", "type": "continuous", "mean": 1200, "sd": 200}]
  },
  "spec": {"patient_predictors": ["x_age", "x_female"], "team_predictors": ["z_size"]},
  "gamma": [1.0, 0.02, 0.3, 0.0005, 2.0, 0.03, -0.2, 0.0],
  "sigma": {"patient": [[0.6, 0.2], [0.2, 0.8]], "team": 0.2, "facility": 0.3}
})";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = hbmv::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

// Simulated data directory shared by most cases.
fs::path simulated(const std::string& name) {
  const auto dir = testing::temp_dir(name);
  spit(dir / "truth.json", kTruth);
  const auto r = run({"simulate", "--truth", (dir / "truth.json").string(), "--seed", "3", "--out",
                      (dir / "data").string()});
  REQUIRE(r.code == 0);
  return dir;
}

std::vector<std::string> fit_args(const fs::path& dir, const fs::path& out) {
  return {"fit",          "--data",  (dir / "data" / "patients.csv").string(), "--team-data",
          (dir / "data" / "teams.csv").string(), "--facility-data", (dir / "data" / "facilities.csv").string(),
          "--iterations", "100",     "--burnin", "50", "--thin", "10", "--chains", "2", "--seed", "5",
          "--out",        out.string()};
}

}  // namespace

TEST_CASE("fit writes chains, summary, tables and manifest") {
  const auto dir = simulated("cli_fit");
  const auto r = run(fit_args(dir, dir / "fit"));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"chain_1.csv", "chain_2.csv", "layout.json", "summary.json", "variance_table.csv", "icc.csv",
                        "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / "fit" / f), f);
  }
  // header plus (100 - 50) / 10 retained draws
  CHECK(lines(slurp(dir / "fit" / "chain_1.csv")) == 1 + 5);
  const auto summary = json::parse(slurp(dir / "fit" / "summary.json"));
  CHECK(summary.contains("dic"));
  CHECK(summary.contains("icc_table"));
  CHECK(summary.contains("correlations"));
  CHECK(summary["n_draws"] == 10);
  const auto manifest = json::parse(slurp(dir / "fit" / "manifest.json"));
  CHECK(manifest["seed"] == 5);
  CHECK(manifest.contains("outputs"));
}

TEST_CASE("fit is byte-reproducible for a fixed seed") {
  const auto dir = simulated("cli_det");
  REQUIRE(run(fit_args(dir, dir / "a")).code == 0);
  REQUIRE(run(fit_args(dir, dir / "b")).code == 0);
  for (const char* f : {"chain_1.csv", "chain_2.csv", "summary.json", "variance_table.csv", "icc.csv", "manifest.json"}) {
    CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  }
}

TEST_CASE("fit with a spec naming an absent covariate fails with DimensionMismatch") {
  const auto dir = simulated("cli_missing");
  spit(dir / "spec.json", R"({"patient_predictors": ["x_income"]})");
  auto args = fit_args(dir, dir / "fit");
  args.insert(args.end(), {"--spec", (dir / "spec.json").string()});
  const auto r = run(args);
  CHECK(r.code == hbmv::exit_code(ErrorCode::DimensionMismatch));
  const auto err = json::parse(r.err);
  CHECK(err["error"] == "DimensionMismatch");
  CHECK(err["exit_code"] == r.code);
}

TEST_CASE("bad flags exit with 2") {
  CHECK(run({"fit", "--iterations", "10"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
}

TEST_CASE("ladder with identical specs keeps the first and a single spec is a usage error") {
  const auto dir = simulated("cli_ladder");
  spit(dir / "same.json", R"([{"name": "a", "patient_predictors": ["x_age"]},
                               {"name": "b", "patient_predictors": ["x_age"]}])");
  std::vector<std::string> common{"--data", (dir / "data" / "patients.csv").string(), "--team-data",
                                  (dir / "data" / "teams.csv").string(), "--iterations", "200", "--burnin", "100",
                                  "--thin", "2", "--chains", "1", "--seed", "8"};
  auto args = std::vector<std::string>{"ladder", "--ladder", (dir / "same.json").string(), "--out",
                                       (dir / "ladder").string()};
  args.insert(args.end(), common.begin(), common.end());
  const auto r = run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto report = json::parse(slurp(dir / "ladder" / "ladder.json"));
  CHECK(report["selected"].get<std::string>().find("a") != std::string::npos);
  CHECK(r.out.find("selected") != std::string::npos);

  spit(dir / "one.json", R"([{"name": "a"}])");
  args = {"ladder", "--ladder", (dir / "one.json").string(), "--out", (dir / "ladder1").string()};
  args.insert(args.end(), common.begin(), common.end());
  CHECK(run(args).code == hbmv::exit_code(ErrorCode::Usage));
}

TEST_CASE("default ladder runs six models twice") {
  const auto dir = simulated("cli_default_ladder");
  const auto r = run({"ladder", "--data", (dir / "data" / "patients.csv").string(), "--team-data",
                      (dir / "data" / "teams.csv").string(), "--iterations", "150", "--burnin", "50", "--thin", "5",
                      "--chains", "1", "--out", (dir / "ladder").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto report = json::parse(slurp(dir / "ladder" / "ladder.json"));
  CHECK(report["models"].size() == 6);
  std::size_t summaries = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "ladder" / "models")) {
    summaries += e.path().filename().string().find("_summary.json") != std::string::npos;
  }
  CHECK(summaries == 12);
}

TEST_CASE("simulate is deterministic and honours --counts") {
  const auto dir = testing::temp_dir("cli_sim");
  spit(dir / "truth.json", kTruth);
  const auto truth = (dir / "truth.json").string();
  REQUIRE(run({"simulate", "--truth", truth, "--seed", "9", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"simulate", "--truth", truth, "--seed", "9", "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"patients.csv", "teams.csv", "facilities.csv", "effects.json", "manifest.json"}) {
    CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  }
  REQUIRE(run({"simulate", "--truth", truth, "--counts", "2", "3", "4", "--out", (dir / "c").string()}).code == 0);
  CHECK(lines(slurp(dir / "c" / "patients.csv")) == 1 + 24);
  CHECK(lines(slurp(dir / "c" / "teams.csv")) == 1 + 6);

  auto bad = json::parse(kTruth);
  bad["sigma"]["patient"] = {{1.0, 2.0}, {2.0, 1.0}};
  spit(dir / "bad.json", bad.dump());
  const auto r = run({"simulate", "--truth", (dir / "bad.json").string(), "--out", (dir / "d").string()});
  CHECK(r.code == hbmv::exit_code(ErrorCode::InvalidTruth));
}

TEST_CASE("predict from a fit directory") {
  const auto dir = simulated("cli_predict");
  REQUIRE(run(fit_args(dir, dir / "fit")).code == 0);

  spit(dir / "empty.csv", "");
  auto r = run({"predict", "--fit", (dir / "fit").string(), "--requests", (dir / "empty.csv").string(), "--out",
                (dir / "empty_out.csv").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto header_only = slurp(dir / "empty_out.csv");
  CHECK(lines(header_only) == 1);
  CHECK(header_only.rfind("request_id,team_id,facility_id,new_team,new_facility,y_pc_mean", 0) == 0);

  spit(dir / "req.csv", "request_id,team_id,facility_id,x_age,x_female,z_size\nr1,T0001,,55,1,\nr2,T9999,F001,40,0,1100\n");
  r = run({"predict", "--fit", (dir / "fit").string(), "--requests", (dir / "req.csv").string(), "--out",
           (dir / "out.csv").string()});
  CHECK(r.code == hbmv::exit_code(ErrorCode::UnknownUnit));

  r = run({"predict", "--fit", (dir / "fit").string(), "--requests", (dir / "req.csv").string(), "--new-unit",
           "--out", (dir / "out.csv").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto out = slurp(dir / "out.csv");
  CHECK(lines(out) == 3);
  CHECK(out.find("\nr2,T9999,F001,1,0,") != std::string::npos);
  CHECK(fs::exists(dir / "out.csv.manifest.json"));
}

TEST_CASE("constraint-test writes a chi-square report") {
  const auto dir = simulated("cli_ctest");
  spit(dir / "spec.json", R"({"patient_predictors": ["x_female"],
                              "equality_constraints": [{"term": "patient", "column": "x_female", "outcomes": [1, 2]}]})");
  const auto r = run({"constraint-test", "--data", (dir / "data" / "patients.csv").string(), "--team-data",
                      (dir / "data" / "teams.csv").string(), "--spec", (dir / "spec.json").string(), "--iterations",
                      "300", "--burnin", "100", "--thin", "2", "--chains", "1", "--out", (dir / "ct").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = json::parse(slurp(dir / "ct" / "constraint_test.json"));
  CHECK(j.dump().find("p_value") != std::string::npos);

  spit(dir / "free.json", R"({"patient_predictors": ["x_female"]})");
  const auto bad = run({"constraint-test", "--data", (dir / "data" / "patients.csv").string(), "--spec",
                        (dir / "free.json").string(), "--iterations", "50", "--burnin", "10", "--out",
                        (dir / "ct2").string()});
  CHECK(bad.code == hbmv::exit_code(ErrorCode::Usage));
}

TEST_CASE("encode turns a categorical column into reference-coded dummies") {
  const auto dir = testing::temp_dir("cli_encode");
  spit(dir / "in.csv", "patient_id,team_id,race,y_1\nP1,T1,white,1\nP2,T1,black,2\nP3,T1,other,3\n");
  const auto r = run({"encode", "--input", (dir / "in.csv").string(), "--column", "race", "--out",
                      (dir / "out.csv").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto out = slurp(dir / "out.csv");
  CHECK(out.rfind("patient_id,team_id,y_1,x_race_black,x_race_other\n", 0) == 0);
  CHECK(out.find("P2,T1,2,1,0") != std::string::npos);
}
