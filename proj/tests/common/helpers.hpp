#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "hbmv/dataset.hpp"
#include "hbmv/model_spec.hpp"
#include "hbmv/sampler.hpp"
#include "hbmv/synthetic.hpp"

namespace testing {

inline hbmv::McmcConfig config(long n, long burnin, long thin, int chains = 1, std::uint64_t seed = 11) {
  hbmv::McmcConfig c;
  c.n_iterations = n;
  c.n_burnin = burnin;
  c.thin = thin;
  c.n_chains = chains;
  c.seed = seed;
  return c;
}

// Two facilities, three teams, six patients, one covariate per level.
inline hbmv::PanelDataset small_panel() {
  hbmv::PanelDataset ds;
  ds.response_names = {"y_pc", "y_npc"};
  ds.patient_covariate_names = {"x_age", "x_female"};
  ds.team_covariate_names = {"z_size"};
  ds.facility_covariate_names = {"w_rural"};
  ds.facilities = {{"F2", {1.0}}, {"F1", {0.0}}};
  ds.teams = {{"T3", "F2", {900.0}}, {"T1", "F1", {1200.0}}, {"T2", "F1", {1000.0}}};
  ds.patients = {
      {"P6", "T3", {70.0, 1.0}, {3.0, 4.0}}, {"P1", "T1", {50.0, 0.0}, {1.0, 2.0}},
      {"P2", "T1", {61.0, 1.0}, {2.5, 1.5}}, {"P3", "T2", {45.0, 0.0}, {1.5, 2.5}},
      {"P4", "T2", {80.0, 0.0}, {4.0, 3.0}}, {"P5", "T3", {33.0, 1.0}, {0.5, 1.0}},
  };
  return ds;
}

inline hbmv::CovariateGenerator continuous(const std::string& name, double mean = 0.0, double sd = 1.0) {
  hbmv::CovariateGenerator g;
  g.name = name;
  g.kind = hbmv::CovariateGenerator::Kind::Continuous;
  g.mean = mean;
  g.sd = sd;
  return g;
}

inline hbmv::CovariateGenerator binary(const std::string& name, double p) {
  hbmv::CovariateGenerator g;
  g.name = name;
  g.kind = hbmv::CovariateGenerator::Kind::Binary;
  g.probability = p;
  return g;
}

// Intercept-only truth with random intercepts at both levels.
inline hbmv::GroundTruth intercept_truth(std::size_t facilities, std::size_t teams, std::size_t patients,
                                         const Eigen::MatrixXd& sp, const Eigen::MatrixXd& st,
                                         const Eigen::MatrixXd& sf) {
  hbmv::GroundTruth t;
  t.spec = hbmv::unconditional_spec(static_cast<std::size_t>(sp.rows()));
  t.spec.standardize = false;
  t.shape = {facilities, {teams, teams}, {patients, patients}};
  t.gamma = Eigen::VectorXd::LinSpaced(sp.rows(), 1.0, static_cast<double>(sp.rows()));
  t.sigma_patient = sp;
  t.sigma_team = st;
  t.sigma_facility = sf;
  return t;
}

inline Eigen::MatrixXd cov2(double v1, double v2, double rho) {
  Eigen::MatrixXd m(2, 2);
  m << v1, rho * std::sqrt(v1 * v2), rho * std::sqrt(v1 * v2), v2;
  return m;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hbmv_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return true;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace testing
