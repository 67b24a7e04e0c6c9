#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hbmv/design.hpp"
#include "hbmv/sampler.hpp"

namespace hbmv {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Shortest window over the sorted samples holding ceil(mass * n) of them;
// ties go to the leftmost window. Throws EmptySamples for fewer than 2 samples.
Interval hpd_interval(std::span<const double> samples, double mass = 0.95);

// Equal-tailed interval from the empirical quantiles; used for predictions.
Interval central_interval(std::span<const double> samples, double mass = 0.95);

// Monte Carlo standard error of the sample mean by non-overlapping batch means.
double mcse_batch_means(std::span<const double> samples);

struct DicResult {
  double dbar = 0.0;  // mean deviance over draws
  double dhat = 0.0;  // deviance at the posterior-mean state
  double pd = 0.0;
  double dic = 0.0;
};

ParameterState posterior_mean(const std::vector<const ChainSamples*>& chains);
ParameterState posterior_mean(const ChainSamples& chain);

DicResult dic(const ChainSamples& chain, const DesignStructure& design);
DicResult dic(const std::vector<ChainSamples>& chains, const DesignStructure& design);

struct IccShares {
  double patient = 0.0;
  double team = 0.0;
  double facility = 0.0;
};

// Each share is that level's variance over the sum of the three.
IccShares icc_shares(double var_patient, double var_team, double var_facility);

// Intercept variances of one outcome at each level. Throws
// MissingRandomIntercept when a level has no random intercept for it.
IccShares icc(const Eigen::MatrixXd& sigma_patient, const Eigen::MatrixXd& sigma_team,
              const Eigen::MatrixXd& sigma_facility, const DesignLayout& layout, std::size_t outcome);

// sigma(p,q) / sqrt(sigma(p,p) sigma(q,q)); ZeroVariance on a zero diagonal.
double level_correlation(const Eigen::MatrixXd& sigma, std::size_t p, std::size_t q);

struct ModelRun {
  std::string model_id;
  double dic_run1 = 0.0;
  double dic_run2 = 0.0;
  std::size_t n_params = 0;
};

struct RankedModel {
  ModelRun run;
  double mean_dic = 0.0;
  bool unstable = false;  // |run1 - run2| > threshold
};

struct DicDelta {
  std::string simpler;
  std::string richer;
  double delta = 0.0;  // mean DIC(richer) - mean DIC(simpler)
};

struct ComparisonReport {
  std::vector<RankedModel> ranking;  // ascending mean DIC
  std::vector<DicDelta> deltas;      // every pair, ordered by complexity
  std::string selected;
  std::string rationale;
};

inline constexpr double kDicSelectionThreshold = 10.0;
inline constexpr double kDicInstabilityThreshold = 10.0;

// Richer models (more parameters; ties broken by id) replace the current
// choice only when their mean DIC is lower by more than 10.
ComparisonReport compare_models(const std::vector<ModelRun>& runs);

struct ChiSquareTest {
  double statistic = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
  bool reject_simplification = false;
  bool negative_statistic = false;  // clipped to 0
};

double chi_square_upper_tail(double statistic, double df);

// statistic = Dhat(constrained) - Dhat(free), df = number of constraints.
ChiSquareTest chi_square_deviance_test(const DicResult& free_fit, const DicResult& constrained_fit,
                                       std::size_t n_constraints, double alpha = 0.05);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  Interval hpd;
};

struct IccRow {
  std::size_t outcome = 0;
  std::string outcome_name;
  IccShares shares;  // plug-in at posterior-mean variances
  Interval patient_hpd, team_hpd, facility_hpd;  // from per-draw shares
};

struct CorrelationEntry {
  Level level = Level::Patient;
  std::string row;
  std::string col;
  double mean = 0.0;  // posterior mean of the per-draw correlation
  Interval hpd;
};

struct FitSummary {
  std::string model;
  std::string deviance_focus;
  double mass = 0.95;
  std::size_t n_draws = 0;
  std::vector<ParameterSummary> parameters;  // gamma columns and covariance entries
  DicResult dic;                             // pooled over chains
  std::vector<DicResult> chain_dic;
  std::vector<IccRow> icc_table;             // empty when the model lacks random intercepts
  std::vector<CorrelationEntry> correlations;

  const ParameterSummary* find(const std::string& name) const;
};

ParameterSummary summarize_samples(const std::string& name, std::span<const double> samples, double mass);

FitSummary summarize(const std::vector<ChainSamples>& chains, const DesignStructure& design,
                     double mass = 0.95);

nlohmann::json to_json(const FitSummary& summary);
nlohmann::json to_json(const ComparisonReport& report);
nlohmann::json to_json(const ChiSquareTest& test);

// Intercept variance rows and correlation rows per level, in long format.
std::string variance_table_csv(const FitSummary& summary, const DesignLayout& layout);
std::string icc_table_csv(const FitSummary& summary);

}  // namespace hbmv
