#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbmv/csv.hpp"
#include "hbmv/design.hpp"
#include "hbmv/diagnostics.hpp"
#include "hbmv/sampler.hpp"

namespace hbmv {

struct PredictionRequest {
  std::vector<double> x;    // raw patient covariates, layout.names.patient order
  std::string team_id;      // known id, or a new team when allowed
  std::string facility_id;  // may be empty for a known team
  std::vector<double> z;    // only read for a new team
  std::vector<double> w;    // only read for a new facility
  bool back_transform = true;
};

struct PredictOptions {
  bool allow_new_units = false;
  double mass = 0.95;
};

struct OutcomePrediction {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  Interval interval;  // equal-tailed
};

struct PredictiveSummary {
  std::vector<OutcomePrediction> outcomes;
  Eigen::MatrixXd correlation;  // P x P
  bool new_team = false;
  bool new_facility = false;
  bool back_transformed = false;
};

// Per retained draw the response is Gaussian given the draw: known units
// contribute their sampled effects, new units integrate their effect over the
// draw's level covariance, and sigma_patient is added. The summary describes
// the mixture of these Gaussians over all draws (lognormal components when a
// log model is back-transformed). Throws UnknownUnit, CrossNesting,
// DimensionMismatch, EmptySamples.
PredictiveSummary posterior_predict(const std::vector<ChainSamples>& chains, const DesignLayout& layout,
                                    const PredictionRequest& request, const PredictOptions& options = {});

// Request rows: team_id, facility_id, optional request_id, x_*, z_*, w_* with
// names from the layout. z_/w_ columns are needed only for new units.
std::vector<PredictionRequest> requests_from_csv(const CsvTable& table, const DesignLayout& layout);

std::string predictions_csv(const std::vector<PredictionRequest>& requests,
                            const std::vector<PredictiveSummary>& results, const DesignLayout& layout,
                            const std::vector<std::string>& request_ids);

}  // namespace hbmv
