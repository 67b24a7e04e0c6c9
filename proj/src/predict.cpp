#include "hbmv/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hbmv/chain_io.hpp"
#include "hbmv/error.hpp"

namespace hbmv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Component {
  VectorXd mean;
  MatrixXd cov;
};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Quantile of an equal-weight Gaussian mixture in one coordinate, by bisection.
double mixture_quantile(const std::vector<Component>& comps, Index p, double prob) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : comps) {
    const double s = std::sqrt(std::max(c.cov(p, p), 0.0));
    lo = std::min(lo, c.mean(p) - 10.0 * s);
    hi = std::max(hi, c.mean(p) + 10.0 * s);
  }
  if (!(hi > lo)) return lo;
  auto cdf = [&](double t) {
    double sum = 0.0;
    for (const auto& c : comps) {
      const double s = std::sqrt(std::max(c.cov(p, p), 0.0));
      sum += s > 0.0 ? normal_cdf((t - c.mean(p)) / s) : (t >= c.mean(p) ? 1.0 : 0.0);
    }
    return sum / static_cast<double>(comps.size());
  };
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

PredictiveSummary posterior_predict(const std::vector<ChainSamples>& chains, const DesignLayout& layout,
                                    const PredictionRequest& request, const PredictOptions& options) {
  const auto P = static_cast<Index>(layout.n_outcomes());
  if (request.x.size() != layout.names.patient.size()) {
    throw Error(ErrorCode::DimensionMismatch, "request has " + std::to_string(request.x.size()) +
                                                  " patient covariates, design expects " +
                                                  std::to_string(layout.names.patient.size()));
  }

  PredictiveSummary out;
  std::optional<std::size_t> team, facility;
  for (std::size_t j = 0; j < layout.team_ids.size(); ++j) {
    if (layout.team_ids[j] == request.team_id) team = j;
  }
  if (team) {
    facility = layout.facility_of_team[*team];
    if (!request.facility_id.empty() && request.facility_id != layout.facility_ids[*facility]) {
      throw Error(ErrorCode::CrossNesting, "team '" + request.team_id + "' belongs to facility '" +
                                               layout.facility_ids[*facility] + "', not '" + request.facility_id + "'");
    }
  } else {
    if (!options.allow_new_units) {
      throw Error(ErrorCode::UnknownUnit, "team '" + request.team_id + "' is not in the fitted data");
    }
    out.new_team = true;
    for (std::size_t k = 0; k < layout.facility_ids.size(); ++k) {
      if (layout.facility_ids[k] == request.facility_id) facility = k;
    }
    if (!facility) out.new_facility = true;
  }

  std::vector<double> z, w;
  if (team) {
    for (Index c = 0; c < layout.team_covariates.cols(); ++c) {
      z.push_back(layout.team_covariates(static_cast<Index>(*team), c));
    }
  } else {
    z = request.z;
  }
  if (facility) {
    for (Index c = 0; c < layout.facility_covariates.cols(); ++c) {
      w.push_back(layout.facility_covariates(static_cast<Index>(*facility), c));
    }
  } else {
    w = request.w;
  }
  if (z.size() != layout.names.team.size()) {
    throw Error(ErrorCode::DimensionMismatch, "new team '" + request.team_id + "' needs " +
                                                  std::to_string(layout.names.team.size()) + " team covariates");
  }
  if (w.size() != layout.names.facility.size()) {
    throw Error(ErrorCode::DimensionMismatch, "new facility '" + request.facility_id + "' needs " +
                                                  std::to_string(layout.names.facility.size()) +
                                                  " facility covariates");
  }
  const PatientDesign d = patient_design(layout, request.x, z, w);

  std::vector<Component> comps;
  for (const auto& chain : chains) {
    for (const auto& s : chain.draws) {
      Component c;
      c.mean = d.fixed * s.gamma;
      c.cov = s.sigma_patient;
      if (team) {
        c.mean += d.team * s.team_effects.row(static_cast<Index>(*team)).transpose();
      } else if (d.team.cols() > 0) {
        c.cov += d.team * s.sigma_team * d.team.transpose();
      }
      if (facility) {
        c.mean += d.facility * s.facility_effects.row(static_cast<Index>(*facility)).transpose();
      } else if (d.facility.cols() > 0) {
        c.cov += d.facility * s.sigma_facility * d.facility.transpose();
      }
      comps.push_back(std::move(c));
    }
  }
  if (comps.empty()) throw Error(ErrorCode::EmptySamples, "no retained draws to predict from");
  const double n = static_cast<double>(comps.size());

  const bool log_scale = layout.spec.response_transform == ResponseTransform::Log && request.back_transform;
  out.back_transformed = log_scale;
  VectorXd mean = VectorXd::Zero(P);
  MatrixXd second = MatrixXd::Zero(P, P);
  for (const auto& c : comps) {
    if (log_scale) {
      for (Index p = 0; p < P; ++p) {
        mean(p) += std::exp(c.mean(p) + 0.5 * c.cov(p, p));
        for (Index q = 0; q < P; ++q) {
          second(p, q) += std::exp(c.mean(p) + c.mean(q) + 0.5 * (c.cov(p, p) + c.cov(q, q)) + c.cov(p, q));
        }
      }
    } else {
      mean += c.mean;
      second += c.cov + c.mean * c.mean.transpose();
    }
  }
  mean /= n;
  second /= n;
  MatrixXd cov = second - mean * mean.transpose();
  cov = 0.5 * (cov + cov.transpose());

  const auto labels = covariance_labels(layout, Level::Patient);
  out.correlation = MatrixXd::Identity(P, P);
  for (Index p = 0; p < P; ++p) {
    OutcomePrediction o;
    o.name = labels[static_cast<std::size_t>(p)];
    o.mean = mean(p);
    o.sd = std::sqrt(std::max(cov(p, p), 0.0));
    const double tail = 0.5 * (1.0 - options.mass);
    o.interval = {mixture_quantile(comps, p, tail), mixture_quantile(comps, p, 1.0 - tail)};
    if (log_scale) o.interval = {std::exp(o.interval.lower), std::exp(o.interval.upper)};
    out.outcomes.push_back(o);
    for (Index q = 0; q < P; ++q) {
      if (p == q) continue;
      const double denom = std::sqrt(std::max(cov(p, p), 0.0) * std::max(cov(q, q), 0.0));
      out.correlation(p, q) = denom > 0.0 ? std::clamp(cov(p, q) / denom, -1.0, 1.0) : 0.0;
    }
  }
  return out;
}

std::vector<PredictionRequest> requests_from_csv(const CsvTable& table, const DesignLayout& layout) {
  const long team_col = table.column("team_id");
  const long fac_col = table.column("facility_id");
  if (team_col < 0) throw Error(ErrorCode::DimensionMismatch, "request file lacks a 'team_id' column");
  auto index_of = [&](const std::vector<std::string>& names, bool required) {
    std::vector<long> idx;
    for (const auto& name : names) {
      const long c = table.column(name);
      if (c < 0 && required) throw Error(ErrorCode::DimensionMismatch, "request file lacks column '" + name + "'");
      idx.push_back(c);
    }
    return idx;
  };
  const auto xi = index_of(layout.names.patient, true);
  const auto zi = index_of(layout.names.team, false);
  const auto wi = index_of(layout.names.facility, false);

  std::vector<PredictionRequest> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string ctx = "request row " + std::to_string(r + 2);
    PredictionRequest req;
    req.team_id = row[static_cast<std::size_t>(team_col)];
    if (fac_col >= 0) req.facility_id = row[static_cast<std::size_t>(fac_col)];
    for (std::size_t i = 0; i < xi.size(); ++i) {
      req.x.push_back(parse_number(row[static_cast<std::size_t>(xi[i])], ctx + " " + layout.names.patient[i]));
    }
    // new-unit covariates are optional columns; partial rows are rejected later
    bool all_z = !zi.empty() && std::all_of(zi.begin(), zi.end(), [](long c) { return c >= 0; });
    if (all_z && !row[static_cast<std::size_t>(zi[0])].empty()) {
      for (std::size_t i = 0; i < zi.size(); ++i) {
        req.z.push_back(parse_number(row[static_cast<std::size_t>(zi[i])], ctx + " " + layout.names.team[i]));
      }
    }
    bool all_w = !wi.empty() && std::all_of(wi.begin(), wi.end(), [](long c) { return c >= 0; });
    if (all_w && !row[static_cast<std::size_t>(wi[0])].empty()) {
      for (std::size_t i = 0; i < wi.size(); ++i) {
        req.w.push_back(parse_number(row[static_cast<std::size_t>(wi[i])], ctx + " " + layout.names.facility[i]));
      }
    }
    out.push_back(std::move(req));
  }
  return out;
}

std::string predictions_csv(const std::vector<PredictionRequest>& requests,
                            const std::vector<PredictiveSummary>& results, const DesignLayout& layout,
                            const std::vector<std::string>& request_ids) {
  std::ostringstream out;
  CsvWriter w(out);
  std::vector<std::string> header{"request_id", "team_id", "facility_id", "new_team", "new_facility"};
  for (const auto& name : covariance_labels(layout, Level::Patient)) {
    for (const char* suffix : {"_mean", "_sd", "_lower", "_upper"}) header.push_back(name + suffix);
  }
  w.row(header);
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& s = results[r];
    std::vector<std::string> f{r < request_ids.size() ? request_ids[r] : std::to_string(r + 1), requests[r].team_id,
                               requests[r].facility_id, s.new_team ? "1" : "0", s.new_facility ? "1" : "0"};
    for (const auto& o : s.outcomes) {
      f.push_back(format_number(o.mean));
      f.push_back(format_number(o.sd));
      f.push_back(format_number(o.interval.lower));
      f.push_back(format_number(o.interval.upper));
    }
    w.row(f);
  }
  return out.str();
}

}  // namespace hbmv
