#include "hbmv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "hbmv/chain_io.hpp"
#include "hbmv/csv.hpp"
#include "hbmv/error.hpp"

namespace hbmv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

Interval hpd_interval(std::span<const double> samples, double mass) {
  if (samples.size() < 2) throw Error(ErrorCode::EmptySamples, "HPD interval needs at least 2 samples");
  if (!(mass > 0.0 && mass < 1.0)) throw Error(ErrorCode::InvalidConfig, "HPD mass must lie in (0, 1)");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  // The epsilon keeps e.g. 0.95 * 100 from rounding up to 96.
  auto k = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  std::size_t best = 0;
  double best_width = sorted[k - 1] - sorted[0];
  for (std::size_t i = 1; i + k <= n; ++i) {
    const double width = sorted[i + k - 1] - sorted[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {sorted[best], sorted[best + k - 1]};
}

Interval central_interval(std::span<const double> samples, double mass) {
  if (samples.size() < 2) throw Error(ErrorCode::EmptySamples, "interval needs at least 2 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double prob) {
    const double h = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  return {quantile(0.5 * (1.0 - mass)), quantile(0.5 * (1.0 + mass))};
}

double mcse_batch_means(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw Error(ErrorCode::EmptySamples, "MCSE needs at least 2 samples");
  const auto n_batches = std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
  const std::size_t size = n / n_batches;
  if (size < 1) {
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  std::vector<double> means(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    double sum = 0.0;
    for (std::size_t i = b * size; i < (b + 1) * size; ++i) sum += samples[i];
    means[b] = sum / static_cast<double>(size);
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(n_batches);
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  return std::sqrt(ss / static_cast<double>(n_batches - 1) / static_cast<double>(n_batches));
}

ParameterState posterior_mean(const std::vector<const ChainSamples*>& chains) {
  ParameterState mean;
  std::size_t count = 0;
  for (const auto* chain : chains) {
    for (const auto& d : chain->draws) {
      if (count == 0) {
        mean = d;
      } else {
        mean.gamma += d.gamma;
        mean.team_effects += d.team_effects;
        mean.facility_effects += d.facility_effects;
        mean.sigma_patient += d.sigma_patient;
        mean.sigma_team += d.sigma_team;
        mean.sigma_facility += d.sigma_facility;
      }
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::EmptySamples, "no retained draws");
  const double inv = 1.0 / static_cast<double>(count);
  mean.gamma *= inv;
  mean.team_effects *= inv;
  mean.facility_effects *= inv;
  mean.sigma_patient *= inv;
  mean.sigma_team *= inv;
  mean.sigma_facility *= inv;
  return mean;
}

ParameterState posterior_mean(const ChainSamples& chain) { return posterior_mean({&chain}); }

namespace {

DicResult dic_of(const std::vector<const ChainSamples*>& chains, const DesignStructure& design) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* c : chains) {
    for (double d : c->deviance) sum += d;
    n += c->deviance.size();
  }
  if (n == 0) throw Error(ErrorCode::EmptySamples, "DIC needs stored deviances");
  DicResult r;
  r.dbar = sum / static_cast<double>(n);
  r.dhat = deviance(posterior_mean(chains), design);
  r.pd = r.dbar - r.dhat;
  r.dic = r.dbar + r.pd;
  return r;
}

}  // namespace

DicResult dic(const ChainSamples& chain, const DesignStructure& design) { return dic_of({&chain}, design); }

DicResult dic(const std::vector<ChainSamples>& chains, const DesignStructure& design) {
  std::vector<const ChainSamples*> ptrs;
  for (const auto& c : chains) ptrs.push_back(&c);
  return dic_of(ptrs, design);
}

IccShares icc_shares(double var_patient, double var_team, double var_facility) {
  if (var_patient < 0.0 || var_team < 0.0 || var_facility < 0.0) {
    throw Error(ErrorCode::ZeroVariance, "variance components must be non-negative");
  }
  const double total = var_patient + var_team + var_facility;
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroVariance, "total variance is zero");
  return {var_patient / total, var_team / total, var_facility / total};
}

IccShares icc(const MatrixXd& sigma_patient, const MatrixXd& sigma_team, const MatrixXd& sigma_facility,
              const DesignLayout& layout, std::size_t outcome) {
  if (outcome >= layout.n_outcomes()) {
    throw Error(ErrorCode::DimensionMismatch, "outcome index out of range");
  }
  const auto team_idx = layout.team_effects.intercept_index(outcome);
  const auto fac_idx = layout.facility_effects.intercept_index(outcome);
  if (!team_idx || !fac_idx) {
    throw Error(ErrorCode::MissingRandomIntercept,
                "ICC needs random intercepts at the team and facility levels");
  }
  const auto p = static_cast<Index>(outcome);
  return icc_shares(sigma_patient(p, p), sigma_team(static_cast<Index>(*team_idx), static_cast<Index>(*team_idx)),
                    sigma_facility(static_cast<Index>(*fac_idx), static_cast<Index>(*fac_idx)));
}

double level_correlation(const MatrixXd& sigma, std::size_t p, std::size_t q) {
  const auto n = static_cast<std::size_t>(sigma.rows());
  if (p >= n || q >= n) throw Error(ErrorCode::DimensionMismatch, "correlation index out of range");
  const auto ip = static_cast<Index>(p), iq = static_cast<Index>(q);
  const double vp = sigma(ip, ip), vq = sigma(iq, iq);
  if (!(vp > 0.0) || !(vq > 0.0)) throw Error(ErrorCode::ZeroVariance, "correlation of a zero-variance term");
  if (p == q) return 1.0;
  return std::clamp(sigma(ip, iq) / std::sqrt(vp * vq), -1.0, 1.0);
}

ComparisonReport compare_models(const std::vector<ModelRun>& runs) {
  if (runs.size() < 2) throw Error(ErrorCode::Usage, "model comparison needs at least two models");
  std::vector<RankedModel> models;
  for (const auto& r : runs) {
    models.push_back({r, 0.5 * (r.dic_run1 + r.dic_run2),
                      std::abs(r.dic_run1 - r.dic_run2) > kDicInstabilityThreshold});
  }
  auto simpler = [](const RankedModel& a, const RankedModel& b) {
    if (a.run.n_params != b.run.n_params) return a.run.n_params < b.run.n_params;
    return a.run.model_id < b.run.model_id;
  };
  std::sort(models.begin(), models.end(), simpler);

  ComparisonReport report;
  for (std::size_t a = 0; a < models.size(); ++a) {
    for (std::size_t b = a + 1; b < models.size(); ++b) {
      report.deltas.push_back({models[a].run.model_id, models[b].run.model_id, models[b].mean_dic - models[a].mean_dic});
    }
  }

  std::size_t current = 0;
  std::ostringstream why;
  why << "start from simplest model '" << models[0].run.model_id << "'";
  for (std::size_t c = 1; c < models.size(); ++c) {
    const double reduction = models[current].mean_dic - models[c].mean_dic;
    if (reduction > kDicSelectionThreshold) {
      why << "; '" << models[c].run.model_id << "' lowers mean DIC by " << reduction << " (> "
          << kDicSelectionThreshold << ") over '" << models[current].run.model_id << "'";
      current = c;
    }
  }
  why << "; selected '" << models[current].run.model_id << "'";
  for (const auto& m : models) {
    if (m.unstable) why << "; '" << m.run.model_id << "' runs disagree by more than " << kDicInstabilityThreshold;
  }
  report.selected = models[current].run.model_id;
  report.rationale = why.str();

  report.ranking = models;
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](const RankedModel& a, const RankedModel& b) {
    if (a.mean_dic != b.mean_dic) return a.mean_dic < b.mean_dic;
    return simpler(a, b);
  });
  return report;
}

double chi_square_upper_tail(double statistic, double df) {
  if (statistic <= 0.0) return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

ChiSquareTest chi_square_deviance_test(const DicResult& free_fit, const DicResult& constrained_fit,
                                       std::size_t n_constraints, double alpha) {
  if (n_constraints < 1) throw Error(ErrorCode::Usage, "deviance test needs at least one constraint");
  ChiSquareTest t;
  t.df = n_constraints;
  t.statistic = constrained_fit.dhat - free_fit.dhat;
  if (t.statistic < 0.0) {
    t.negative_statistic = true;
    t.statistic = 0.0;
  }
  t.p_value = chi_square_upper_tail(t.statistic, static_cast<double>(t.df));
  t.reject_simplification = t.p_value < alpha;
  return t;
}

const ParameterSummary* FitSummary::find(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

ParameterSummary summarize_samples(const std::string& name, std::span<const double> samples, double mass) {
  ParameterSummary s;
  s.name = name;
  const double n = static_cast<double>(samples.size());
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - s.mean) * (v - s.mean);
  s.sd = samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.hpd = hpd_interval(samples, mass);
  return s;
}

FitSummary summarize(const std::vector<ChainSamples>& chains, const DesignStructure& design, double mass) {
  const DesignLayout& layout = design.layout;
  std::vector<const ParameterState*> draws;
  for (const auto& c : chains) {
    for (const auto& d : c.draws) draws.push_back(&d);
  }
  if (draws.size() < 2) throw Error(ErrorCode::EmptySamples, "summary needs at least 2 retained draws");

  FitSummary out;
  out.model = layout.spec.name;
  out.deviance_focus = "conditional on team and facility random effects";
  out.mass = mass;
  out.n_draws = draws.size();

  std::vector<double> values(draws.size());
  for (std::size_t c = 0; c < layout.fixed.n_columns(); ++c) {
    for (std::size_t d = 0; d < draws.size(); ++d) values[d] = draws[d]->gamma(static_cast<Index>(c));
    out.parameters.push_back(summarize_samples(gamma_name(layout.fixed.column_labels[c]), values, mass));
  }
  for (Level level : kLevels) {
    const auto labels = covariance_labels(layout, level);
    for (std::size_t r = 0; r < labels.size(); ++r) {
      for (std::size_t col = r; col < labels.size(); ++col) {
        for (std::size_t d = 0; d < draws.size(); ++d) {
          values[d] = draws[d]->sigma(level)(static_cast<Index>(r), static_cast<Index>(col));
        }
        out.parameters.push_back(summarize_samples(sigma_name(level, labels[r], labels[col]), values, mass));
      }
    }
    for (std::size_t r = 0; r < labels.size(); ++r) {
      for (std::size_t col = r + 1; col < labels.size(); ++col) {
        for (std::size_t d = 0; d < draws.size(); ++d) values[d] = level_correlation(draws[d]->sigma(level), r, col);
        const auto s = summarize_samples("", values, mass);
        out.correlations.push_back({level, labels[r], labels[col], s.mean, s.hpd});
      }
    }
  }

  out.dic = dic(chains, design);
  for (const auto& c : chains) out.chain_dic.push_back(dic(c, design));

  const ParameterState mean = posterior_mean([&] {
    std::vector<const ChainSamples*> ptrs;
    for (const auto& c : chains) ptrs.push_back(&c);
    return ptrs;
  }());
  const auto labels = covariance_labels(layout, Level::Patient);
  for (std::size_t p = 0; p < layout.n_outcomes(); ++p) {
    if (!layout.team_effects.intercept_index(p) || !layout.facility_effects.intercept_index(p)) continue;
    IccRow row;
    row.outcome = p;
    row.outcome_name = labels[p];
    row.shares = icc(mean.sigma_patient, mean.sigma_team, mean.sigma_facility, layout, p);
    std::vector<double> sp(draws.size()), st(draws.size()), sf(draws.size());
    for (std::size_t d = 0; d < draws.size(); ++d) {
      const auto s = icc(draws[d]->sigma_patient, draws[d]->sigma_team, draws[d]->sigma_facility, layout, p);
      sp[d] = s.patient;
      st[d] = s.team;
      sf[d] = s.facility;
    }
    row.patient_hpd = hpd_interval(sp, mass);
    row.team_hpd = hpd_interval(st, mass);
    row.facility_hpd = hpd_interval(sf, mass);
    out.icc_table.push_back(row);
  }
  return out;
}

namespace {

json interval_json(const Interval& i) { return json::array({i.lower, i.upper}); }

json dic_json(const DicResult& d) {
  return {{"Dbar", d.dbar}, {"Dhat", d.dhat}, {"pD", d.pd}, {"DIC", d.dic}};
}

}  // namespace

json to_json(const FitSummary& s) {
  json j;
  j["model"] = s.model;
  j["deviance_focus"] = s.deviance_focus;
  j["mass"] = s.mass;
  j["n_draws"] = s.n_draws;
  j["parameters"] = json::array();
  for (const auto& p : s.parameters) {
    j["parameters"].push_back({{"name", p.name}, {"mean", p.mean}, {"sd", p.sd}, {"hpd", interval_json(p.hpd)}});
  }
  j["dic"] = dic_json(s.dic);
  j["chain_dic"] = json::array();
  for (const auto& d : s.chain_dic) j["chain_dic"].push_back(dic_json(d));
  j["icc_table"] = json::array();
  for (const auto& r : s.icc_table) {
    j["icc_table"].push_back({{"outcome", r.outcome_name},
                              {"patient", r.shares.patient},
                              {"team", r.shares.team},
                              {"facility", r.shares.facility},
                              {"patient_hpd", interval_json(r.patient_hpd)},
                              {"team_hpd", interval_json(r.team_hpd)},
                              {"facility_hpd", interval_json(r.facility_hpd)}});
  }
  j["correlations"] = json::array();
  for (const auto& c : s.correlations) {
    j["correlations"].push_back({{"level", level_name(c.level)},
                                 {"row", c.row},
                                 {"col", c.col},
                                 {"mean", c.mean},
                                 {"hpd", interval_json(c.hpd)},
                                 {"hpd_excludes_zero", c.hpd.lower > 0.0 || c.hpd.upper < 0.0}});
  }
  return j;
}

json to_json(const ComparisonReport& r) {
  json j;
  j["models"] = json::array();
  for (const auto& m : r.ranking) {
    j["models"].push_back({{"model_id", m.run.model_id},
                           {"dic_run1", m.run.dic_run1},
                           {"dic_run2", m.run.dic_run2},
                           {"mean_dic", m.mean_dic},
                           {"n_params", m.run.n_params},
                           {"unstable", m.unstable}});
  }
  j["deltas"] = json::array();
  for (const auto& d : r.deltas) {
    j["deltas"].push_back({{"simpler", d.simpler}, {"richer", d.richer}, {"delta", d.delta}});
  }
  j["selected"] = r.selected;
  j["rationale"] = r.rationale;
  return j;
}

json to_json(const ChiSquareTest& t) {
  return {{"statistic", t.statistic},
          {"df", t.df},
          {"p_value", t.p_value},
          {"reject_simplification", t.reject_simplification},
          {"negative_statistic", t.negative_statistic}};
}

std::string variance_table_csv(const FitSummary& summary, const DesignLayout& layout) {
  std::ostringstream out;
  CsvWriter w(out);
  w.row({"level", "quantity", "term_a", "term_b", "estimate", "hpd_lower", "hpd_upper"});
  for (Level level : kLevels) {
    const auto labels = covariance_labels(layout, level);
    // indices of each outcome's intercept in this level's covariance
    std::vector<std::pair<std::size_t, std::size_t>> intercepts;  // (outcome, index)
    for (std::size_t p = 0; p < layout.n_outcomes(); ++p) {
      std::optional<std::size_t> idx;
      if (level == Level::Patient) idx = p;
      if (level == Level::Team) idx = layout.team_effects.intercept_index(p);
      if (level == Level::Facility) idx = layout.facility_effects.intercept_index(p);
      if (idx) intercepts.emplace_back(p, *idx);
    }
    for (std::size_t a = 0; a < intercepts.size(); ++a) {
      const auto& la = labels[intercepts[a].second];
      if (const auto* s = summary.find(sigma_name(level, la, la))) {
        w.row({level_name(level), "intercept_variance", la, la, format_number(s->mean), format_number(s->hpd.lower),
               format_number(s->hpd.upper)});
      }
      for (std::size_t b = a + 1; b < intercepts.size(); ++b) {
        const auto& lb = labels[intercepts[b].second];
        for (const auto& c : summary.correlations) {
          if (c.level == level && ((c.row == la && c.col == lb) || (c.row == lb && c.col == la))) {
            w.row({level_name(level), "correlation", la, lb, format_number(c.mean), format_number(c.hpd.lower),
                   format_number(c.hpd.upper)});
          }
        }
      }
    }
  }
  return out.str();
}

std::string icc_table_csv(const FitSummary& summary) {
  std::ostringstream out;
  CsvWriter w(out);
  w.row({"outcome", "level", "share", "hpd_lower", "hpd_upper"});
  for (const auto& r : summary.icc_table) {
    w.row({r.outcome_name, "patient", format_number(r.shares.patient), format_number(r.patient_hpd.lower),
           format_number(r.patient_hpd.upper)});
    w.row({r.outcome_name, "team", format_number(r.shares.team), format_number(r.team_hpd.lower),
           format_number(r.team_hpd.upper)});
    w.row({r.outcome_name, "facility", format_number(r.shares.facility), format_number(r.facility_hpd.lower),
           format_number(r.facility_hpd.upper)});
  }
  return out.str();
}

}  // namespace hbmv
