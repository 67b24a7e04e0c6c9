#include "hbmv/sampler.hpp"

#include <cmath>
#include <numbers>

#include "hbmv/error.hpp"
#include "hbmv/parallel.hpp"

namespace hbmv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

MatrixXd symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

MatrixXd spd_inverse(const MatrixXd& m, long iteration, const char* block) {
  Eigen::LLT<MatrixXd> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) throw NumericalBreakdown(iteration, block, "covariance is not SPD");
  return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

// mean + U^{-1} z where Q = U^T U; a draw from N(Q^{-1} rhs, Q^{-1}).
VectorXd gaussian_draw(const Eigen::LLT<MatrixXd>& llt, const VectorXd& rhs, Rng& rng) {
  VectorXd x = llt.solve(rhs);
  x += llt.matrixU().solve(standard_normal_vector(rhs.size(), rng));
  return x;
}

}  // namespace

const MatrixXd& ParameterState::sigma(Level level) const {
  switch (level) {
    case Level::Patient: return sigma_patient;
    case Level::Team: return sigma_team;
    case Level::Facility: return sigma_facility;
  }
  return sigma_patient;
}

Priors default_priors(const DesignLayout& layout) {
  Priors priors;
  const auto c = static_cast<Index>(layout.fixed.n_columns());
  priors.fixed_mean = VectorXd::Zero(c);
  priors.fixed_variance = VectorXd::Constant(c, 1e6);
  for (Level level : kLevels) {
    const auto q = static_cast<Index>(layout.level_dim(level));
    LevelPrior& lp = priors.level(level);
    lp.df = static_cast<double>(q) + 1.0;
    lp.scale = MatrixXd::Identity(q, q);
    lp.shape = 0.001;
    lp.rate = 0.001;
  }
  return priors;
}

void validate_priors(const Priors& priors, const DesignLayout& layout) {
  const auto c = static_cast<Index>(layout.fixed.n_columns());
  if (priors.fixed_mean.size() != c || priors.fixed_variance.size() != c) {
    throw Error(ErrorCode::InvalidPriors, "fixed-effect prior has the wrong dimension");
  }
  if (!(priors.fixed_variance.array() > 0.0).all() || !priors.fixed_mean.allFinite()) {
    throw Error(ErrorCode::InvalidPriors, "fixed-effect prior variances must be positive");
  }
  for (Level level : kLevels) {
    const auto q = static_cast<Index>(layout.level_dim(level));
    if (q == 0) continue;
    const LevelPrior& lp = priors.level(level);
    const auto name = level_name(level);
    if (layout.spec.structure(level) == CovStructure::PooledDiagonal) {
      if (!(lp.shape > 0.0) || !(lp.rate > 0.0)) {
        throw Error(ErrorCode::InvalidPriors, name + " inverse-gamma prior needs shape, rate > 0");
      }
      continue;
    }
    if (lp.scale.rows() != q || lp.scale.cols() != q) {
      throw Error(ErrorCode::InvalidPriors, name + " inverse-Wishart scale has the wrong dimension");
    }
    if (!(lp.df > static_cast<double>(q) - 1.0)) {
      throw Error(ErrorCode::InvalidPriors, name + " inverse-Wishart needs df > dim - 1");
    }
    if (!lp.scale.isApprox(lp.scale.transpose()) || Eigen::LLT<MatrixXd>(lp.scale).info() != Eigen::Success) {
      throw Error(ErrorCode::InvalidPriors, name + " inverse-Wishart scale must be symmetric positive definite");
    }
  }
  if (priors.known_patient_covariance) {
    const auto P = static_cast<Index>(layout.n_outcomes());
    const MatrixXd& k = *priors.known_patient_covariance;
    if (k.rows() != P || k.cols() != P || Eigen::LLT<MatrixXd>(k).info() != Eigen::Success) {
      throw Error(ErrorCode::InvalidPriors, "known patient covariance must be P x P and SPD");
    }
  }
}

void validate_config(const McmcConfig& config) {
  if (config.n_iterations < 1 || config.n_burnin < 0 || config.n_burnin >= config.n_iterations) {
    throw Error(ErrorCode::InvalidConfig, "need 0 <= burnin < iterations");
  }
  if (config.thin < 1) throw Error(ErrorCode::InvalidConfig, "thin must be >= 1");
  if (config.n_chains < 1) throw Error(ErrorCode::InvalidConfig, "need at least one chain");
}

GibbsSampler::GibbsSampler(const DesignStructure& design, Priors priors)
    : design_(design), priors_(std::move(priors)) {
  validate_priors(priors_, design_.layout);
  n_fixed_ = design_.fixed_rows.cols();
  team_dim_ = design_.team_rows.cols();
  facility_dim_ = design_.facility_rows.cols();
  const Index m = n_fixed_ + team_dim_ + facility_dim_;
  const auto P = static_cast<Index>(design_.n_outcomes());

  stats_.resize(design_.n_teams());
  VectorXd d_p(m), d_q(m);
  auto row_of = [&](Index r, VectorXd& d) {
    d.head(n_fixed_) = design_.fixed_rows.row(r).transpose();
    d.segment(n_fixed_, team_dim_) = design_.team_rows.row(r).transpose();
    d.tail(facility_dim_) = design_.facility_rows.row(r).transpose();
  };
  for (std::size_t j = 0; j < design_.n_teams(); ++j) {
    TeamStats& st = stats_[j];
    st.cross.assign(static_cast<std::size_t>(P * P), MatrixXd::Zero(m, m));
    st.resp.assign(static_cast<std::size_t>(P * P), VectorXd::Zero(m));
    for (std::size_t i : design_.patients_in_team[j]) {
      const Index r0 = static_cast<Index>(i) * P;
      for (Index p = 0; p < P; ++p) {
        row_of(r0 + p, d_p);
        for (Index q = 0; q < P; ++q) {
          row_of(r0 + q, d_q);
          const auto pq = static_cast<std::size_t>(p * P + q);
          st.cross[pq].noalias() += d_p * d_q.transpose();
          st.resp[pq] += d_p * design_.y(r0 + q);
        }
      }
    }
  }

  fixed_prior_precision_ = priors_.fixed_variance.cwiseInverse().asDiagonal();
  fixed_prior_shift_ = priors_.fixed_mean.cwiseQuotient(priors_.fixed_variance);

  team_m_.assign(design_.n_teams(), MatrixXd(m, m));
  team_h_.assign(design_.n_teams(), VectorXd(m));
  team_llt_.resize(design_.n_teams());
  fac_q_.assign(design_.n_facilities(), MatrixXd(facility_dim_, facility_dim_));
  fac_qg_.assign(design_.n_facilities(), MatrixXd(facility_dim_, n_fixed_));
  fac_h_.assign(design_.n_facilities(), VectorXd(facility_dim_));
  fac_llt_.resize(design_.n_facilities());
}

InitResult GibbsSampler::init_state() const {
  InitResult init;
  ParameterState& s = init.state;
  const auto P = static_cast<Index>(design_.n_outcomes());

  Eigen::ColPivHouseholderQR<MatrixXd> qr(design_.fixed_rows);
  if (qr.rank() < n_fixed_) {
    init.singular_design = true;
    s.gamma = VectorXd::Zero(n_fixed_);
  } else {
    s.gamma = qr.solve(design_.y);
  }
  s.team_effects = MatrixXd::Zero(static_cast<Index>(design_.n_teams()), team_dim_);
  s.facility_effects = MatrixXd::Zero(static_cast<Index>(design_.n_facilities()), facility_dim_);
  s.sigma_patient = priors_.known_patient_covariance ? *priors_.known_patient_covariance
                                                     : MatrixXd::Identity(P, P);
  s.sigma_team = MatrixXd::Identity(team_dim_, team_dim_);
  s.sigma_facility = MatrixXd::Identity(facility_dim_, facility_dim_);
  return init;
}

void GibbsSampler::check_state(const ParameterState& s) const {
  const auto P = static_cast<Index>(design_.n_outcomes());
  if (s.gamma.size() != n_fixed_ || s.team_effects.rows() != static_cast<Index>(design_.n_teams()) ||
      s.team_effects.cols() != team_dim_ ||
      s.facility_effects.rows() != static_cast<Index>(design_.n_facilities()) ||
      s.facility_effects.cols() != facility_dim_ || s.sigma_patient.rows() != P ||
      s.sigma_patient.cols() != P || s.sigma_team.rows() != team_dim_ ||
      s.sigma_facility.rows() != facility_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "parameter state does not match the design layout");
  }
}

void GibbsSampler::draw_effects(ParameterState& s, Rng& rng, long iteration) {
  const auto P = static_cast<Index>(design_.n_outcomes());
  const Index c = n_fixed_, qt = team_dim_, qf = facility_dim_;
  const Index t0 = c, f0 = c + qt;
  const MatrixXd r_inv = spd_inverse(s.sigma_patient, iteration, "sigma_patient");
  const MatrixXd gt_inv = qt > 0 ? spd_inverse(s.sigma_team, iteration, "sigma_team") : MatrixXd();
  const MatrixXd gf_inv = qf > 0 ? spd_inverse(s.sigma_facility, iteration, "sigma_facility") : MatrixXd();

  MatrixXd q_gg = fixed_prior_precision_;
  VectorXd h_g = fixed_prior_shift_;
  for (std::size_t k = 0; k < design_.n_facilities(); ++k) {
    if (qf == 0) break;
    fac_q_[k] = gf_inv;
    fac_qg_[k].setZero();
    fac_h_[k].setZero();
  }

  // Eliminate team effects, then facility effects, leaving the marginal
  // conditional of gamma; then draw back down the hierarchy.
  MatrixXd rhs, solved;
  for (std::size_t j = 0; j < design_.n_teams(); ++j) {
    MatrixXd& m = team_m_[j];
    VectorXd& h = team_h_[j];
    m.setZero();
    h.setZero();
    for (Index p = 0; p < P; ++p) {
      for (Index q = 0; q < P; ++q) {
        const double w = r_inv(p, q);
        if (w == 0.0) continue;
        const auto pq = static_cast<std::size_t>(p * P + q);
        m.noalias() += w * stats_[j].cross[pq];
        h.noalias() += w * stats_[j].resp[pq];
      }
    }
    const std::size_t k = design_.layout.facility_of_team[j];
    if (qt > 0) {
      team_llt_[j].compute(gt_inv + m.block(t0, t0, qt, qt));
      if (team_llt_[j].info() != Eigen::Success) {
        throw NumericalBreakdown(iteration, "team_effects", "conditional precision of team " +
                                                                design_.layout.team_ids[j] + " is not SPD");
      }
      rhs.resize(qt, c + qf + 1);
      rhs.leftCols(c) = m.block(t0, 0, qt, c);
      rhs.middleCols(c, qf) = m.block(t0, f0, qt, qf);
      rhs.col(c + qf) = h.segment(t0, qt);
      solved = team_llt_[j].solve(rhs);
      q_gg.noalias() += m.block(0, 0, c, c) - m.block(0, t0, c, qt) * solved.leftCols(c);
      h_g.noalias() += h.head(c) - m.block(0, t0, c, qt) * solved.col(c + qf);
      if (qf > 0) {
        const auto m_ft = m.block(f0, t0, qf, qt);
        fac_q_[k].noalias() += m.block(f0, f0, qf, qf) - m_ft * solved.middleCols(c, qf);
        fac_qg_[k].noalias() += m.block(f0, 0, qf, c) - m_ft * solved.leftCols(c);
        fac_h_[k].noalias() += h.segment(f0, qf) - m_ft * solved.col(c + qf);
      }
    } else {
      q_gg += m.block(0, 0, c, c);
      h_g += h.head(c);
      if (qf > 0) {
        fac_q_[k] += m.block(f0, f0, qf, qf);
        fac_qg_[k] += m.block(f0, 0, qf, c);
        fac_h_[k] += h.segment(f0, qf);
      }
    }
  }

  if (qf > 0) {
    for (std::size_t k = 0; k < design_.n_facilities(); ++k) {
      fac_llt_[k].compute(fac_q_[k]);
      if (fac_llt_[k].info() != Eigen::Success) {
        throw NumericalBreakdown(iteration, "facility_effects", "conditional precision of facility " +
                                                                    design_.layout.facility_ids[k] +
                                                                    " is not SPD");
      }
      rhs.resize(qf, c + 1);
      rhs.leftCols(c) = fac_qg_[k];
      rhs.col(c) = fac_h_[k];
      solved = fac_llt_[k].solve(rhs);
      q_gg.noalias() -= fac_qg_[k].transpose() * solved.leftCols(c);
      h_g.noalias() -= fac_qg_[k].transpose() * solved.col(c);
    }
  }

  Eigen::LLT<MatrixXd> gamma_llt(symmetrized(q_gg));
  if (gamma_llt.info() != Eigen::Success) {
    throw NumericalBreakdown(iteration, "gamma", "conditional precision of fixed effects is not SPD");
  }
  s.gamma = gaussian_draw(gamma_llt, h_g, rng);
  if (!s.gamma.allFinite()) throw NumericalBreakdown(iteration, "gamma", "non-finite draw");

  if (qf > 0) {
    for (std::size_t k = 0; k < design_.n_facilities(); ++k) {
      const VectorXd rhs_k = fac_h_[k] - fac_qg_[k] * s.gamma;
      s.facility_effects.row(static_cast<Index>(k)) = gaussian_draw(fac_llt_[k], rhs_k, rng).transpose();
    }
    if (!all_finite(s.facility_effects)) throw NumericalBreakdown(iteration, "facility_effects", "non-finite draw");
  }
  if (qt > 0) {
    for (std::size_t j = 0; j < design_.n_teams(); ++j) {
      const MatrixXd& m = team_m_[j];
      VectorXd rhs_j = team_h_[j].segment(t0, qt) - m.block(t0, 0, qt, c) * s.gamma;
      if (qf > 0) {
        const auto k = static_cast<Index>(design_.layout.facility_of_team[j]);
        rhs_j.noalias() -= m.block(t0, f0, qt, qf) * s.facility_effects.row(k).transpose();
      }
      s.team_effects.row(static_cast<Index>(j)) = gaussian_draw(team_llt_[j], rhs_j, rng).transpose();
    }
    if (!all_finite(s.team_effects)) throw NumericalBreakdown(iteration, "team_effects", "non-finite draw");
  }
}

MatrixXd GibbsSampler::residuals(const ParameterState& s) const { return residual_matrix(s, design_); }

void GibbsSampler::draw_covariances(ParameterState& s, Rng& rng, long iteration) const {
  const auto& spec = design_.layout.spec;
  auto draw_level = [&](Level level, const MatrixXd& effects, MatrixXd& sigma, const char* block) {
    const Index q = effects.cols();
    if (q == 0) return;
    const LevelPrior& lp = priors_.level(level);
    const double n = static_cast<double>(effects.rows());
    if (spec.structure(level) == CovStructure::PooledDiagonal) {
      const double ss = effects.squaredNorm();
      const double var = sample_inverse_gamma(lp.shape + 0.5 * n * static_cast<double>(q), lp.rate + 0.5 * ss, rng);
      if (!std::isfinite(var) || !(var > 0.0)) throw NumericalBreakdown(iteration, block, "non-positive variance draw");
      sigma = var * MatrixXd::Identity(q, q);
      return;
    }
    const MatrixXd scale = symmetrized(lp.scale + effects.transpose() * effects);
    if (!sample_inverse_wishart(lp.df + n, scale, rng, sigma)) {
      throw NumericalBreakdown(iteration, block, "inverse-Wishart scale is not SPD");
    }
    sigma = symmetrized(sigma);
    if (!all_finite(sigma) || Eigen::LLT<MatrixXd>(sigma).info() != Eigen::Success) {
      throw NumericalBreakdown(iteration, block, "covariance draw is not SPD");
    }
  };
  draw_level(Level::Facility, s.facility_effects, s.sigma_facility, "sigma_facility");
  draw_level(Level::Team, s.team_effects, s.sigma_team, "sigma_team");
  if (!priors_.known_patient_covariance) {
    draw_level(Level::Patient, residuals(s), s.sigma_patient, "sigma_patient");
  }
}

void GibbsSampler::step(ParameterState& state, Rng& rng, long iteration) {
  check_state(state);
  draw_effects(state, rng, iteration);
  draw_covariances(state, rng, iteration);
}

double GibbsSampler::deviance(const ParameterState& state) const {
  check_state(state);
  return hbmv::deviance(state, design_);
}

InitResult init_state(const DesignStructure& design, const Priors& priors) {
  return GibbsSampler(design, priors).init_state();
}

ParameterState gibbs_step(const ParameterState& state, const DesignStructure& design,
                          const Priors& priors, Rng& rng) {
  GibbsSampler sampler(design, priors);
  ParameterState next = state;
  sampler.step(next, rng);
  return next;
}

MatrixXd residual_matrix(const ParameterState& s, const DesignStructure& design) {
  const auto P = static_cast<Index>(design.n_outcomes());
  const auto n = static_cast<Index>(design.n_patients());
  const Index qt = design.team_rows.cols();
  const Index qf = design.facility_rows.cols();
  if (s.gamma.size() != design.fixed_rows.cols() || s.team_effects.cols() != qt ||
      s.facility_effects.cols() != qf || s.team_effects.rows() != static_cast<Index>(design.n_teams()) ||
      s.facility_effects.rows() != static_cast<Index>(design.n_facilities())) {
    throw Error(ErrorCode::DimensionMismatch, "parameter state does not match the design layout");
  }
  VectorXd r = design.y - design.fixed_rows * s.gamma;
  for (Index i = 0; i < n; ++i) {
    const auto j = static_cast<Index>(design.team_of_patient[static_cast<std::size_t>(i)]);
    const auto k = static_cast<Index>(design.layout.facility_of_team[static_cast<std::size_t>(j)]);
    for (Index p = 0; p < P; ++p) {
      const Index row = i * P + p;
      if (qt > 0) r(row) -= design.team_rows.row(row).dot(s.team_effects.row(j));
      if (qf > 0) r(row) -= design.facility_rows.row(row).dot(s.facility_effects.row(k));
    }
  }
  return r.reshaped(P, n).transpose();
}

double deviance(const ParameterState& state, const DesignStructure& design) {
  const auto P = static_cast<double>(design.n_outcomes());
  const MatrixXd e = residual_matrix(state, design);
  Eigen::LLT<MatrixXd> llt(symmetrized(state.sigma_patient));
  if (state.sigma_patient.rows() != e.cols() || llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalBreakdown, "deviance: patient covariance is not SPD");
  }
  const MatrixXd whitened = llt.matrixL().solve(e.transpose());
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double n = static_cast<double>(e.rows());
  const double d = whitened.squaredNorm() + n * (P * std::log(2.0 * std::numbers::pi) + log_det);
  if (!std::isfinite(d)) throw Error(ErrorCode::NumericalBreakdown, "deviance is not finite");
  return d;
}

ChainSamples run_chain(const DesignStructure& design, const Priors& priors, const McmcConfig& config,
                       std::size_t chain_index) {
  validate_config(config);
  GibbsSampler sampler(design, priors);
  Rng rng = make_rng(config.seed, chain_index);
  ParameterState state = sampler.init_state().state;

  ChainSamples chain;
  chain.config = config;
  chain.chain_index = chain_index;
  chain.draws.reserve(static_cast<std::size_t>(config.retained()));
  chain.deviance.reserve(static_cast<std::size_t>(config.retained()));
  for (long it = 1; it <= config.n_iterations; ++it) {
    sampler.step(state, rng, it);
    if (it > config.n_burnin && (it - config.n_burnin) % config.thin == 0) {
      const double dev = sampler.deviance(state);
      if (!std::isfinite(dev)) throw NumericalBreakdown(it, "deviance", "non-finite deviance");
      chain.draws.push_back(state);
      chain.deviance.push_back(dev);
    }
  }
  return chain;
}

std::vector<ChainSamples> run_chains(const DesignStructure& design, const Priors& priors,
                                     const McmcConfig& config) {
  validate_config(config);
  std::vector<ChainSamples> chains(static_cast<std::size_t>(config.n_chains));
  parallel_for(chains.size(), [&](std::size_t c) { chains[c] = run_chain(design, priors, config, c); });
  return chains;
}

}  // namespace hbmv
