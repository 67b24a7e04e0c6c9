#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbmv/design.hpp"
#include "hbmv/random.hpp"

namespace hbmv {

// Inverse-Wishart(df, scale) for Unstructured levels; inverse-gamma(shape,
// rate) on the common variance for PooledDiagonal levels.
struct LevelPrior {
  double df = 0.0;
  Eigen::MatrixXd scale;
  double shape = 0.001;
  double rate = 0.001;
};

struct Priors {
  Eigen::VectorXd fixed_mean;
  Eigen::VectorXd fixed_variance;
  std::array<LevelPrior, 3> levels;  // indexed by Level
  // When set, the residual covariance is held at this value instead of sampled.
  std::optional<Eigen::MatrixXd> known_patient_covariance;

  const LevelPrior& level(Level l) const { return levels[static_cast<int>(l)]; }
  LevelPrior& level(Level l) { return levels[static_cast<int>(l)]; }
};

// gamma ~ N(0, 1e6) per coefficient, IW(dim + 1, I), IG(0.001, 0.001).
Priors default_priors(const DesignLayout& layout);

// Throws InvalidPriors.
void validate_priors(const Priors& priors, const DesignLayout& layout);

struct McmcConfig {
  long n_iterations = 50000;
  long n_burnin = 10000;
  long thin = 25;
  int n_chains = 2;
  std::uint64_t seed = 1234567;

  long retained() const { return (n_iterations - n_burnin) / thin; }
};

// Throws InvalidConfig.
void validate_config(const McmcConfig& config);

struct ParameterState {
  Eigen::VectorXd gamma;             // merged fixed-effect columns
  Eigen::MatrixXd team_effects;      // canonical team x team dim
  Eigen::MatrixXd facility_effects;  // canonical facility x facility dim
  Eigen::MatrixXd sigma_patient;     // P x P
  Eigen::MatrixXd sigma_team;
  Eigen::MatrixXd sigma_facility;

  const Eigen::MatrixXd& sigma(Level level) const;
};

struct ChainSamples {
  McmcConfig config;
  std::size_t chain_index = 0;
  std::vector<ParameterState> draws;
  std::vector<double> deviance;
};

struct InitResult {
  ParameterState state;
  bool singular_design = false;  // least-squares start failed; gamma set to 0
};

class GibbsSampler {
 public:
  GibbsSampler(const DesignStructure& design, Priors priors);

  InitResult init_state() const;

  // One sweep in place: (gamma, facility effects, team effects) drawn jointly
  // from their Gaussian conditional in that order, then sigma_facility,
  // sigma_team, sigma_patient.
  void step(ParameterState& state, Rng& rng, long iteration = 0);

  double deviance(const ParameterState& state) const;

  const DesignStructure& design() const { return design_; }
  const Priors& priors() const { return priors_; }

 private:
  struct TeamStats {
    std::vector<Eigen::MatrixXd> cross;  // P*P blocks: sum_i d_ip d_iq^T
    std::vector<Eigen::VectorXd> resp;   // P*P vectors: sum_i d_ip y_iq
  };

  void check_state(const ParameterState& state) const;
  void draw_effects(ParameterState& state, Rng& rng, long iteration);
  void draw_covariances(ParameterState& state, Rng& rng, long iteration) const;
  Eigen::MatrixXd residuals(const ParameterState& state) const;  // N x P

  const DesignStructure& design_;
  Priors priors_;
  Eigen::Index n_fixed_ = 0;
  Eigen::Index team_dim_ = 0;
  Eigen::Index facility_dim_ = 0;
  std::vector<TeamStats> stats_;
  Eigen::MatrixXd fixed_prior_precision_;
  Eigen::VectorXd fixed_prior_shift_;

  // per-sweep workspace
  std::vector<Eigen::MatrixXd> team_m_;
  std::vector<Eigen::VectorXd> team_h_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> team_llt_;
  std::vector<Eigen::MatrixXd> fac_q_;
  std::vector<Eigen::MatrixXd> fac_qg_;
  std::vector<Eigen::VectorXd> fac_h_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> fac_llt_;
};

InitResult init_state(const DesignStructure& design, const Priors& priors);

ParameterState gibbs_step(const ParameterState& state, const DesignStructure& design,
                          const Priors& priors, Rng& rng);

// Per-patient residuals y_i - D_i theta, one row per canonical patient.
Eigen::MatrixXd residual_matrix(const ParameterState& state, const DesignStructure& design);

// -2 log-likelihood of all responses given the full state (random effects
// included in the conditioning).
double deviance(const ParameterState& state, const DesignStructure& design);

ChainSamples run_chain(const DesignStructure& design, const Priors& priors, const McmcConfig& config,
                       std::size_t chain_index);

// config.n_chains chains, run concurrently (bounded by HBMV_THREADS).
std::vector<ChainSamples> run_chains(const DesignStructure& design, const Priors& priors,
                                     const McmcConfig& config);

}  // namespace hbmv
