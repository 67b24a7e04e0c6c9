#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace hbmv {

using Rng = std::mt19937_64;

// Stream for one chain; distinct chain indices give distinct streams.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng);

// x ~ N(mean, cov); returns false if cov is not SPD.
bool sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng, Eigen::VectorXd& out);

// Sigma ~ IW(df, scale), density proportional to
// |Sigma|^{-(df+d+1)/2} exp(-tr(scale Sigma^{-1})/2); E[Sigma] = scale/(df-d-1).
// Returns false if scale is not SPD.
bool sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, Rng& rng, Eigen::MatrixXd& out);

// sigma^2 ~ IG(shape, rate), i.e. 1/sigma^2 ~ Gamma(shape, rate).
double sample_inverse_gamma(double shape, double rate, Rng& rng);

}  // namespace hbmv
