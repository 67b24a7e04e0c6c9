#include "hbmv/random.hpp"

#include <cmath>

namespace hbmv {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

bool sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng, Eigen::VectorXd& out) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return false;
  out = mean + llt.matrixL() * standard_normal_vector(mean.size(), rng);
  return true;
}

bool sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, Rng& rng, Eigen::MatrixXd& out) {
  const Eigen::Index d = scale.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::MatrixXd c = llt.matrixL();

  // Bartlett factor of W ~ Wishart(df, I).
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < d; ++i) {
    std::gamma_distribution<double> chi2_half(0.5 * (df - static_cast<double>(i)), 2.0);
    a(i, i) = std::sqrt(chi2_half(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  // With scale = C C^T and W = C^{-T} A A^T C^{-1}: Sigma = W^{-1} = (C A^{-T})(C A^{-T})^T.
  const Eigen::MatrixXd a_inv =
      a.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd t = c * a_inv.transpose();
  out = t * t.transpose();
  out = 0.5 * (out + out.transpose()).eval();
  return true;
}

double sample_inverse_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0 / rate);
  return 1.0 / gamma(rng);
}

}  // namespace hbmv
