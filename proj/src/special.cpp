#include "avi/special.hpp"

#include <cmath>
#include <stdexcept>

#include "avi/errors.hpp"

namespace avi {

double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: x must be > 0");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // B_{2n}/(2n x^{2n}) through n = 7; tail < 5e-16 at x = 10.
  const double series =
      inv2 * (1.0 / 12.0 -
      inv2 * (1.0 / 120.0 -
      inv2 * (1.0 / 252.0 -
      inv2 * (1.0 / 240.0 -
      inv2 * (1.0 / 132.0 -
      inv2 * (691.0 / 32760.0 -
      inv2 * (1.0 / 12.0)))))));
  return acc + std::log(x) - 0.5 * inv - series;
}

double ln_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("ln_gamma: x must be > 0");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= std::log(x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Stirling correction B_{2n}/(2n(2n-1) x^{2n-1}) through n = 7.
  const double series =
      inv * (1.0 / 12.0 -
      inv2 * (1.0 / 360.0 -
      inv2 * (1.0 / 1260.0 -
      inv2 * (1.0 / 1680.0 -
      inv2 * (1.0 / 1188.0 -
      inv2 * (691.0 / 360360.0 -
      inv2 * (1.0 / 156.0)))))));
  constexpr double half_ln_two_pi = 0.91893853320467274178;
  return acc + (x - 0.5) * std::log(x) - x + half_ln_two_pi + series;
}

Eigen::VectorXd dirichlet_expected_log(const Eigen::VectorXd& alpha) {
  if ((alpha.array() <= 0.0).any())
    throw std::domain_error("dirichlet_expected_log: all alpha must be > 0");
  const double psi_sum = digamma(alpha.sum());
  Eigen::VectorXd out(alpha.size());
  for (Eigen::Index k = 0; k < alpha.size(); ++k)
    out[k] = digamma(alpha[k]) - psi_sum;
  return out;
}

double dirichlet_kl(const Eigen::VectorXd& alpha, const Eigen::VectorXd& alpha0) {
  if (alpha.size() != alpha0.size())
    throw std::invalid_argument("dirichlet_kl: length mismatch");
  if ((alpha.array() <= 0.0).any() || (alpha0.array() <= 0.0).any())
    throw std::domain_error("dirichlet_kl: parameters must be > 0");
  const double sum_a = alpha.sum();
  double kl = ln_gamma(sum_a) - ln_gamma(alpha0.sum());
  const double psi_sum = digamma(sum_a);
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    kl -= ln_gamma(alpha[k]) - ln_gamma(alpha0[k]);
    kl += (alpha[k] - alpha0[k]) * (digamma(alpha[k]) - psi_sum);
  }
  return kl;
}

}  // namespace avi
