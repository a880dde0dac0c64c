#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "avi/rng.hpp"
#include "avi/schedule.hpp"

namespace avi {

// Variational Bayes for a K-component Gaussian mixture with independent
// q(pi) q(mu_k) q(Lambda_k) factors:
//   q(pi)       Dirichlet(alpha)
//   q(mu_k)     Normal(m_k, S_k)
//   q(Lambda_k) Wishart(W_k, nu_k)

struct GmmComponent {
  Eigen::VectorXd m;   // mean of q(mu)
  Eigen::MatrixXd S;   // covariance of q(mu), SPD
  Eigen::MatrixXd W;   // Wishart scale, SPD
  double nu = 0.0;     // Wishart dof, > d - 1
};

struct GmmPosterior {
  Eigen::VectorXd alpha;  // Dirichlet on mixing weights
  std::vector<GmmComponent> comps;
  int K() const { return static_cast<int>(comps.size()); }
};

struct GmmPriors {
  double alpha0 = 1.0;  // symmetric Dirichlet parameter
  Eigen::VectorXd m0;
  Eigen::MatrixXd P0;  // prior precision of mu
  double nu0 = 0.0;
  Eigen::MatrixXd W0;
};

struct GmmSuffStats {
  Eigen::VectorXd N;                // soft counts, K
  std::vector<Eigen::VectorXd> s1;  // sum_n r_nk x_n
  std::vector<Eigen::MatrixXd> s2;  // sum_n r_nk x_n x_n^T
};

struct DataSummary {
  int N = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;        // empirical covariance, SPD
  Eigen::MatrixXd precision;  // cov^{-1}
  static DataSummary from(const Eigen::MatrixXd& X);
};

// alpha0 = 1/K, m0 = data mean, P0 = empirical precision, nu0 = d + 2,
// W0 chosen so E[Lambda] under the prior equals the empirical precision.
GmmPriors gmm_default_priors(const DataSummary& ds, int K);

// N x K row-stochastic responsibilities.
Eigen::MatrixXd gmm_responsibilities(const Eigen::MatrixXd& X,
                                     const GmmPosterior& post);

GmmSuffStats gmm_accumulate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& resp);

// Sufficient statistics of a random allocation of an equally sized dataset:
// Dir(1,...,1) proportions for counts, component means drawn from the
// empirical Gaussian, scatter fixed to the empirical covariance.
GmmSuffStats gmm_random_init_stats(const DataSummary& ds, int K, Rng& rng);

// Random starting posterior: allocation counts on q(pi), means drawn from
// the empirical Gaussian with ten times the empirical precision, and
// q(Lambda) deterministic with expectation the empirical precision.
GmmPosterior gmm_init(const DataSummary& ds, int K, const GmmPriors& priors,
                      Rng& rng);

// One annealed coordinate-update sweep over (pi, mu_k, Lambda_k).
// Stochastic regime blends data stats with init_stats at weight rho;
// deterministic regime scales the data increment by 1/T. init_stats may be
// null unless regime is Stochastic with rho > 0.
GmmPosterior gmm_update(const GmmPosterior& post, const GmmPriors& priors,
                        const GmmSuffStats& stats_data,
                        const GmmSuffStats* stats_init, double rho, double T,
                        Regime regime);

double gmm_elbo(const Eigen::MatrixXd& X, const GmmPosterior& post,
                const GmmPriors& priors);

// ELBO with the responsibilities supplied (must be optimal for `post` for
// the value to be the coordinate-ascent objective).
double gmm_elbo_given_resp(const Eigen::MatrixXd& X, const GmmPosterior& post,
                           const GmmPriors& priors, const Eigen::MatrixXd& resp);

struct GmmFitConfig {
  int K = 1;
  Schedule schedule;
  int max_iter = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct GmmFitResult {
  std::vector<double> elbo_trace;
  GmmPosterior posterior;
  GmmPriors priors;
  int iterations = 0;
};

GmmFitResult gmm_fit(const Eigen::MatrixXd& X, const GmmFitConfig& config);

// Naive Bayes over per-class mixtures with parameters at posterior means.
// Ties break toward the lowest class index.
std::vector<int> gmm_classify(const Eigen::MatrixXd& X,
                              const std::vector<GmmPosterior>& class_posts,
                              const Eigen::VectorXd& class_priors);

}  // namespace avi
