#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "avi/data_io.hpp"
#include "avi/rng.hpp"
#include "avi/schedule.hpp"

namespace avi {

// Variational Bayes for K-topic LDA: q(beta_k) and q(pi_d) Dirichlet rows,
// per-token multinomials phi. Tokens with the same word id in a document
// share one phi row weighted by count.

struct LdaPosterior {
  Eigen::MatrixXd beta;   // K x V topic Dirichlet params (lambda)
  Eigen::MatrixXd theta;  // D x K proportion Dirichlet params
  int K() const { return static_cast<int>(beta.rows()); }
};

struct LdaPriors {
  double theta0 = 0.0;  // 1/K
  double beta0 = 0.0;   // 100/V
  static LdaPriors standard(int K, int V);
};

// phi rows (one per distinct word in the doc, in token order) given the
// expected logs; each row sums to 1.
Eigen::MatrixXd lda_update_phi(const BowDoc& doc, const Eigen::MatrixXd& elog_beta,
                               const Eigen::VectorXd& elog_theta);

// Blended topic update. eta_draws is K x V of per-topic draws at scale
// cD/K; may be empty unless regime is Stochastic with rho > 0.
Eigen::MatrixXd lda_update_beta(const BowCorpus& corpus,
                                const std::vector<Eigen::MatrixXd>& phis,
                                const LdaPriors& priors,
                                const Eigen::MatrixXd& eta_draws, double rho,
                                double T, Regime regime);

// Per-document proportion update, scale c/K for the eta draw.
Eigen::VectorXd lda_update_theta(const BowDoc& doc, const Eigen::MatrixXd& phi,
                                 const LdaPriors& priors,
                                 const Eigen::VectorXd& eta_draw, double rho,
                                 double T, Regime regime);

double lda_elbo(const BowCorpus& corpus, const LdaPosterior& post,
                const LdaPriors& priors);

struct LdaFitConfig {
  int K = 1;
  Schedule schedule;
  int max_iter = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct LdaFitResult {
  std::vector<double> elbo_trace;
  LdaPosterior posterior;
  LdaPriors priors;
  int iterations = 0;
};

LdaFitResult lda_fit(const BowCorpus& corpus, const LdaFitConfig& config);

}  // namespace avi
