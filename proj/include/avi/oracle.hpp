#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avi/data_io.hpp"
#include "avi/gmm.hpp"
#include "avi/hmm.hpp"
#include "avi/lda.hpp"

// Brute-force verifiers. These deliberately re-derive everything from
// first principles (std::lgamma, their own samplers and densities) instead
// of calling into the model modules.

namespace avi::oracle {

struct OracleReport {
  std::string name;
  double target = 0.0;
  double value = 0.0;
  double tolerance = 0.0;
  double se = 0.0;  // nonzero for Monte-Carlo checks
  bool pass = false;
};

OracleReport make_report(std::string name, double target, double value,
                         double tolerance, double se = 0.0);

// ln sum over all K^T state paths of the exact path weight. pi, A, B are
// linear-domain (possibly unnormalized) surrogate parameters.
double hmm_exact_loglik(const std::vector<int>& seq, const Eigen::VectorXd& pi,
                        const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

struct McEstimate {
  double estimate = 0.0;
  double se = 0.0;
  int used = 0;
  int rejected = 0;
};

// Monte-Carlo ELBO: average over draws Theta ~ q of
// E_{q(z)}[ln p(X,z,Theta)] + H(q(z)) - ln q(Theta), with the latent
// assignments handled exactly through the supplied variational marginals.

McEstimate mc_elbo_gmm(const Eigen::MatrixXd& X, const GmmPosterior& post,
                       const GmmPriors& priors, const Eigen::MatrixXd& resp,
                       int samples, std::uint64_t seed);

// Enumerates q(z) over all state paths internally; requires
// K^len <= 10^6 per sequence.
McEstimate mc_elbo_hmm(const SequenceSet& data, const HmmPosterior& post,
                       const HmmPriors& priors, int samples, std::uint64_t seed);

McEstimate mc_elbo_lda(const BowCorpus& corpus, const LdaPosterior& post,
                       const LdaPriors& priors,
                       const std::vector<Eigen::MatrixXd>& phis, int samples,
                       std::uint64_t seed);

}  // namespace avi::oracle
