#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "avi/data_io.hpp"
#include "avi/rng.hpp"
#include "avi/schedule.hpp"

namespace avi {

// Variational Bayes for a K-state discrete-emission HMM with Dirichlet
// factors q(pi) prod_k q(A_{k,:}) q(B_{k,:}).

struct HmmPosterior {
  Eigen::VectorXd pi;  // Dirichlet params, K
  Eigen::MatrixXd A;   // K x K, row k is the Dirichlet on transitions from k
  Eigen::MatrixXd B;   // K x V, row k is the Dirichlet on emissions from k
  int K() const { return static_cast<int>(pi.size()); }
};

struct HmmPriors {
  double pi0 = 0.0;  // 1/K
  double a0 = 0.0;   // 1/K
  double b0 = 0.0;   // 10/V
  static HmmPriors standard(int K, int V);
};

struct HmmSuffStats {
  Eigen::VectorXd init;   // expected initial-state counts, K
  Eigen::MatrixXd trans;  // expected transition counts, K x K
  Eigen::MatrixXd emit;   // expected emission counts, K x V
};

// Expected-log parameters driving the E-step surrogate.
struct HmmExpectedLogs {
  Eigen::VectorXd log_pi;
  Eigen::MatrixXd log_A;
  Eigen::MatrixXd log_B;
};

HmmExpectedLogs hmm_expected_logs(const HmmPosterior& post);

struct FbResult {
  Eigen::MatrixXd gamma;            // T x K state marginals
  std::vector<Eigen::MatrixXd> xi;  // T-1 pairwise marginals, K x K
  double log_norm = 0.0;
};

// Scaled forward-backward under exp(expected-log) surrogate parameters.
FbResult hmm_forward_backward(const std::vector<int>& seq,
                              const Eigen::VectorXd& log_pi,
                              const Eigen::MatrixXd& log_A,
                              const Eigen::MatrixXd& log_B);

HmmSuffStats hmm_accumulate(const std::vector<std::vector<int>>& seqs,
                            const std::vector<FbResult>& fb);

// Each Dirichlet factor is a uniform Dirichlet draw scaled to cN/K.
HmmPosterior hmm_random_init(int K, int V, int n_seqs, double mean_length, Rng& rng);

// eta may be null unless regime is Stochastic with rho > 0.
HmmPosterior hmm_update(const HmmSuffStats& stats, const HmmPosterior* eta,
                        const HmmPriors& priors, double rho, double T,
                        Regime regime);

// sum of E-step log normalizers minus the Dirichlet KL terms. The log
// normalizers must come from an E-step run at `post`.
double hmm_elbo(const HmmPosterior& post, const HmmPriors& priors,
                const std::vector<double>& log_norms);

struct HmmFitConfig {
  int K = 1;
  Schedule schedule;
  int max_iter = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct HmmFitResult {
  std::vector<double> elbo_trace;
  HmmPosterior posterior;
  HmmPriors priors;
  int iterations = 0;
};

HmmFitResult hmm_fit(const SequenceSet& data, const HmmFitConfig& config);

}  // namespace avi
