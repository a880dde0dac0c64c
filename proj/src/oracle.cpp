#include "avi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "avi/errors.hpp"

namespace avi::oracle {

namespace {

constexpr double kLnTwoPi = 1.8378770664093454836;
constexpr double kLnTwo = 0.69314718055994530942;
constexpr double kLnPi = 1.1447298858494001741;

// digamma by fourth-order central difference of std::lgamma; plenty of
// accuracy for surrogate parameters inside a Monte-Carlo average, and
// independent of the implementation's series expansion.
double psi_fd(double x) {
  const double h = 1e-3 * std::max(1.0, x * 1e-3);
  return (8.0 * (std::lgamma(x + h) - std::lgamma(x - h)) -
          (std::lgamma(x + 2 * h) - std::lgamma(x - 2 * h))) /
         (12.0 * h);
}

Eigen::VectorXd dirichlet_elog_fd(const Eigen::VectorXd& alpha) {
  const double s = psi_fd(alpha.sum());
  Eigen::VectorXd out(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) out[i] = psi_fd(alpha[i]) - s;
  return out;
}

Eigen::VectorXd sample_dirichlet(std::mt19937_64& rng, const Eigen::VectorXd& alpha) {
  Eigen::VectorXd v(alpha.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> g(alpha[i], 1.0);
    v[i] = g(rng);
    sum += v[i];
  }
  return v / sum;
}

double dirichlet_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha) {
  double lp = std::lgamma(alpha.sum());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    lp -= std::lgamma(alpha[i]);
    lp += (alpha[i] - 1.0) * std::log(x[i]);
  }
  return lp;
}

double dirichlet_logpdf_sym(const Eigen::VectorXd& x, double a) {
  return dirichlet_logpdf(x, Eigen::VectorXd::Constant(x.size(), a));
}

Eigen::VectorXd sample_gaussian(std::mt19937_64& rng, const Eigen::VectorXd& mean,
                                const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return mean + llt.matrixL() * z;
}

double gaussian_logpdf_cov(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov) {
  const Eigen::Index d = x.size();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const double ln_det =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Eigen::VectorXd diff = x - mean;
  return -0.5 * (d * kLnTwoPi + ln_det + diff.dot(llt.solve(diff)));
}

double gaussian_logpdf_prec(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& prec) {
  const Eigen::Index d = x.size();
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  const double ln_det =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Eigen::VectorXd diff = x - mean;
  return -0.5 * (d * kLnTwoPi - ln_det + diff.dot(prec * diff));
}

// Bartlett decomposition
Eigen::MatrixXd sample_wishart(std::mt19937_64& rng, const Eigen::MatrixXd& W,
                               double nu) {
  const int d = static_cast<int>(W.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(W);
  const Eigen::MatrixXd L = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    std::chi_squared_distribution<double> chi2(nu - i);
    A(i, i) = std::sqrt(chi2(rng));
    for (int j = 0; j < i; ++j) A(i, j) = normal(rng);
  }
  const Eigen::MatrixXd LA = L * A;
  return LA * LA.transpose();
}

double wishart_logpdf(const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& W,
                      double nu) {
  const int d = static_cast<int>(W.rows());
  Eigen::LLT<Eigen::MatrixXd> llt_w(W);
  Eigen::LLT<Eigen::MatrixXd> llt_l(lambda);
  const double ln_det_w =
      2.0 * llt_w.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double ln_det_l =
      2.0 * llt_l.matrixL().toDenseMatrix().diagonal().array().log().sum();
  double ln_b = -0.5 * nu * ln_det_w - 0.5 * nu * d * kLnTwo -
                0.25 * d * (d - 1) * kLnPi;
  for (int i = 1; i <= d; ++i) ln_b -= std::lgamma(0.5 * (nu + 1 - i));
  return ln_b + 0.5 * (nu - d - 1) * ln_det_l -
         0.5 * llt_w.solve(lambda).trace();
}

McEstimate finish(std::vector<double>& vals, int rejected) {
  McEstimate mc;
  mc.rejected = rejected;
  mc.used = static_cast<int>(vals.size());
  if (vals.empty()) return mc;
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= mc.used;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var = mc.used > 1 ? var / (mc.used - 1) : 0.0;
  mc.estimate = mean;
  mc.se = std::sqrt(var / mc.used);
  return mc;
}

}  // namespace

OracleReport make_report(std::string name, double target, double value,
                         double tolerance, double se) {
  OracleReport r;
  r.name = std::move(name);
  r.target = target;
  r.value = value;
  r.tolerance = tolerance;
  r.se = se;
  r.pass = std::abs(target - value) <= std::max(tolerance, 3.0 * se);
  return r;
}

double hmm_exact_loglik(const std::vector<int>& seq, const Eigen::VectorXd& pi,
                        const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const int T = static_cast<int>(seq.size());
  const int K = static_cast<int>(pi.size());
  if (T == 0) throw data_error("hmm_exact_loglik: empty sequence");
  if (std::pow(static_cast<double>(K), T) > 1e6)
    throw config_error("hmm_exact_loglik: instance too large");

  std::vector<int> path(static_cast<std::size_t>(T), 0);
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  for (;;) {
    double s = std::log(pi[path[0]]) + std::log(B(path[0], seq[0]));
    for (int t = 1; t < T; ++t)
      s += std::log(A(path[static_cast<std::size_t>(t - 1)], path[static_cast<std::size_t>(t)])) +
           std::log(B(path[static_cast<std::size_t>(t)], seq[static_cast<std::size_t>(t)]));
    scores.push_back(s);
    mx = std::max(mx, s);
    // odometer over state paths
    int t = 0;
    while (t < T && ++path[static_cast<std::size_t>(t)] == K) {
      path[static_cast<std::size_t>(t)] = 0;
      ++t;
    }
    if (t == T) break;
  }
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  return mx + std::log(sum);
}

McEstimate mc_elbo_gmm(const Eigen::MatrixXd& X, const GmmPosterior& post,
                       const GmmPriors& priors, const Eigen::MatrixXd& resp,
                       int samples, std::uint64_t seed) {
  const int N = static_cast<int>(X.rows());
  const int K = post.K();
  std::mt19937_64 rng(seed);

  // responsibility entropy is Theta-free
  double resp_entropy = 0.0;
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const double r = resp(n, k);
      if (r > 0.0) resp_entropy -= r * std::log(r);
    }

  const Eigen::MatrixXd prior_cov_mu =
      Eigen::LLT<Eigen::MatrixXd>(priors.P0).solve(
          Eigen::MatrixXd::Identity(priors.P0.rows(), priors.P0.cols()));

  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(samples));
  int rejected = 0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd pi = sample_dirichlet(
        rng, post.alpha);
    std::vector<Eigen::VectorXd> mu;
    std::vector<Eigen::MatrixXd> lambda;
    for (const auto& c : post.comps) {
      mu.push_back(sample_gaussian(rng, c.m, c.S));
      lambda.push_back(sample_wishart(rng, c.W, c.nu));
    }

    double val = resp_entropy;
    bool ok = true;
    for (int k = 0; k < K && ok; ++k) {
      Eigen::LLT<Eigen::MatrixXd> llt(lambda[static_cast<std::size_t>(k)]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      const double ln_det =
          2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      const double ln_pi_k = std::log(pi[k]);
      for (int n = 0; n < N; ++n) {
        const double r = resp(n, k);
        if (r <= 0.0) continue;
        const Eigen::VectorXd diff =
            X.row(n).transpose() - mu[static_cast<std::size_t>(k)];
        val += r * (ln_pi_k + 0.5 * ln_det - 0.5 * X.cols() * kLnTwoPi -
                    0.5 * diff.dot(lambda[static_cast<std::size_t>(k)] * diff));
      }
      // ln p(Theta_k) - ln q(Theta_k)
      val += gaussian_logpdf_cov(mu[static_cast<std::size_t>(k)], priors.m0,
                                 prior_cov_mu) -
             gaussian_logpdf_cov(mu[static_cast<std::size_t>(k)],
                                 post.comps[static_cast<std::size_t>(k)].m,
                                 post.comps[static_cast<std::size_t>(k)].S);
      val += wishart_logpdf(lambda[static_cast<std::size_t>(k)], priors.W0,
                            priors.nu0) -
             wishart_logpdf(lambda[static_cast<std::size_t>(k)],
                            post.comps[static_cast<std::size_t>(k)].W,
                            post.comps[static_cast<std::size_t>(k)].nu);
    }
    val += dirichlet_logpdf_sym(pi, priors.alpha0) -
           dirichlet_logpdf(pi, post.alpha);
    if (ok && std::isfinite(val))
      vals.push_back(val);
    else
      ++rejected;
  }
  return finish(vals, rejected);
}

McEstimate mc_elbo_hmm(const SequenceSet& data, const HmmPosterior& post,
                       const HmmPriors& priors, int samples, std::uint64_t seed) {
  const int K = post.K();
  const int V = static_cast<int>(post.B.cols());
  std::mt19937_64 rng(seed);

  // q(z) per sequence by exhaustive path enumeration under the surrogate
  // exp(E[ln theta]) parameters
  const Eigen::VectorXd elog_pi = dirichlet_elog_fd(post.pi);
  Eigen::MatrixXd elog_A(K, K), elog_B(K, V);
  for (int k = 0; k < K; ++k) {
    elog_A.row(k) = dirichlet_elog_fd(post.A.row(k).transpose()).transpose();
    elog_B.row(k) = dirichlet_elog_fd(post.B.row(k).transpose()).transpose();
  }

  struct SeqPosterior {
    std::vector<std::vector<int>> paths;
    std::vector<double> q;
    double entropy = 0.0;
  };
  std::vector<SeqPosterior> seq_posts;
  for (const auto& seq : data.seqs) {
    const int T = static_cast<int>(seq.size());
    if (std::pow(static_cast<double>(K), T) > 1e6)
      throw config_error("mc_elbo_hmm: instance too large");
    SeqPosterior sp;
    std::vector<int> path(static_cast<std::size_t>(T), 0);
    std::vector<double> scores;
    for (;;) {
      double s = elog_pi[path[0]] + elog_B(path[0], seq[0]);
      for (int t = 1; t < T; ++t)
        s += elog_A(path[static_cast<std::size_t>(t - 1)],
                    path[static_cast<std::size_t>(t)]) +
             elog_B(path[static_cast<std::size_t>(t)], seq[static_cast<std::size_t>(t)]);
      sp.paths.push_back(path);
      scores.push_back(s);
      int t = 0;
      while (t < T && ++path[static_cast<std::size_t>(t)] == K) {
        path[static_cast<std::size_t>(t)] = 0;
        ++t;
      }
      if (t == T) break;
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - mx);
    for (double s : scores) {
      const double q = std::exp(s - mx) / z;
      sp.q.push_back(q);
      if (q > 0.0) sp.entropy -= q * std::log(q);
    }
    seq_posts.push_back(std::move(sp));
  }

  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(samples));
  int rejected = 0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd pi = sample_dirichlet(rng, post.pi);
    Eigen::MatrixXd A(K, K), B(K, V);
    for (int k = 0; k < K; ++k)
      A.row(k) = sample_dirichlet(rng, post.A.row(k).transpose()).transpose();
    for (int k = 0; k < K; ++k)
      B.row(k) = sample_dirichlet(rng, post.B.row(k).transpose()).transpose();

    double val = 0.0;
    for (std::size_t n = 0; n < data.seqs.size(); ++n) {
      const auto& seq = data.seqs[n];
      const auto& sp = seq_posts[n];
      double ell = 0.0;
      for (std::size_t p = 0; p < sp.paths.size(); ++p) {
        if (sp.q[p] <= 0.0) continue;
        const auto& path = sp.paths[p];
        double lp = std::log(pi[path[0]]) + std::log(B(path[0], seq[0]));
        for (std::size_t t = 1; t < seq.size(); ++t)
          lp += std::log(A(path[t - 1], path[t])) + std::log(B(path[t], seq[t]));
        ell += sp.q[p] * lp;
      }
      val += ell + sp.entropy;
    }
    val += dirichlet_logpdf_sym(pi, priors.pi0) - dirichlet_logpdf(pi, post.pi);
    for (int k = 0; k < K; ++k) {
      val += dirichlet_logpdf_sym(A.row(k).transpose(), priors.a0) -
             dirichlet_logpdf(A.row(k).transpose(), post.A.row(k).transpose());
      val += dirichlet_logpdf_sym(B.row(k).transpose(), priors.b0) -
             dirichlet_logpdf(B.row(k).transpose(), post.B.row(k).transpose());
    }
    if (std::isfinite(val))
      vals.push_back(val);
    else
      ++rejected;
  }
  return finish(vals, rejected);
}

McEstimate mc_elbo_lda(const BowCorpus& corpus, const LdaPosterior& post,
                       const LdaPriors& priors,
                       const std::vector<Eigen::MatrixXd>& phis, int samples,
                       std::uint64_t seed) {
  const int K = post.K();
  const int D = static_cast<int>(corpus.docs.size());
  std::mt19937_64 rng(seed);
  if (static_cast<int>(phis.size()) != D)
    throw std::invalid_argument("mc_elbo_lda: phi count mismatch");

  double phi_entropy = 0.0;
  for (int d = 0; d < D; ++d) {
    const auto& doc = corpus.docs[static_cast<std::size_t>(d)];
    for (std::size_t i = 0; i < doc.tokens.size(); ++i)
      for (int k = 0; k < K; ++k) {
        const double p = phis[static_cast<std::size_t>(d)](static_cast<Eigen::Index>(i), k);
        if (p > 0.0) phi_entropy -= doc.tokens[i].second * p * std::log(p);
      }
  }

  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(samples));
  int rejected = 0;
  for (int s = 0; s < samples; ++s) {
    Eigen::MatrixXd beta(K, post.beta.cols());
    for (int k = 0; k < K; ++k)
      beta.row(k) = sample_dirichlet(rng, post.beta.row(k).transpose()).transpose();

    double val = phi_entropy;
    for (int k = 0; k < K; ++k)
      val += dirichlet_logpdf_sym(beta.row(k).transpose(), priors.beta0) -
             dirichlet_logpdf(beta.row(k).transpose(), post.beta.row(k).transpose());

    for (int d = 0; d < D; ++d) {
      const Eigen::VectorXd theta =
          sample_dirichlet(rng, post.theta.row(d).transpose());
      const auto& doc = corpus.docs[static_cast<std::size_t>(d)];
      for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
        const auto& [w, c] = doc.tokens[i];
        for (int k = 0; k < K; ++k) {
          const double p =
              phis[static_cast<std::size_t>(d)](static_cast<Eigen::Index>(i), k);
          if (p > 0.0)
            val += c * p * (std::log(theta[k]) + std::log(beta(k, w)));
        }
      }
      val += dirichlet_logpdf_sym(theta, priors.theta0) -
             dirichlet_logpdf(theta, post.theta.row(d).transpose());
    }
    if (std::isfinite(val))
      vals.push_back(val);
    else
      ++rejected;
  }
  return finish(vals, rejected);
}

}  // namespace avi::oracle
