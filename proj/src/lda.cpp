#include "avi/lda.hpp"

#include <cmath>

#include "avi/errors.hpp"
#include "avi/natural_params.hpp"
#include "avi/special.hpp"

namespace avi {

namespace {

Eigen::VectorXd blend_row(const Eigen::VectorXd& correct, const Eigen::VectorXd* eta,
                          double rho, double T, Regime regime, const char* who) {
  NaturalParams c{Family::Dirichlet, {correct}};
  switch (regime) {
    case Regime::None:
      return correct;
    case Regime::Deterministic:
      return det_annealed_update(c, T).blocks[0];
    case Regime::Stochastic: {
      if (rho == 0.0) return correct;
      if (eta == nullptr)
        throw std::invalid_argument(std::string(who) + ": stochastic regime needs eta draw");
      NaturalParams e{Family::Dirichlet, {*eta}};
      return annealed_update(c, e, rho).blocks[0];
    }
  }
  throw std::logic_error("unreachable");
}

Eigen::MatrixXd expected_log_rows(const Eigen::MatrixXd& params) {
  Eigen::MatrixXd out(params.rows(), params.cols());
  for (Eigen::Index k = 0; k < params.rows(); ++k)
    out.row(k) = dirichlet_expected_log(params.row(k).transpose()).transpose();
  return out;
}

}  // namespace

LdaPriors LdaPriors::standard(int K, int V) {
  if (K < 1 || V < 1) throw config_error("LdaPriors: invalid sizes");
  return LdaPriors{1.0 / K, 100.0 / V};
}

Eigen::MatrixXd lda_update_phi(const BowDoc& doc, const Eigen::MatrixXd& elog_beta,
                               const Eigen::VectorXd& elog_theta) {
  const int K = static_cast<int>(elog_beta.rows());
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(doc.tokens.size()), K);
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    const int w = doc.tokens[i].first;
    Eigen::VectorXd s = elog_theta + elog_beta.col(w);
    const double mx = s.maxCoeff();
    Eigen::ArrayXd e = (s.array() - mx).exp();
    phi.row(static_cast<Eigen::Index>(i)) = (e / e.sum()).matrix().transpose();
  }
  return phi;
}

Eigen::MatrixXd lda_update_beta(const BowCorpus& corpus,
                                const std::vector<Eigen::MatrixXd>& phis,
                                const LdaPriors& priors,
                                const Eigen::MatrixXd& eta_draws, double rho,
                                double T, Regime regime) {
  if (phis.size() != corpus.docs.size())
    throw std::invalid_argument("lda_update_beta: phi count mismatch");
  const int K = phis.empty() ? 0 : static_cast<int>(phis[0].cols());
  const int V = corpus.V;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(K, V);
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    const auto& doc = corpus.docs[d];
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      const auto& [w, c] = doc.tokens[i];
      counts.col(w) += c * phis[d].row(static_cast<Eigen::Index>(i)).transpose();
    }
  }
  Eigen::MatrixXd beta(K, V);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd correct =
        counts.row(k).transpose() + Eigen::VectorXd::Constant(V, priors.beta0);
    Eigen::VectorXd eta;
    const Eigen::VectorXd* eta_ptr = nullptr;
    if (eta_draws.size() > 0) {
      eta = eta_draws.row(k).transpose();
      eta_ptr = &eta;
    }
    beta.row(k) = blend_row(correct, eta_ptr, rho, T, regime, "lda_update_beta").transpose();
  }
  return beta;
}

Eigen::VectorXd lda_update_theta(const BowDoc& doc, const Eigen::MatrixXd& phi,
                                 const LdaPriors& priors,
                                 const Eigen::VectorXd& eta_draw, double rho,
                                 double T, Regime regime) {
  const int K = static_cast<int>(phi.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
  for (std::size_t i = 0; i < doc.tokens.size(); ++i)
    counts += doc.tokens[i].second * phi.row(static_cast<Eigen::Index>(i)).transpose();
  const Eigen::VectorXd correct =
      counts + Eigen::VectorXd::Constant(K, priors.theta0);
  const Eigen::VectorXd* eta_ptr = eta_draw.size() > 0 ? &eta_draw : nullptr;
  return blend_row(correct, eta_ptr, rho, T, regime, "lda_update_theta");
}

double lda_elbo(const BowCorpus& corpus, const LdaPosterior& post,
                const LdaPriors& priors) {
  const int K = post.K();
  const int V = static_cast<int>(post.beta.cols());
  const Eigen::MatrixXd elog_beta = expected_log_rows(post.beta);
  const Eigen::MatrixXd elog_theta = expected_log_rows(post.theta);

  double elbo = 0.0;
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    for (const auto& [w, c] : corpus.docs[d].tokens) {
      // optimal phi makes the token term a log-sum-exp
      Eigen::VectorXd s =
          elog_theta.row(static_cast<Eigen::Index>(d)).transpose() + elog_beta.col(w);
      const double mx = s.maxCoeff();
      elbo += c * (mx + std::log((s.array() - mx).exp().sum()));
    }
    elbo -= dirichlet_kl(post.theta.row(static_cast<Eigen::Index>(d)).transpose(),
                         Eigen::VectorXd::Constant(K, priors.theta0));
  }
  for (int k = 0; k < K; ++k)
    elbo -= dirichlet_kl(post.beta.row(k).transpose(),
                         Eigen::VectorXd::Constant(V, priors.beta0));
  return elbo;
}

LdaFitResult lda_fit(const BowCorpus& corpus, const LdaFitConfig& config) {
  if (corpus.docs.empty()) throw config_error("lda_fit: empty corpus");
  if (config.K < 1) throw config_error("lda_fit: K must be >= 1");
  config.schedule.validate();

  const int K = config.K;
  const int V = corpus.V;
  const int D = static_cast<int>(corpus.docs.size());
  const double c = corpus.mean_tokens();
  const double beta_scale = c * D / K;
  const double theta_scale = c / K;
  Rng rng(config.seed);

  LdaFitResult res;
  res.priors = LdaPriors::standard(K, V);
  res.posterior.beta.resize(K, V);
  res.posterior.theta.resize(D, K);
  for (int k = 0; k < K; ++k)
    res.posterior.beta.row(k) = beta_scale * dirichlet_draw(rng, V, 1.0).transpose();
  for (int d = 0; d < D; ++d)
    res.posterior.theta.row(d) = theta_scale * dirichlet_draw(rng, K, 1.0).transpose();

  const bool stoch = config.schedule.regime == Regime::Stochastic;
  const bool det = config.schedule.regime == Regime::Deterministic;
  for (int t = 1; t <= config.max_iter; ++t) {
    const Eigen::MatrixXd elog_beta = expected_log_rows(res.posterior.beta);
    const Eigen::MatrixXd elog_theta = expected_log_rows(res.posterior.theta);
    std::vector<Eigen::MatrixXd> phis;
    phis.reserve(corpus.docs.size());
    for (int d = 0; d < D; ++d)
      phis.push_back(lda_update_phi(corpus.docs[static_cast<std::size_t>(d)], elog_beta,
                                    elog_theta.row(d).transpose()));

    const double rho = stoch ? config.schedule.rho(t) : 0.0;
    const double T = det ? config.schedule.temperature(t) : 1.0;
    Eigen::MatrixXd eta_beta;  // empty when not drawing
    Eigen::MatrixXd eta_theta;
    if (stoch && rho > 0.0) {
      eta_beta.resize(K, V);
      for (int k = 0; k < K; ++k)
        eta_beta.row(k) = beta_scale * dirichlet_draw(rng, V, 1.0).transpose();
      eta_theta.resize(D, K);
      for (int d = 0; d < D; ++d)
        eta_theta.row(d) = theta_scale * dirichlet_draw(rng, K, 1.0).transpose();
    }

    res.posterior.beta = lda_update_beta(corpus, phis, res.priors, eta_beta, rho, T,
                                         config.schedule.regime);
    for (int d = 0; d < D; ++d) {
      Eigen::VectorXd eta_row;
      if (eta_theta.size() > 0) eta_row = eta_theta.row(d).transpose();
      res.posterior.theta.row(d) =
          lda_update_theta(corpus.docs[static_cast<std::size_t>(d)],
                           phis[static_cast<std::size_t>(d)], res.priors, eta_row, rho,
                           T, config.schedule.regime)
              .transpose();
    }

    const double elbo = lda_elbo(corpus, res.posterior, res.priors);
    res.elbo_trace.push_back(elbo);
    res.iterations = t;
    if (t > config.schedule.cutoff && res.elbo_trace.size() >= 2) {
      const double prev = res.elbo_trace[res.elbo_trace.size() - 2];
      if (std::abs(elbo - prev) <= config.tol * std::max(1.0, std::abs(elbo))) break;
    }
  }
  return res;
}

}  // namespace avi
