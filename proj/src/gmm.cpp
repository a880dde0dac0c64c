#include "avi/gmm.hpp"

#include <cmath>
#include <limits>

#include "avi/errors.hpp"
#include "avi/special.hpp"

namespace avi {

namespace {

constexpr double kLnTwoPi = 1.8378770664093454836;
constexpr double kLnTwo = 0.69314718055994530942;
constexpr double kLnPi = 1.1447298858494001741;

Eigen::LLT<Eigen::MatrixXd> llt_or_throw(const Eigen::MatrixXd& M, const char* who) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw invariant_error(std::string(who) + ": matrix not SPD");
  return llt;
}

double ln_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// E[ln |Lambda|] under Wishart(W, nu)
double expected_ln_det_lambda(const Eigen::MatrixXd& W, double nu) {
  const int d = static_cast<int>(W.rows());
  double v = d * kLnTwo + ln_det_from_llt(llt_or_throw(W, "expected_ln_det_lambda"));
  for (int i = 1; i <= d; ++i) v += digamma(0.5 * (nu + 1 - i));
  return v;
}

// ln of the Wishart normalizer B(W, nu)
double ln_wishart_b(const Eigen::MatrixXd& W, double nu) {
  const int d = static_cast<int>(W.rows());
  double v = -0.5 * nu * ln_det_from_llt(llt_or_throw(W, "ln_wishart_b")) -
             0.5 * nu * d * kLnTwo - 0.25 * d * (d - 1) * kLnPi;
  for (int i = 1; i <= d; ++i) v -= ln_gamma(0.5 * (nu + 1 - i));
  return v;
}

void check_posterior(const GmmPosterior& post) {
  if ((post.alpha.array() <= 0.0).any())
    throw invariant_error("gmm: non-positive Dirichlet parameter");
  for (const auto& c : post.comps) {
    const int d = static_cast<int>(c.m.size());
    if (!(c.nu > d - 1)) throw invariant_error("gmm: Wishart dof too small");
    llt_or_throw(c.S, "gmm q(mu) covariance");
    llt_or_throw(c.W, "gmm Wishart scale");
  }
}

GmmSuffStats blend_stats(const GmmSuffStats& data, const GmmSuffStats* init,
                         double rho, double T, Regime regime) {
  if (regime == Regime::Stochastic && rho > 0.0) {
    if (init == nullptr)
      throw std::invalid_argument("gmm_update: stochastic regime needs init stats");
    GmmSuffStats out;
    const int K = static_cast<int>(data.N.size());
    out.N = (1.0 - rho) * data.N + rho * init->N;
    out.s1.reserve(K);
    out.s2.reserve(K);
    for (int k = 0; k < K; ++k) {
      out.s1.push_back((1.0 - rho) * data.s1[k] + rho * init->s1[k]);
      out.s2.push_back((1.0 - rho) * data.s2[k] + rho * init->s2[k]);
    }
    return out;
  }
  if (regime == Regime::Deterministic && T > 1.0) {
    GmmSuffStats out;
    out.N = data.N / T;
    out.s1.reserve(data.s1.size());
    out.s2.reserve(data.s2.size());
    for (const auto& v : data.s1) out.s1.push_back(v / T);
    for (const auto& m : data.s2) out.s2.push_back(m / T);
    return out;
  }
  return data;
}

}  // namespace

DataSummary DataSummary::from(const Eigen::MatrixXd& X) {
  DataSummary ds;
  ds.N = static_cast<int>(X.rows());
  if (ds.N < 1) throw config_error("DataSummary: empty data");
  const int d = static_cast<int>(X.cols());
  ds.mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - ds.mean.transpose();
  ds.cov = centered.transpose() * centered / ds.N;
  ds.cov = 0.5 * (ds.cov + ds.cov.transpose());
  // ridge until invertible; degenerate data still needs SPD summaries
  double scale = ds.cov.trace() / d;
  if (!(scale > 0.0)) scale = 1.0;
  double ridge = 0.0;
  for (int attempt = 0; attempt < 16; ++attempt) {
    Eigen::MatrixXd c = ds.cov + ridge * Eigen::MatrixXd::Identity(d, d);
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) {
      ds.cov = c;
      ds.precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
      ds.precision = 0.5 * (ds.precision + ds.precision.transpose());
      return ds;
    }
    ridge = (ridge == 0.0) ? 1e-10 * scale : ridge * 10.0;
  }
  throw invariant_error("DataSummary: covariance not repairable to SPD");
}

GmmPriors gmm_default_priors(const DataSummary& ds, int K) {
  if (K < 1) throw config_error("gmm priors: K must be >= 1");
  const int d = static_cast<int>(ds.mean.size());
  GmmPriors pri;
  pri.alpha0 = 1.0 / K;
  pri.m0 = ds.mean;
  pri.P0 = ds.precision;
  pri.nu0 = d + 2;
  pri.W0 = ds.precision / pri.nu0;
  return pri;
}

Eigen::MatrixXd gmm_responsibilities(const Eigen::MatrixXd& X,
                                     const GmmPosterior& post) {
  check_posterior(post);
  const int N = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  const int K = post.K();
  if (K > 0 && post.comps[0].m.size() != d)
    throw std::invalid_argument("gmm_responsibilities: dimension mismatch");

  const Eigen::VectorXd elog_pi = dirichlet_expected_log(post.alpha);
  Eigen::MatrixXd log_r(N, K);
  for (int k = 0; k < K; ++k) {
    const auto& c = post.comps[k];
    const Eigen::MatrixXd e_lambda = c.nu * c.W;
    const double base = elog_pi[k] + 0.5 * expected_ln_det_lambda(c.W, c.nu) -
                        0.5 * d * kLnTwoPi -
                        0.5 * (e_lambda * c.S).trace();
    Eigen::MatrixXd centered = X.rowwise() - c.m.transpose();
    log_r.col(k) = Eigen::VectorXd::Constant(N, base) -
                   0.5 * ((centered * e_lambda).cwiseProduct(centered)).rowwise().sum();
  }
  // row-wise softmax
  for (int n = 0; n < N; ++n) {
    const double mx = log_r.row(n).maxCoeff();
    Eigen::ArrayXd e = (log_r.row(n).array() - mx).exp();
    log_r.row(n) = (e / e.sum()).matrix();
  }
  return log_r;
}

GmmSuffStats gmm_accumulate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& resp) {
  const int K = static_cast<int>(resp.cols());
  const int d = static_cast<int>(X.cols());
  GmmSuffStats st;
  st.N = resp.colwise().sum();
  st.s1.reserve(K);
  st.s2.reserve(K);
  for (int k = 0; k < K; ++k) {
    st.s1.push_back(X.transpose() * resp.col(k));
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index n = 0; n < X.rows(); ++n)
      s2.noalias() += resp(n, k) * X.row(n).transpose() * X.row(n);
    st.s2.push_back(0.5 * (s2 + s2.transpose()));
  }
  return st;
}

GmmSuffStats gmm_random_init_stats(const DataSummary& ds, int K, Rng& rng) {
  if (K < 1) throw config_error("gmm_random_init_stats: K must be >= 1");
  const int d = static_cast<int>(ds.mean.size());
  const Eigen::MatrixXd cov_chol =
      llt_or_throw(ds.cov, "gmm_random_init_stats").matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);

  GmmSuffStats st;
  st.N = static_cast<double>(ds.N) * dirichlet_draw(rng, K, 1.0);
  st.s1.reserve(K);
  st.s2.reserve(K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z[j] = normal(rng);
    const Eigen::VectorXd mu = ds.mean + cov_chol * z;
    st.s1.push_back(st.N[k] * mu);
    // scatter about the drawn mean equals the empirical covariance
    st.s2.push_back(st.N[k] * (ds.cov + mu * mu.transpose()));
  }
  return st;
}

GmmPosterior gmm_init(const DataSummary& ds, int K, const GmmPriors& priors,
                      Rng& rng) {
  if (K < 1) throw config_error("gmm_init: K must be >= 1");
  const int d = static_cast<int>(ds.mean.size());
  const Eigen::MatrixXd cov_chol = llt_or_throw(ds.cov, "gmm_init").matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);

  GmmPosterior post;
  post.alpha =
      Eigen::VectorXd::Constant(K, priors.alpha0) +
      static_cast<double>(ds.N) * dirichlet_draw(rng, K, 1.0);
  post.comps.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    auto& c = post.comps[static_cast<std::size_t>(k)];
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z[j] = normal(rng);
    c.m = ds.mean + cov_chol * z;
    c.S = 0.1 * ds.cov;  // precision ten times the empirical precision
    c.nu = priors.nu0;
    c.W = ds.precision / c.nu;  // E[Lambda] = empirical precision
  }
  return post;
}

GmmPosterior gmm_update(const GmmPosterior& post, const GmmPriors& priors,
                        const GmmSuffStats& stats_data,
                        const GmmSuffStats* stats_init, double rho, double T,
                        Regime regime) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw std::invalid_argument("gmm_update: rho must be in [0,1]");
  if (!(T >= 1.0)) throw std::invalid_argument("gmm_update: T must be >= 1");
  const GmmSuffStats st = blend_stats(stats_data, stats_init, rho, T, regime);
  const int K = static_cast<int>(st.N.size());
  const int d = static_cast<int>(priors.m0.size());
  const Eigen::MatrixXd W0_inv =
      llt_or_throw(priors.W0, "gmm_update W0").solve(Eigen::MatrixXd::Identity(d, d));

  GmmPosterior out;
  out.alpha = Eigen::VectorXd::Constant(K, priors.alpha0) + st.N;
  out.comps.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto& prev = post.comps[static_cast<std::size_t>(k)];
    auto& c = out.comps[static_cast<std::size_t>(k)];
    // q(mu_k) given the current q(Lambda_k)
    const Eigen::MatrixXd e_lambda = prev.nu * prev.W;
    Eigen::MatrixXd P = priors.P0 + st.N[k] * e_lambda;
    P = 0.5 * (P + P.transpose());
    const auto P_llt = llt_or_throw(P, "gmm_update q(mu) precision");
    c.m = P_llt.solve(priors.P0 * priors.m0 + e_lambda * st.s1[k]);
    c.S = P_llt.solve(Eigen::MatrixXd::Identity(d, d));
    c.S = 0.5 * (c.S + c.S.transpose());
    // q(Lambda_k) given the new q(mu_k)
    c.nu = priors.nu0 + st.N[k];
    Eigen::MatrixXd scatter = st.s2[k] - st.s1[k] * c.m.transpose() -
                              c.m * st.s1[k].transpose() +
                              st.N[k] * (c.m * c.m.transpose() + c.S);
    Eigen::MatrixXd W_inv = W0_inv + 0.5 * (scatter + scatter.transpose());
    W_inv = 0.5 * (W_inv + W_inv.transpose());
    c.W = llt_or_throw(W_inv, "gmm_update W_inv").solve(Eigen::MatrixXd::Identity(d, d));
    c.W = 0.5 * (c.W + c.W.transpose());
  }
  check_posterior(out);
  return out;
}

double gmm_elbo_given_resp(const Eigen::MatrixXd& X, const GmmPosterior& post,
                           const GmmPriors& priors, const Eigen::MatrixXd& resp) {
  const int N = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  const int K = post.K();

  const Eigen::VectorXd elog_pi = dirichlet_expected_log(post.alpha);
  double elbo = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto& c = post.comps[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd e_lambda = c.nu * c.W;
    const double base = elog_pi[k] + 0.5 * expected_ln_det_lambda(c.W, c.nu) -
                        0.5 * d * kLnTwoPi - 0.5 * (e_lambda * c.S).trace();
    Eigen::MatrixXd centered = X.rowwise() - c.m.transpose();
    const Eigen::VectorXd quad =
        ((centered * e_lambda).cwiseProduct(centered)).rowwise().sum();
    for (int n = 0; n < N; ++n) {
      const double r = resp(n, k);
      if (r <= 0.0) continue;
      elbo += r * (base - 0.5 * quad[n] - std::log(r));
    }
  }

  // KL(q(pi) || prior)
  elbo -= dirichlet_kl(post.alpha, Eigen::VectorXd::Constant(K, priors.alpha0));

  const auto P0_llt = llt_or_throw(priors.P0, "gmm_elbo P0");
  const double ln_det_p0 = ln_det_from_llt(P0_llt);
  const Eigen::MatrixXd W0_inv =
      llt_or_throw(priors.W0, "gmm_elbo W0").solve(Eigen::MatrixXd::Identity(d, d));
  const double ln_b0 = ln_wishart_b(priors.W0, priors.nu0);

  for (int k = 0; k < K; ++k) {
    const auto& c = post.comps[static_cast<std::size_t>(k)];
    // KL(q(mu_k) || N(m0, P0^{-1}))
    const Eigen::VectorXd dm = c.m - priors.m0;
    const double ln_det_s = ln_det_from_llt(llt_or_throw(c.S, "gmm_elbo S"));
    elbo -= 0.5 * ((priors.P0 * c.S).trace() + dm.dot(priors.P0 * dm) - d -
                   ln_det_p0 - ln_det_s);
    // KL(q(Lambda_k) || Wishart(W0, nu0))
    const double elog_det = expected_ln_det_lambda(c.W, c.nu);
    elbo -= ln_wishart_b(c.W, c.nu) - ln_b0 +
            0.5 * (c.nu - priors.nu0) * elog_det - 0.5 * c.nu * d +
            0.5 * c.nu * (W0_inv * c.W).trace();
  }
  return elbo;
}

double gmm_elbo(const Eigen::MatrixXd& X, const GmmPosterior& post,
                const GmmPriors& priors) {
  if (X.rows() == 0) {
    Eigen::MatrixXd resp(0, post.K());
    return gmm_elbo_given_resp(X, post, priors, resp);
  }
  return gmm_elbo_given_resp(X, post, priors, gmm_responsibilities(X, post));
}

GmmFitResult gmm_fit(const Eigen::MatrixXd& X, const GmmFitConfig& config) {
  if (X.rows() == 0) throw config_error("gmm_fit: empty data");
  if (config.K < 1 || X.rows() < config.K)
    throw config_error("gmm_fit: need N >= K >= 1");
  config.schedule.validate();

  const DataSummary ds = DataSummary::from(X);
  Rng rng(config.seed);

  GmmFitResult res;
  res.priors = gmm_default_priors(ds, config.K);
  res.posterior = gmm_init(ds, config.K, res.priors, rng);

  Eigen::MatrixXd resp = gmm_responsibilities(X, res.posterior);
  const bool stoch = config.schedule.regime == Regime::Stochastic;
  const bool det = config.schedule.regime == Regime::Deterministic;
  for (int t = 1; t <= config.max_iter; ++t) {
    const GmmSuffStats stats = gmm_accumulate(X, resp);
    const double rho = stoch ? config.schedule.rho(t) : 0.0;
    const double T = det ? config.schedule.temperature(t) : 1.0;
    GmmSuffStats init_stats;
    const GmmSuffStats* init_ptr = nullptr;
    if (stoch && rho > 0.0) {
      init_stats = gmm_random_init_stats(ds, config.K, rng);
      init_ptr = &init_stats;
    }
    res.posterior = gmm_update(res.posterior, res.priors, stats, init_ptr, rho, T,
                               config.schedule.regime);
    resp = gmm_responsibilities(X, res.posterior);
    const double elbo = gmm_elbo_given_resp(X, res.posterior, res.priors, resp);
    res.elbo_trace.push_back(elbo);
    res.iterations = t;
    if (t > config.schedule.cutoff && res.elbo_trace.size() >= 2) {
      const double prev = res.elbo_trace[res.elbo_trace.size() - 2];
      if (std::abs(elbo - prev) <= config.tol * std::max(1.0, std::abs(elbo))) break;
    }
  }
  return res;
}

std::vector<int> gmm_classify(const Eigen::MatrixXd& X,
                              const std::vector<GmmPosterior>& class_posts,
                              const Eigen::VectorXd& class_priors) {
  if (class_posts.empty()) throw config_error("gmm_classify: no class models");
  if (class_priors.size() != static_cast<Eigen::Index>(class_posts.size()))
    throw std::invalid_argument("gmm_classify: class prior size mismatch");
  const int d = static_cast<int>(X.cols());

  struct ClassDensity {
    Eigen::VectorXd ln_pi;
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::MatrixXd> prec;   // posterior-mean precision nu W
    std::vector<double> ln_norm;         // 0.5 ln|prec| - d/2 ln 2pi
  };
  std::vector<ClassDensity> models;
  models.reserve(class_posts.size());
  for (const auto& post : class_posts) {
    if (post.comps.empty() || post.comps[0].m.size() != d)
      throw std::invalid_argument("gmm_classify: dimension mismatch");
    ClassDensity cd;
    cd.ln_pi = (post.alpha / post.alpha.sum()).array().log();
    for (const auto& c : post.comps) {
      Eigen::MatrixXd prec = c.nu * c.W;
      prec = 0.5 * (prec + prec.transpose());
      const auto llt = llt_or_throw(prec, "gmm_classify precision");
      cd.mean.push_back(c.m);
      cd.prec.push_back(prec);
      cd.ln_norm.push_back(0.5 * ln_det_from_llt(llt) - 0.5 * d * kLnTwoPi);
    }
    models.push_back(std::move(cd));
  }

  std::vector<int> labels(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    double best = -std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < models.size(); ++c) {
      const auto& cd = models[c];
      double mx = -std::numeric_limits<double>::infinity();
      Eigen::VectorXd lp(cd.ln_pi.size());
      for (Eigen::Index k = 0; k < cd.ln_pi.size(); ++k) {
        const Eigen::VectorXd diff = X.row(n).transpose() - cd.mean[static_cast<std::size_t>(k)];
        lp[k] = cd.ln_pi[k] + cd.ln_norm[static_cast<std::size_t>(k)] -
                0.5 * diff.dot(cd.prec[static_cast<std::size_t>(k)] * diff);
        mx = std::max(mx, lp[k]);
      }
      const double score =
          mx + std::log((lp.array() - mx).exp().sum()) +
          std::log(class_priors[static_cast<Eigen::Index>(c)]);
      if (score > best) {  // strict: ties keep the lowest class index
        best = score;
        best_c = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(n)] = best_c;
  }
  return labels;
}

}  // namespace avi
