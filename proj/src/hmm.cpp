#include "avi/hmm.hpp"

#include <cmath>

#include "avi/errors.hpp"
#include "avi/natural_params.hpp"
#include "avi/special.hpp"

namespace avi {

namespace {

Eigen::VectorXd blend_row(const Eigen::VectorXd& correct, const Eigen::VectorXd* eta,
                          double rho, double T, Regime regime) {
  NaturalParams c{Family::Dirichlet, {correct}};
  switch (regime) {
    case Regime::None:
      return correct;
    case Regime::Deterministic:
      return det_annealed_update(c, T).blocks[0];
    case Regime::Stochastic: {
      if (rho == 0.0) return correct;
      if (eta == nullptr)
        throw std::invalid_argument("hmm_update: stochastic regime needs eta draw");
      NaturalParams e{Family::Dirichlet, {*eta}};
      return annealed_update(c, e, rho).blocks[0];
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

HmmPriors HmmPriors::standard(int K, int V) {
  if (K < 1 || V < 1) throw config_error("HmmPriors: invalid sizes");
  return HmmPriors{1.0 / K, 1.0 / K, 10.0 / V};
}

HmmExpectedLogs hmm_expected_logs(const HmmPosterior& post) {
  HmmExpectedLogs el;
  el.log_pi = dirichlet_expected_log(post.pi);
  el.log_A.resize(post.A.rows(), post.A.cols());
  el.log_B.resize(post.B.rows(), post.B.cols());
  for (Eigen::Index k = 0; k < post.A.rows(); ++k)
    el.log_A.row(k) = dirichlet_expected_log(post.A.row(k).transpose()).transpose();
  for (Eigen::Index k = 0; k < post.B.rows(); ++k)
    el.log_B.row(k) = dirichlet_expected_log(post.B.row(k).transpose()).transpose();
  return el;
}

FbResult hmm_forward_backward(const std::vector<int>& seq,
                              const Eigen::VectorXd& log_pi,
                              const Eigen::MatrixXd& log_A,
                              const Eigen::MatrixXd& log_B) {
  const int T = static_cast<int>(seq.size());
  const int K = static_cast<int>(log_pi.size());
  const int V = static_cast<int>(log_B.cols());
  if (T == 0) throw data_error("hmm_forward_backward: empty sequence");
  for (int code : seq)
    if (code < 0 || code >= V)
      throw data_error("hmm_forward_backward: code out of range");
  if (!log_pi.allFinite() || !log_A.allFinite() || !log_B.allFinite())
    throw std::invalid_argument("hmm_forward_backward: non-finite expected logs");

  const Eigen::VectorXd pi = log_pi.array().exp();
  const Eigen::MatrixXd A = log_A.array().exp();
  const Eigen::MatrixXd B = log_B.array().exp();

  // scaled forward pass; log normalizer accumulates from the scalers
  Eigen::MatrixXd alpha(T, K);
  Eigen::VectorXd scale(T);
  alpha.row(0) = (pi.array() * B.col(seq[0]).array()).transpose();
  scale[0] = alpha.row(0).sum();
  if (!(scale[0] > 0.0)) throw invariant_error("hmm_forward_backward: zero forward mass");
  alpha.row(0) /= scale[0];
  for (int t = 1; t < T; ++t) {
    alpha.row(t) =
        (alpha.row(t - 1) * A).cwiseProduct(B.col(seq[t]).transpose());
    scale[t] = alpha.row(t).sum();
    if (!(scale[t] > 0.0)) throw invariant_error("hmm_forward_backward: zero forward mass");
    alpha.row(t) /= scale[t];
  }

  Eigen::MatrixXd beta(T, K);
  beta.row(T - 1).setOnes();
  for (int t = T - 2; t >= 0; --t) {
    beta.row(t) =
        (A * (B.col(seq[t + 1]).cwiseProduct(beta.row(t + 1).transpose()))).transpose() /
        scale[t + 1];
  }

  FbResult res;
  res.log_norm = scale.array().log().sum();
  res.gamma = alpha.cwiseProduct(beta);
  res.xi.reserve(static_cast<std::size_t>(std::max(0, T - 1)));
  for (int t = 0; t + 1 < T; ++t) {
    Eigen::MatrixXd xi =
        (alpha.row(t).transpose() *
         (B.col(seq[t + 1]).cwiseProduct(beta.row(t + 1).transpose())).transpose())
            .cwiseProduct(A) /
        scale[t + 1];
    res.xi.push_back(std::move(xi));
  }
  return res;
}

HmmSuffStats hmm_accumulate(const std::vector<std::vector<int>>& seqs,
                            const std::vector<FbResult>& fb) {
  if (seqs.size() != fb.size())
    throw std::invalid_argument("hmm_accumulate: size mismatch");
  if (fb.empty()) throw config_error("hmm_accumulate: no sequences");
  const int K = static_cast<int>(fb[0].gamma.cols());
  int V = 0;
  for (const auto& s : seqs)
    for (int code : s) V = std::max(V, code + 1);

  HmmSuffStats st;
  st.init = Eigen::VectorXd::Zero(K);
  st.trans = Eigen::MatrixXd::Zero(K, K);
  st.emit = Eigen::MatrixXd::Zero(K, V);
  for (std::size_t n = 0; n < seqs.size(); ++n) {
    st.init += fb[n].gamma.row(0).transpose();
    for (const auto& xi : fb[n].xi) st.trans += xi;
    for (std::size_t t = 0; t < seqs[n].size(); ++t)
      st.emit.col(seqs[n][t]) += fb[n].gamma.row(static_cast<Eigen::Index>(t)).transpose();
  }
  return st;
}

HmmPosterior hmm_random_init(int K, int V, int n_seqs, double mean_length, Rng& rng) {
  if (K < 1 || V < 1 || n_seqs < 1)
    throw config_error("hmm_random_init: invalid sizes");
  const double scale = mean_length * n_seqs / K;
  HmmPosterior post;
  post.pi = scale * dirichlet_draw(rng, K, 1.0);
  post.A.resize(K, K);
  post.B.resize(K, V);
  for (int k = 0; k < K; ++k) post.A.row(k) = scale * dirichlet_draw(rng, K, 1.0).transpose();
  for (int k = 0; k < K; ++k) post.B.row(k) = scale * dirichlet_draw(rng, V, 1.0).transpose();
  return post;
}

HmmPosterior hmm_update(const HmmSuffStats& stats, const HmmPosterior* eta,
                        const HmmPriors& priors, double rho, double T,
                        Regime regime) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw std::invalid_argument("hmm_update: rho must be in [0,1]");
  if (!(T >= 1.0)) throw std::invalid_argument("hmm_update: T must be >= 1");
  const int K = static_cast<int>(stats.init.size());
  const int V = static_cast<int>(stats.emit.cols());

  HmmPosterior post;
  {
    const Eigen::VectorXd correct =
        stats.init + Eigen::VectorXd::Constant(K, priors.pi0);
    const Eigen::VectorXd* eta_pi = eta ? &eta->pi : nullptr;
    post.pi = blend_row(correct, eta_pi, rho, T, regime);
  }
  post.A.resize(K, K);
  post.B.resize(K, V);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd correct_a =
        stats.trans.row(k).transpose() + Eigen::VectorXd::Constant(K, priors.a0);
    Eigen::VectorXd eta_a;
    if (eta) eta_a = eta->A.row(k).transpose();
    post.A.row(k) =
        blend_row(correct_a, eta ? &eta_a : nullptr, rho, T, regime).transpose();

    const Eigen::VectorXd correct_b =
        stats.emit.row(k).transpose() + Eigen::VectorXd::Constant(V, priors.b0);
    Eigen::VectorXd eta_b;
    if (eta) eta_b = eta->B.row(k).transpose();
    post.B.row(k) =
        blend_row(correct_b, eta ? &eta_b : nullptr, rho, T, regime).transpose();
  }
  return post;
}

double hmm_elbo(const HmmPosterior& post, const HmmPriors& priors,
                const std::vector<double>& log_norms) {
  const int K = post.K();
  const int V = static_cast<int>(post.B.cols());
  double elbo = 0.0;
  for (double lz : log_norms) elbo += lz;
  elbo -= dirichlet_kl(post.pi, Eigen::VectorXd::Constant(K, priors.pi0));
  for (int k = 0; k < K; ++k) {
    elbo -= dirichlet_kl(post.A.row(k).transpose(),
                         Eigen::VectorXd::Constant(K, priors.a0));
    elbo -= dirichlet_kl(post.B.row(k).transpose(),
                         Eigen::VectorXd::Constant(V, priors.b0));
  }
  return elbo;
}

HmmFitResult hmm_fit(const SequenceSet& data, const HmmFitConfig& config) {
  if (data.seqs.empty()) throw config_error("hmm_fit: empty dataset");
  for (const auto& s : data.seqs)
    if (s.empty()) throw config_error("hmm_fit: empty sequence");
  if (config.K < 1) throw config_error("hmm_fit: K must be >= 1");
  config.schedule.validate();

  const int K = config.K;
  const int V = data.V;
  const int N = static_cast<int>(data.seqs.size());
  const double c = data.mean_length();
  Rng rng(config.seed);

  HmmFitResult res;
  res.priors = HmmPriors::standard(K, V);
  res.posterior = hmm_random_init(K, V, N, c, rng);

  auto e_step = [&](const HmmPosterior& post, std::vector<FbResult>& fb,
                    std::vector<double>& log_norms) {
    const HmmExpectedLogs el = hmm_expected_logs(post);
    fb.clear();
    log_norms.clear();
    fb.reserve(data.seqs.size());
    log_norms.reserve(data.seqs.size());
    for (const auto& seq : data.seqs) {
      fb.push_back(hmm_forward_backward(seq, el.log_pi, el.log_A, el.log_B));
      log_norms.push_back(fb.back().log_norm);
    }
  };

  std::vector<FbResult> fb;
  std::vector<double> log_norms;
  e_step(res.posterior, fb, log_norms);

  const bool stoch = config.schedule.regime == Regime::Stochastic;
  const bool det = config.schedule.regime == Regime::Deterministic;
  for (int t = 1; t <= config.max_iter; ++t) {
    HmmSuffStats stats = hmm_accumulate(data.seqs, fb);
    // pad emission counts if high codes never occur
    if (stats.emit.cols() < V) {
      Eigen::MatrixXd emit = Eigen::MatrixXd::Zero(K, V);
      emit.leftCols(stats.emit.cols()) = stats.emit;
      stats.emit = std::move(emit);
    }
    const double rho = stoch ? config.schedule.rho(t) : 0.0;
    const double T = det ? config.schedule.temperature(t) : 1.0;
    HmmPosterior eta;
    const HmmPosterior* eta_ptr = nullptr;
    if (stoch && rho > 0.0) {
      eta = hmm_random_init(K, V, N, c, rng);
      eta_ptr = &eta;
    }
    res.posterior = hmm_update(stats, eta_ptr, res.priors, rho, T,
                               config.schedule.regime);
    e_step(res.posterior, fb, log_norms);
    const double elbo = hmm_elbo(res.posterior, res.priors, log_norms);
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
