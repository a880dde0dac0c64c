#include "avi/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "avi/data_io.hpp"
#include "avi/errors.hpp"
#include "avi/rng.hpp"
#include "avi/special.hpp"

namespace avi {

using oracle::OracleReport;
using oracle::make_report;

namespace {

// worst relative one-step decrease of a trace over [from, end)
double worst_decrease(const std::vector<double>& trace, std::size_t from = 1) {
  double worst = 0.0;
  for (std::size_t i = std::max<std::size_t>(from, 1); i < trace.size(); ++i) {
    const double drop =
        (trace[i - 1] - trace[i]) / std::max(1.0, std::abs(trace[i]));
    worst = std::max(worst, drop);
  }
  return worst;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& M) {
  Eigen::MatrixXd out = M;
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
  return out;
}

}  // namespace

double best_permutation_tv(const Eigen::MatrixXd& fitted_rows,
                           const Eigen::MatrixXd& truth_rows) {
  const int K = static_cast<int>(truth_rows.rows());
  if (fitted_rows.rows() != K || fitted_rows.cols() != truth_rows.cols())
    throw std::invalid_argument("best_permutation_tv: shape mismatch");
  if (K > 8) throw config_error("best_permutation_tv: K too large for brute force");
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst_row = 0.0;
    for (int k = 0; k < K; ++k) {
      const double tv =
          0.5 * (fitted_rows.row(perm[static_cast<std::size_t>(k)]) - truth_rows.row(k))
                    .cwiseAbs()
                    .sum();
      worst_row = std::max(worst_row, tv);
    }
    best = std::min(best, worst_row);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<OracleReport> verify_fb_enum() {
  std::vector<OracleReport> reports;
  Rng rng(12345);
  for (int i = 0; i < 100; ++i) {
    const int K = 1 + static_cast<int>(rng() % 3);
    const int T = 1 + static_cast<int>(rng() % 6);
    const int V = 2 + static_cast<int>(rng() % 3);
    Eigen::VectorXd pi = dirichlet_draw(rng, K, 1.0);
    Eigen::MatrixXd A(K, K), B(K, V);
    for (int k = 0; k < K; ++k) A.row(k) = dirichlet_draw(rng, K, 1.0).transpose();
    for (int k = 0; k < K; ++k) B.row(k) = dirichlet_draw(rng, V, 1.0).transpose();
    std::vector<int> seq(static_cast<std::size_t>(T));
    for (auto& c : seq) c = static_cast<int>(rng() % static_cast<std::uint64_t>(V));

    const auto fb = hmm_forward_backward(seq, pi.array().log(), A.array().log(),
                                         B.array().log());
    const double exact = oracle::hmm_exact_loglik(seq, pi, A, B);
    reports.push_back(make_report("fb-enum[" + std::to_string(i) + "]", exact,
                                  fb.log_norm, 1e-10));
  }
  return reports;
}

std::vector<OracleReport> verify_mc_elbo() {
  std::vector<OracleReport> reports;
  constexpr int S = 10000;

  // GMM: q = prior on empty data has ELBO exactly 0
  {
    Eigen::MatrixXd seed_data(4, 2);
    seed_data << 0.0, 0.1, 1.0, -0.4, -0.6, 0.8, 0.3, 0.2;
    const DataSummary ds = DataSummary::from(seed_data);
    const GmmPriors pri = gmm_default_priors(ds, 2);
    GmmPosterior prior_post;
    prior_post.alpha = Eigen::VectorXd::Constant(2, pri.alpha0);
    for (int k = 0; k < 2; ++k) {
      GmmComponent c;
      c.m = pri.m0;
      c.S = Eigen::LLT<Eigen::MatrixXd>(pri.P0).solve(Eigen::MatrixXd::Identity(2, 2));
      c.W = pri.W0;
      c.nu = pri.nu0;
      prior_post.comps.push_back(c);
    }
    Eigen::MatrixXd empty(0, 2);
    Eigen::MatrixXd empty_resp(0, 2);
    const double analytic = gmm_elbo(empty, prior_post, pri);
    const auto mc = oracle::mc_elbo_gmm(empty, prior_post, pri, empty_resp, S, 555);
    reports.push_back(
        make_report("mc-elbo/gmm-prior-empty", analytic, mc.estimate, 1e-9, mc.se));
  }

  // GMM tiny instance after a few VI sweeps
  {
    const auto sg = synth_gmm(2, 2, 5, 1.0, 42);
    GmmFitConfig fc;
    fc.K = 2;
    fc.max_iter = 10;
    fc.tol = 0.0;
    fc.seed = 7;
    const auto fit = gmm_fit(sg.points.X, fc);
    const Eigen::MatrixXd resp = gmm_responsibilities(sg.points.X, fit.posterior);
    const double analytic =
        gmm_elbo_given_resp(sg.points.X, fit.posterior, fit.priors, resp);
    const auto mc =
        oracle::mc_elbo_gmm(sg.points.X, fit.posterior, fit.priors, resp, S, 556);
    reports.push_back(
        make_report("mc-elbo/gmm-tiny", analytic, mc.estimate, 0.0, mc.se));
  }

  // HMM tiny instance
  {
    SequenceSet data;
    data.V = 3;
    data.seqs = {{0, 1, 2}, {2, 2, 0, 1}};
    HmmFitConfig fc;
    fc.K = 2;
    fc.max_iter = 10;
    fc.tol = 0.0;
    fc.seed = 9;
    const auto fit = hmm_fit(data, fc);
    const auto el = hmm_expected_logs(fit.posterior);
    std::vector<double> log_norms;
    for (const auto& seq : data.seqs)
      log_norms.push_back(
          hmm_forward_backward(seq, el.log_pi, el.log_A, el.log_B).log_norm);
    const double analytic = hmm_elbo(fit.posterior, fit.priors, log_norms);
    const auto mc = oracle::mc_elbo_hmm(data, fit.posterior, fit.priors, S, 557);
    reports.push_back(
        make_report("mc-elbo/hmm-tiny", analytic, mc.estimate, 0.0, mc.se));
  }

  // LDA tiny instance
  {
    BowCorpus corpus;
    corpus.V = 4;
    corpus.docs.resize(2);
    corpus.docs[0].tokens = {{0, 2}, {1, 1}};
    corpus.docs[1].tokens = {{2, 1}, {3, 2}};
    LdaFitConfig fc;
    fc.K = 2;
    fc.max_iter = 10;
    fc.tol = 0.0;
    fc.seed = 11;
    const auto fit = lda_fit(corpus, fc);
    const double analytic = lda_elbo(corpus, fit.posterior, fit.priors);
    // phis consistent with the final posterior
    Eigen::MatrixXd elog_beta(fit.posterior.beta.rows(), fit.posterior.beta.cols());
    for (Eigen::Index k = 0; k < fit.posterior.beta.rows(); ++k)
      elog_beta.row(k) =
          dirichlet_expected_log(fit.posterior.beta.row(k).transpose()).transpose();
    std::vector<Eigen::MatrixXd> phis;
    for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
      const Eigen::VectorXd elog_theta = dirichlet_expected_log(
          fit.posterior.theta.row(static_cast<Eigen::Index>(d)).transpose());
      phis.push_back(lda_update_phi(corpus.docs[d], elog_beta, elog_theta));
    }
    const auto mc =
        oracle::mc_elbo_lda(corpus, fit.posterior, fit.priors, phis, S, 558);
    reports.push_back(
        make_report("mc-elbo/lda-tiny", analytic, mc.estimate, 0.0, mc.se));
  }

  return reports;
}

std::vector<OracleReport> verify_monotone() {
  std::vector<OracleReport> reports;
  constexpr double tol = 1e-8;

  auto annealed = [](Regime regime, int cutoff) {
    Schedule s;
    s.regime = regime;
    s.cutoff = cutoff;
    return s;
  };

  for (int seed = 0; seed < 10; ++seed) {
    // GMM
    {
      const auto sg = synth_gmm(3, 2, 60, 1.5, 1000 + seed);
      GmmFitConfig fc;
      fc.K = 3;
      fc.max_iter = 40;
      fc.tol = 0.0;
      fc.seed = static_cast<std::uint64_t>(seed);
      auto plain = gmm_fit(sg.points.X, fc);
      reports.push_back(make_report("monotone/gmm-vi[" + std::to_string(seed) + "]",
                                    0.0, worst_decrease(plain.elbo_trace), tol));
      fc.schedule = annealed(Regime::Stochastic, 15);
      auto st = gmm_fit(sg.points.X, fc);
      reports.push_back(make_report("monotone/gmm-stoch-postcut[" + std::to_string(seed) + "]",
                                    0.0, worst_decrease(st.elbo_trace, 15), tol));
      fc.schedule = annealed(Regime::Deterministic, 15);
      auto dt = gmm_fit(sg.points.X, fc);
      reports.push_back(make_report("monotone/gmm-det-postcut[" + std::to_string(seed) + "]",
                                    0.0, worst_decrease(dt.elbo_trace, 15), tol));
    }
    // HMM
    {
      const auto sh = synth_hmm(2, 5, 10, 8.0, 2000 + seed);
      HmmFitConfig fc;
      fc.K = 2;
      fc.max_iter = 40;
      fc.tol = 0.0;
      fc.seed = static_cast<std::uint64_t>(seed);
      auto plain = hmm_fit(sh.seqs, fc);
      reports.push_back(make_report("monotone/hmm-vi[" + std::to_string(seed) + "]",
                                    0.0, worst_decrease(plain.elbo_trace), tol));
      fc.schedule = annealed(Regime::Stochastic, 15);
      auto st = hmm_fit(sh.seqs, fc);
      reports.push_back(make_report("monotone/hmm-stoch-postcut[" + std::to_string(seed) + "]",
                                    0.0, worst_decrease(st.elbo_trace, 15), tol));
    }
    // LDA
    {
      const auto sl = synth_lda(3, 20, 10, 25.0, 0.2, 3000 + seed);
      LdaFitConfig fc;
      fc.K = 3;
      fc.max_iter = 40;
      fc.tol = 0.0;
      fc.seed = static_cast<std::uint64_t>(seed);
      auto plain = lda_fit(sl.corpus, fc);
      reports.push_back(make_report("monotone/lda-vi[" + std::to_string(seed) + "]",
                                    0.0, worst_decrease(plain.elbo_trace), tol));
      fc.schedule = annealed(Regime::Stochastic, 15);
      auto st = lda_fit(sl.corpus, fc);
      reports.push_back(make_report("monotone/lda-stoch-postcut[" + std::to_string(seed) + "]",
                                    0.0, worst_decrease(st.elbo_trace, 15), tol));
    }
  }
  return reports;
}

std::vector<OracleReport> verify_reductions() {
  std::vector<OracleReport> reports;
  auto disabled = [](Regime regime) {
    Schedule s;
    s.regime = regime;
    s.cutoff = 0;  // rho = 0 and T = 1 from the first iteration
    return s;
  };

  {
    const auto sg = synth_gmm(3, 2, 40, 1.5, 77);
    GmmFitConfig fc;
    fc.K = 3;
    fc.max_iter = 15;
    fc.tol = 0.0;
    fc.seed = 3;
    const auto vi = gmm_fit(sg.points.X, fc);
    fc.schedule = disabled(Regime::Stochastic);
    const auto st = gmm_fit(sg.points.X, fc);
    fc.schedule = disabled(Regime::Deterministic);
    const auto dt = gmm_fit(sg.points.X, fc);
    reports.push_back(make_report("reductions/gmm-stoch-rho0", 0.0,
                                  max_abs_diff(vi.elbo_trace, st.elbo_trace), 0.0));
    reports.push_back(make_report("reductions/gmm-det-T1", 0.0,
                                  max_abs_diff(vi.elbo_trace, dt.elbo_trace), 0.0));
  }
  {
    const auto sh = synth_hmm(2, 5, 12, 10.0, 78);
    HmmFitConfig fc;
    fc.K = 2;
    fc.max_iter = 15;
    fc.tol = 0.0;
    fc.seed = 3;
    const auto vi = hmm_fit(sh.seqs, fc);
    fc.schedule = disabled(Regime::Stochastic);
    const auto st = hmm_fit(sh.seqs, fc);
    fc.schedule = disabled(Regime::Deterministic);
    const auto dt = hmm_fit(sh.seqs, fc);
    reports.push_back(make_report("reductions/hmm-stoch-rho0", 0.0,
                                  max_abs_diff(vi.elbo_trace, st.elbo_trace), 0.0));
    reports.push_back(make_report("reductions/hmm-det-T1", 0.0,
                                  max_abs_diff(vi.elbo_trace, dt.elbo_trace), 0.0));
  }
  {
    const auto sl = synth_lda(3, 20, 12, 25.0, 0.2, 79);
    LdaFitConfig fc;
    fc.K = 3;
    fc.max_iter = 15;
    fc.tol = 0.0;
    fc.seed = 3;
    const auto vi = lda_fit(sl.corpus, fc);
    fc.schedule = disabled(Regime::Stochastic);
    const auto st = lda_fit(sl.corpus, fc);
    fc.schedule = disabled(Regime::Deterministic);
    const auto dt = lda_fit(sl.corpus, fc);
    reports.push_back(make_report("reductions/lda-stoch-rho0", 0.0,
                                  max_abs_diff(vi.elbo_trace, st.elbo_trace), 0.0));
    reports.push_back(make_report("reductions/lda-det-T1", 0.0,
                                  max_abs_diff(vi.elbo_trace, dt.elbo_trace), 0.0));
  }
  return reports;
}

std::vector<OracleReport> verify_recovery() {
  std::vector<OracleReport> reports;

  // HMM: well-separated block emissions, committed seed, best of 5 restarts
  {
    const auto sh = synth_hmm(3, 9, 150, 40.0, 7);
    double best_elbo = -std::numeric_limits<double>::infinity();
    HmmPosterior best_post;
    for (int run = 0; run < 5; ++run) {
      HmmFitConfig fc;
      fc.K = 3;
      fc.schedule.regime = Regime::Stochastic;
      fc.schedule.decay = LinearDecay{0.25, 50};
      fc.schedule.cutoff = 60;
      fc.max_iter = 120;
      fc.seed = 100 + static_cast<std::uint64_t>(run);
      const auto fit = hmm_fit(sh.seqs, fc);
      if (fit.elbo_trace.back() > best_elbo) {
        best_elbo = fit.elbo_trace.back();
        best_post = fit.posterior;
      }
    }
    const double tv = best_permutation_tv(normalize_rows(best_post.B), sh.truth.B);
    reports.push_back(make_report("recovery/hmm-emissions-tv", 0.0, tv, 0.1));
  }

  // LDA: sparse well-separated topics, committed seed, best of 5 restarts
  {
    const auto sl = synth_lda(3, 30, 200, 150.0, 0.05, 11);
    double best_elbo = -std::numeric_limits<double>::infinity();
    LdaPosterior best_post;
    for (int run = 0; run < 5; ++run) {
      LdaFitConfig fc;
      fc.K = 3;
      fc.schedule.regime = Regime::Stochastic;
      fc.schedule.cutoff = 50;
      fc.max_iter = 90;
      fc.seed = 200 + static_cast<std::uint64_t>(run);
      const auto fit = lda_fit(sl.corpus, fc);
      if (fit.elbo_trace.back() > best_elbo) {
        best_elbo = fit.elbo_trace.back();
        best_post = fit.posterior;
      }
    }
    const double tv =
        best_permutation_tv(normalize_rows(best_post.beta), sl.truth.topics);
    reports.push_back(make_report("recovery/lda-topics-tv", 0.0, tv, 0.15));
  }

  return reports;
}

std::vector<OracleReport> verify_suite(const std::string& name) {
  if (name == "fb-enum") return verify_fb_enum();
  if (name == "mc-elbo") return verify_mc_elbo();
  if (name == "monotone") return verify_monotone();
  if (name == "reductions") return verify_reductions();
  if (name == "recovery") return verify_recovery();
  throw config_error("unknown verify suite '" + name +
                     "' (expected fb-enum|mc-elbo|monotone|reductions|recovery)");
}

}  // namespace avi
