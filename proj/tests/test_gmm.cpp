#include <cmath>

#include <doctest.h>

#include "avi/data_io.hpp"
#include "avi/errors.hpp"
#include "avi/gmm.hpp"
#include "avi/special.hpp"

using namespace avi;

namespace {

GmmPosterior symmetric_posterior(int K, int d) {
  GmmPosterior post;
  post.alpha = Eigen::VectorXd::Constant(K, 2.0);
  for (int k = 0; k < K; ++k) {
    GmmComponent c;
    c.m = Eigen::VectorXd::Zero(d);
    c.S = Eigen::MatrixXd::Identity(d, d);
    c.W = Eigen::MatrixXd::Identity(d, d);
    c.nu = d + 2.0;
    post.comps.push_back(c);
  }
  return post;
}

bool spd(const Eigen::MatrixXd& M) {
  return Eigen::LLT<Eigen::MatrixXd>(M).info() == Eigen::Success;
}

}  // namespace

TEST_CASE("responsibilities: K = 1 and symmetry") {
  Eigen::MatrixXd X(3, 2);
  X << 0.0, 0.5, 1.0, -1.0, 2.0, 0.1;
  const auto one = gmm_responsibilities(X, symmetric_posterior(1, 2));
  CHECK((one.col(0).array() == 1.0).all());

  const auto two = gmm_responsibilities(X, symmetric_posterior(2, 2));
  CHECK((two.array() - 0.5).abs().maxCoeff() < 1e-14);
}

TEST_CASE("responsibilities: 1-d hand case matches the log-density formula") {
  Eigen::MatrixXd X(2, 1);
  X << -0.7, 1.3;
  GmmPosterior post;
  post.alpha = Eigen::VectorXd(2);
  post.alpha << 1.5, 3.0;
  for (int k = 0; k < 2; ++k) {
    GmmComponent c;
    c.m = Eigen::VectorXd::Constant(1, k == 0 ? -1.0 : 1.0);
    c.S = Eigen::MatrixXd::Constant(1, 1, 0.2 + 0.1 * k);
    c.W = Eigen::MatrixXd::Constant(1, 1, 0.8 + 0.3 * k);
    c.nu = 3.0 + k;
    post.comps.push_back(c);
  }
  const auto resp = gmm_responsibilities(X, post);

  const double psi_sum = digamma(post.alpha.sum());
  for (int n = 0; n < 2; ++n) {
    double log_r[2];
    for (int k = 0; k < 2; ++k) {
      const auto& c = post.comps[static_cast<std::size_t>(k)];
      const double e_lambda = c.nu * c.W(0, 0);
      const double e_logdet =
          digamma(c.nu / 2.0) + std::log(2.0) + std::log(c.W(0, 0));
      const double diff = X(n, 0) - c.m[0];
      log_r[k] = (digamma(post.alpha[k]) - psi_sum) + 0.5 * e_logdet -
                 0.5 * std::log(2.0 * M_PI) -
                 0.5 * (diff * diff * e_lambda + e_lambda * c.S(0, 0));
    }
    const double z = std::exp(log_r[0]) + std::exp(log_r[1]);
    CHECK(resp(n, 0) == doctest::Approx(std::exp(log_r[0]) / z).epsilon(1e-12));
    CHECK(resp.row(n).sum() == doctest::Approx(1.0).epsilon(1e-12).scale(1));
  }
}

TEST_CASE("accumulate: counting and hard assignments") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 0, 0, 1, -1, 0, 0, -1;
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 2, 0.5);
  auto stats = gmm_accumulate(X, uniform);
  CHECK(stats.N[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(stats.N[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(stats.N.sum() == doctest::Approx(4.0).epsilon(1e-10).scale(1));

  Eigen::MatrixXd hard = Eigen::MatrixXd::Zero(4, 2);
  hard(0, 0) = hard(1, 0) = hard(2, 1) = hard(3, 1) = 1.0;
  stats = gmm_accumulate(X, hard);
  CHECK((stats.s1[0] - (X.row(0) + X.row(1)).transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((stats.s2[1] - (X.row(2).transpose() * X.row(2) +
                        X.row(3).transpose() * X.row(3)))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("random init stats: degenerate K = 1 and mean concentration") {
  const auto sg = synth_gmm(2, 2, 200, 1.0, 21);
  const DataSummary ds = DataSummary::from(sg.points.X);
  Rng rng(17);
  const auto one = gmm_random_init_stats(ds, 1, rng);
  CHECK(one.N[0] == doctest::Approx(static_cast<double>(ds.N)).epsilon(1e-12));

  // average of many drawn component means approaches the data mean
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(2);
  const int draws = 4000;
  for (int i = 0; i < draws; ++i) {
    const auto st = gmm_random_init_stats(ds, 2, rng);
    acc += st.s1[0] / st.N[0];
  }
  acc /= draws;
  const Eigen::VectorXd sd =
      (ds.cov.diagonal() / static_cast<double>(draws)).cwiseSqrt();
  for (int j = 0; j < 2; ++j) CHECK(std::abs(acc[j] - ds.mean[j]) <= 4.0 * sd[j]);
}

TEST_CASE("update: single point, K = 1, rho = 0 increments counts") {
  Eigen::MatrixXd X(2, 1);  // summary needs >= 2 points for a sane covariance
  X << 0.0, 1.0;
  const DataSummary ds = DataSummary::from(X);
  const GmmPriors pri = gmm_default_priors(ds, 1);
  Rng rng(3);
  const GmmPosterior init = gmm_init(ds, 1, pri, rng);

  Eigen::MatrixXd one_point(1, 1);
  one_point << 0.4;
  Eigen::MatrixXd resp = Eigen::MatrixXd::Ones(1, 1);
  const auto stats = gmm_accumulate(one_point, resp);
  const auto post = gmm_update(init, pri, stats, nullptr, 0.0, 1.0, Regime::None);
  CHECK(post.alpha[0] == doctest::Approx(pri.alpha0 + 1.0).epsilon(1e-14));
  CHECK(post.comps[0].nu == doctest::Approx(pri.nu0 + 1.0).epsilon(1e-14));
}

TEST_CASE("elbo: prior posterior on empty data is zero") {
  Eigen::MatrixXd X(4, 2);
  X << 0, 0.1, 1, -0.4, -0.6, 0.8, 0.3, 0.2;
  const DataSummary ds = DataSummary::from(X);
  const GmmPriors pri = gmm_default_priors(ds, 2);
  GmmPosterior post;
  post.alpha = Eigen::VectorXd::Constant(2, pri.alpha0);
  for (int k = 0; k < 2; ++k) {
    GmmComponent c;
    c.m = pri.m0;
    c.S = Eigen::LLT<Eigen::MatrixXd>(pri.P0).solve(Eigen::MatrixXd::Identity(2, 2));
    c.W = pri.W0;
    c.nu = pri.nu0;
    post.comps.push_back(c);
  }
  Eigen::MatrixXd empty(0, 2);
  CHECK(gmm_elbo(empty, post, pri) == doctest::Approx(0.0).epsilon(1e-10).scale(1));
}

TEST_CASE("elbo: one plain-VI round never decreases the objective") {
  const auto sg = synth_gmm(3, 2, 80, 1.0, 33);
  const DataSummary ds = DataSummary::from(sg.points.X);
  const GmmPriors pri = gmm_default_priors(ds, 3);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const GmmPosterior init = gmm_init(ds, 3, pri, rng);
    const Eigen::MatrixXd resp = gmm_responsibilities(sg.points.X, init);
    const double before = gmm_elbo_given_resp(sg.points.X, init, pri, resp);
    const auto stats = gmm_accumulate(sg.points.X, resp);
    const auto post = gmm_update(init, pri, stats, nullptr, 0.0, 1.0, Regime::None);
    const double after = gmm_elbo_given_resp(
        sg.points.X, post, pri, gmm_responsibilities(sg.points.X, post));
    CHECK(after >= before - 1e-8 * std::max(1.0, std::abs(after)));
  }
}

TEST_CASE("fit: reduction identity and clean 1-d separation") {
  // two unit-variance clusters ten sigmas apart
  Rng rng(44);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd X(60, 1);
  std::vector<int> labels(60);
  for (int n = 0; n < 60; ++n) {
    labels[static_cast<std::size_t>(n)] = n % 2;
    X(n, 0) = (n % 2 == 0 ? -5.0 : 5.0) + noise(rng);
  }

  // rho == 0 stochastic schedule reproduces plain VI exactly
  GmmFitConfig fc;
  fc.K = 2;
  fc.max_iter = 30;
  fc.tol = 0.0;
  fc.seed = 12;
  const auto vi = gmm_fit(X, fc);
  fc.schedule.regime = Regime::Stochastic;
  fc.schedule.cutoff = 0;
  const auto st = gmm_fit(X, fc);
  CHECK(vi.elbo_trace == st.elbo_trace);

  // strongly separated clusters are assigned nearly hard and correctly;
  // plain VI can collapse onto one component from a bad start, so take the
  // best of a few restarts
  GmmFitResult best = vi;
  for (std::uint64_t seed = 13; seed < 17; ++seed) {
    GmmFitConfig rc = fc;
    rc.schedule = Schedule{};
    rc.seed = seed;
    auto fit = gmm_fit(X, rc);
    if (fit.elbo_trace.back() > best.elbo_trace.back()) best = std::move(fit);
  }
  const auto resp = gmm_responsibilities(X, best.posterior);
  int flips = 0, straight = 0;
  for (int n = 0; n < resp.rows(); ++n) {
    CHECK(resp.row(n).maxCoeff() > 0.99);
    const int hard = resp(n, 0) > resp(n, 1) ? 0 : 1;
    if (hard == labels[static_cast<std::size_t>(n)])
      ++straight;
    else
      ++flips;
  }
  CHECK(std::max(straight, flips) == resp.rows());  // correct up to label swap

  // posterior covariance/scale matrices stay SPD
  for (const auto& c : vi.posterior.comps) {
    CHECK(spd(c.S));
    CHECK(spd(c.W));
  }

  Eigen::MatrixXd empty(0, 1);
  CHECK_THROWS_AS(gmm_fit(empty, fc), config_error);
}

TEST_CASE("fit: annealed trace monotone after the cutoff") {
  const auto sg = synth_gmm(3, 2, 100, 1.5, 55);
  GmmFitConfig fc;
  fc.K = 3;
  fc.max_iter = 40;
  fc.tol = 0.0;
  fc.seed = 2;
  fc.schedule.regime = Regime::Stochastic;
  fc.schedule.cutoff = 12;
  const auto fit = gmm_fit(sg.points.X, fc);
  for (std::size_t i = 12; i + 1 < fit.elbo_trace.size(); ++i)
    CHECK(fit.elbo_trace[i + 1] >=
          fit.elbo_trace[i] - 1e-8 * std::max(1.0, std::abs(fit.elbo_trace[i + 1])));
}

TEST_CASE("classify: trivial cases and brute-force agreement") {
  Eigen::MatrixXd X(3, 1);
  X << -2.0, 0.0, 2.0;

  // one class: that class always
  std::vector<GmmPosterior> one{symmetric_posterior(2, 1)};
  const auto only = gmm_classify(X, one, Eigen::VectorXd::Constant(1, 1.0));
  CHECK(only == std::vector<int>{0, 0, 0});

  // two identical class models: exact tie, lower index wins
  std::vector<GmmPosterior> same{symmetric_posterior(2, 1), symmetric_posterior(2, 1)};
  const auto tied = gmm_classify(X, same, Eigen::VectorXd::Constant(2, 0.5));
  CHECK(tied == std::vector<int>{0, 0, 0});

  // synthetic two-class task: agree with direct posterior-mean density evaluation
  GmmPosterior left = symmetric_posterior(1, 1);
  left.comps[0].m[0] = -2.0;
  GmmPosterior right = symmetric_posterior(1, 1);
  right.comps[0].m[0] = 2.0;
  std::vector<GmmPosterior> classes{left, right};
  Eigen::MatrixXd test(7, 1);
  test << -3, -1.5, -0.2, 0.0, 0.4, 1.7, 3.1;
  const auto pred = gmm_classify(test, classes, Eigen::VectorXd::Constant(2, 0.5));
  for (int n = 0; n < test.rows(); ++n) {
    double dens[2];
    for (int cl = 0; cl < 2; ++cl) {
      const auto& c = classes[static_cast<std::size_t>(cl)].comps[0];
      const double prec = c.nu * c.W(0, 0);
      const double diff = test(n, 0) - c.m[0];
      dens[cl] = std::sqrt(prec / (2.0 * M_PI)) * std::exp(-0.5 * prec * diff * diff);
    }
    const int expect = dens[1] > dens[0] ? 1 : 0;
    CHECK(pred[static_cast<std::size_t>(n)] == expect);
  }
}
