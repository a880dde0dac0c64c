#include <cmath>

#include <doctest.h>

#include "avi/data_io.hpp"
#include "avi/errors.hpp"
#include "avi/oracle.hpp"
#include "avi/rng.hpp"
#include "avi/verify.hpp"

using namespace avi;

TEST_CASE("exact loglik: K = 1 is a product of factors") {
  Eigen::VectorXd pi(1);
  pi << 0.6;
  Eigen::MatrixXd A(1, 1);
  A << 0.8;
  Eigen::MatrixXd B(1, 2);
  B << 0.3, 0.7;
  const std::vector<int> seq{1, 0, 1};
  const double expect = std::log(0.6) + 2.0 * std::log(0.8) + std::log(0.7) +
                        std::log(0.3) + std::log(0.7);
  CHECK(oracle::hmm_exact_loglik(seq, pi, A, B) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("exact loglik: length-1 sequence mixes over initial states") {
  Eigen::VectorXd pi(2);
  pi << 0.25, 0.75;
  Eigen::MatrixXd A = Eigen::MatrixXd::Constant(2, 2, 0.5);
  Eigen::MatrixXd B(2, 2);
  B << 0.9, 0.1, 0.2, 0.8;
  const std::vector<int> seq{0};
  CHECK(oracle::hmm_exact_loglik(seq, pi, A, B) ==
        doctest::Approx(std::log(0.25 * 0.9 + 0.75 * 0.2)).epsilon(1e-13));
}

TEST_CASE("exact loglik: path blow-up guard") {
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(8, 1.0 / 8);
  Eigen::MatrixXd A = Eigen::MatrixXd::Constant(8, 8, 1.0 / 8);
  Eigen::MatrixXd B = Eigen::MatrixXd::Constant(8, 2, 0.5);
  const std::vector<int> seq(10, 0);  // 8^10 > 1e6 paths
  CHECK_THROWS_AS(oracle::hmm_exact_loglik(seq, pi, A, B), config_error);
}

TEST_CASE("make_report pass rule: max(tolerance, 3 SE)") {
  CHECK(oracle::make_report("a", 1.0, 1.05, 0.1).pass);
  CHECK(!oracle::make_report("b", 1.0, 1.2, 0.1).pass);
  CHECK(oracle::make_report("c", 1.0, 1.2, 0.0, 0.1).pass);   // within 3 SE
  CHECK(!oracle::make_report("d", 1.0, 1.4, 0.0, 0.1).pass);  // beyond 3 SE
}

TEST_CASE("mc elbo: standard error shrinks like 1/sqrt(S)") {
  const auto sg = synth_gmm(2, 2, 5, 1.0, 42);
  GmmFitConfig fc;
  fc.K = 2;
  fc.max_iter = 8;
  fc.tol = 0.0;
  fc.seed = 7;
  const auto fit = gmm_fit(sg.points.X, fc);
  const Eigen::MatrixXd resp = gmm_responsibilities(sg.points.X, fit.posterior);
  const auto small =
      oracle::mc_elbo_gmm(sg.points.X, fit.posterior, fit.priors, resp, 2000, 31);
  const auto large =
      oracle::mc_elbo_gmm(sg.points.X, fit.posterior, fit.priors, resp, 8000, 32);
  CHECK(small.se > 0.0);
  const double ratio = small.se / large.se;
  CHECK(ratio > 1.4);  // expect about 2
  CHECK(ratio < 2.9);
  CHECK(small.used + small.rejected == 2000);
}

TEST_CASE("verify_suite dispatch") {
  CHECK_THROWS_AS(verify_suite("nope"), config_error);
  const auto reports = verify_suite("reductions");
  CHECK(reports.size() == 6);
  for (const auto& r : reports) CHECK(r.pass);
}

TEST_CASE("best_permutation_tv picks the optimal matching") {
  Eigen::MatrixXd truth(2, 2);
  truth << 1.0, 0.0, 0.0, 1.0;
  Eigen::MatrixXd swapped(2, 2);
  swapped << 0.05, 0.95, 0.9, 0.1;
  CHECK(best_permutation_tv(swapped, truth) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(best_permutation_tv(truth, truth) == doctest::Approx(0.0).epsilon(1e-15).scale(1));
  Eigen::MatrixXd bad(3, 2);
  bad.setZero();
  CHECK_THROWS_AS(best_permutation_tv(bad, truth), std::invalid_argument);
}
