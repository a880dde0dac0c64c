// Acceptance gate: eight criteria, one pass/fail line each. Exit 0 iff
// all pass. Everything here is deterministic given the committed seeds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "avi/data_io.hpp"
#include "avi/gmm.hpp"
#include "avi/harness.hpp"
#include "avi/special.hpp"
#include "avi/verify.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Committed master seed for the statistical annealing-benefit check
// (criterion 6); the check is expected to pass for most, but not
// necessarily all, alternative seeds.
constexpr std::uint64_t kBenefitMasterSeed = 20260824ULL;

bool suite_passes(const std::string& name, std::string& detail) {
  const auto reports = avi::verify_suite(name);
  int failed = 0;
  for (const auto& r : reports)
    if (!r.pass) ++failed;
  std::ostringstream os;
  os << reports.size() - failed << "/" << reports.size() << " checks";
  if (failed) {
    for (const auto& r : reports)
      if (!r.pass) os << "; FAIL " << r.name << " value=" << r.value;
  }
  detail = os.str();
  return failed == 0;
}

bool kernels_pass(std::string& detail) {
  using avi::digamma;
  using avi::ln_gamma;
  bool ok = true;
  auto near = [&](double a, double b, double tol) {
    if (std::abs(a - b) > tol) ok = false;
  };
  near(digamma(1.0), -0.57721566490153286, 1e-12);
  near(digamma(2.0), 0.42278433509846713, 1e-12);
  near(digamma(0.5), -1.9635100260214235, 1e-12);
  near(ln_gamma(1.0), 0.0, 1e-12);
  near(ln_gamma(2.0), 0.0, 1e-12);
  near(ln_gamma(0.5), 0.5723649429247001, 1e-12);

  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> log_u(std::log(1e-3), std::log(1e6));
  for (int i = 0; i < 1000 && ok; ++i) {
    const double x = std::exp(log_u(rng));
    near(digamma(x + 1.0) - digamma(x), 1.0 / x,
         1e-12 * std::max(1.0, std::abs(1.0 / x)));
    near(ln_gamma(x + 1.0) - ln_gamma(x), std::log(x),
         1e-12 * std::max(1.0, std::abs(ln_gamma(x + 1.0))));
  }

  std::uniform_real_distribution<double> u(0.05, 8.0);
  int negative_kl = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 2 + static_cast<int>(rng() % 5);
    Eigen::VectorXd a(n), b(n);
    for (int k = 0; k < n; ++k) {
      a[k] = u(rng);
      b[k] = u(rng);
    }
    if (avi::dirichlet_kl(a, b) < -1e-12) ++negative_kl;
  }
  if (negative_kl) ok = false;

  // SPD preservation: every GMM update enforces SPD internally (a
  // violation throws and fails the fit), so a completed annealed fit
  // certifies SPD throughout; re-verify the final posterior explicitly.
  const auto sg = avi::synth_gmm(4, 3, 300, 1.5, 5);
  avi::GmmFitConfig fc;
  fc.K = 4;
  fc.schedule.regime = avi::Regime::Stochastic;
  fc.schedule.cutoff = 30;
  fc.max_iter = 60;
  fc.tol = -1.0;
  fc.seed = 7;
  const auto fit = avi::gmm_fit(sg.points.X, fc);
  for (const auto& c : fit.posterior.comps) {
    if (Eigen::LLT<Eigen::MatrixXd>(c.S).info() != Eigen::Success) ok = false;
    if (Eigen::LLT<Eigen::MatrixXd>(c.W).info() != Eigen::Success) ok = false;
  }

  detail = ok ? "reference values, recurrences, KL >= 0, SPD preserved"
              : "kernel check failed";
  return ok;
}

bool annealing_benefit_pass(std::string& detail) {
  const int K = 6, restarts = 50, iters = 150, cutoff = 100;
  const auto sg = avi::synth_gmm(K, 2, 2000, 2.0, 606);

  auto run_regime = [&](avi::Regime regime) {
    std::vector<std::vector<double>> traces;
    for (int run = 0; run < restarts; ++run) {
      avi::GmmFitConfig fc;
      fc.K = K;
      fc.schedule.regime = regime;
      fc.schedule.cutoff = cutoff;
      fc.max_iter = iters;
      fc.tol = -1.0;  // fixed-length traces so medians align per iteration
      fc.seed = avi::run_seed(kBenefitMasterSeed, run, K);
      traces.push_back(avi::gmm_fit(sg.points.X, fc).elbo_trace);
    }
    return traces;
  };

  auto median_at = [](std::vector<std::vector<double>>& traces, int t) {
    std::vector<double> v;
    v.reserve(traces.size());
    for (auto& tr : traces) v.push_back(tr[static_cast<std::size_t>(t)]);
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    const double hi = v[v.size() / 2];
    std::nth_element(v.begin(), v.begin() + (v.size() - 1) / 2, v.end());
    return 0.5 * (hi + v[(v.size() - 1) / 2]);
  };

  auto vi = run_regime(avi::Regime::None);
  auto stoch = run_regime(avi::Regime::Stochastic);

  const double final_vi = median_at(vi, iters - 1);
  const double final_stoch = median_at(stoch, iters - 1);
  bool early_below = false;
  for (int t = 0; t < 10; ++t)
    if (median_at(stoch, t) < median_at(vi, t)) early_below = true;
  const bool end_above = final_stoch >= final_vi;

  std::ostringstream os;
  os.precision(10);
  os << "median final ELBO stoch " << final_stoch << " vs vi " << final_vi
     << "; crossing " << (early_below && end_above ? "observed" : "NOT observed");
  detail = os.str();
  return early_below && end_above && final_stoch >= final_vi;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool determinism_pass(std::string& detail) {
  const fs::path base = fs::temp_directory_path() / "avi_acceptance_det";
  fs::remove_all(base);
  fs::create_directories(base);
  const auto sg = avi::synth_gmm(3, 2, 120, 2.0, 77);
  const fs::path data = base / "points.csv";
  avi::save_points(sg.points, data.string());

  avi::ExperimentConfig cfg;
  cfg.model = "gmm";
  cfg.data_path = data.string();
  cfg.k_grid = {2, 4};
  cfg.regimes = {avi::Regime::None, avi::Regime::Deterministic, avi::Regime::Stochastic};
  cfg.restarts = 3;
  cfg.master_seed = 99;
  cfg.max_iter = 25;
  cfg.tol = 1e-6;
  cfg.jobs = 4;  // concurrent restart pool enabled
  cfg.record_timing = false;
  cfg.out_dir = (base / "a").string();
  if (avi::run_experiment(cfg) != 0) {
    detail = "first run reported failures";
    return false;
  }
  cfg.out_dir = (base / "b").string();
  if (avi::run_experiment(cfg) != 0) {
    detail = "second run reported failures";
    return false;
  }

  int files = 0;
  for (const auto& entry : fs::directory_iterator(base / "a")) {
    ++files;
    const fs::path other = base / "b" / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
      detail = "mismatch in " + entry.path().filename().string();
      return false;
    }
  }
  std::ostringstream os;
  os << files << " output files byte-identical across repeated concurrent runs";
  detail = os.str();
  return files > 0;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<bool(std::string&)>>>
      criteria = {
          {"1 reduction-identities",
           [](std::string& d) { return suite_passes("reductions", d); }},
          {"2 elbo-monotonicity",
           [](std::string& d) { return suite_passes("monotone", d); }},
          {"3 forward-backward-enumeration",
           [](std::string& d) { return suite_passes("fb-enum", d); }},
          {"4 monte-carlo-elbo",
           [](std::string& d) { return suite_passes("mc-elbo", d); }},
          {"5 numerical-kernels", kernels_pass},
          {"6 annealing-benefit", annealing_benefit_pass},
          {"7 parameter-recovery",
           [](std::string& d) { return suite_passes("recovery", d); }},
          {"8 determinism", determinism_pass},
      };

  bool all = true;
  for (const auto& [label, fn] : criteria) {
    const auto t0 = Clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("[%s] criterion %s (%.1fs) — %s\n", ok ? "PASS" : "FAIL",
                label.c_str(), secs, detail.c_str());
    std::fflush(stdout);
    all = all && ok;
  }
  std::printf("%s\n", all ? "ACCEPTANCE: all criteria passed"
                          : "ACCEPTANCE: FAILURES present");
  return all ? 0 : 1;
}
