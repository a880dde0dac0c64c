#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "avi/data_io.hpp"
#include "avi/errors.hpp"
#include "avi/harness.hpp"

using namespace avi;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "avi_test_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int count_data_rows(const std::string& csv) {
  int rows = -1;  // skip header
  std::istringstream iss(csv);
  std::string line;
  while (std::getline(iss, line))
    if (!line.empty()) ++rows;
  return rows;
}

ExperimentConfig base_config(const fs::path& data, const fs::path& out) {
  ExperimentConfig cfg;
  cfg.model = "gmm";
  cfg.data_path = data.string();
  cfg.k_grid = {3, 6};
  cfg.regimes = {Regime::None, Regime::Stochastic};
  cfg.restarts = 2;
  cfg.master_seed = 11;
  cfg.max_iter = 12;
  cfg.tol = 0.0;
  cfg.out_dir = out.string();
  cfg.record_timing = false;
  return cfg;
}

}  // namespace

TEST_CASE("run seeds are deterministic and collision-free at this scale") {
  CHECK(run_seed(1, 0, 3) == run_seed(1, 0, 3));
  CHECK(run_seed(1, 0, 3) != run_seed(1, 1, 3));
  CHECK(run_seed(1, 0, 3) != run_seed(1, 0, 4));
  CHECK(run_seed(1, 0, 3) != run_seed(2, 0, 3));
}

TEST_CASE("regime names and schedule specs round-trip") {
  for (Regime r : {Regime::None, Regime::Deterministic, Regime::Stochastic})
    CHECK(regime_from_name(regime_name(r)) == r);
  CHECK_THROWS_AS(regime_from_name("bogus"), config_error);

  Schedule s;
  parse_schedule_decay("exp:0.8", s);
  CHECK(schedule_decay_to_string(s) == "exp:0.8");
  parse_schedule_decay("linear:0.25:50", s);
  CHECK(schedule_decay_to_string(s) == "linear:0.25:50");
  CHECK_THROWS_AS(parse_schedule_decay("cosine:1", s), config_error);
  CHECK_THROWS_AS(parse_schedule_decay("exp:abc", s), config_error);
}

TEST_CASE("run_experiment: row counts, determinism, reduction across regimes") {
  const fs::path dir = tmp_dir("exp");
  const auto sg = synth_gmm(3, 2, 60, 2.0, 13);
  const fs::path data = dir / "points.csv";
  save_points(sg.points, data.string());

  ExperimentConfig cfg = base_config(data, dir / "out1");
  CHECK(run_experiment(cfg) == 0);
  const std::string csv1 = slurp(dir / "out1/summary.csv");
  CHECK(count_data_rows(csv1) == 8);  // 2 restarts x 2 K x 2 regimes

  cfg.out_dir = (dir / "out2").string();
  cfg.jobs = 4;  // byte-identical even on the worker pool
  CHECK(run_experiment(cfg) == 0);
  CHECK(slurp(dir / "out2/summary.csv") == csv1);
  CHECK(slurp(dir / "out1/trace_stoch_K6_run1.json") ==
        slurp(dir / "out2/trace_stoch_K6_run1.json"));

  // stoch with the schedule disabled matches plain VI per (run, K)
  ExperimentConfig red = base_config(data, dir / "out3");
  red.schedule.cutoff = 0;
  CHECK(run_experiment(red) == 0);
  const auto rows = summarize((dir / "out3/summary.csv").string());
  REQUIRE(rows.size() == 4);
  // grouped K3/vi, K6/vi, K3/stoch, K6/stoch in first-seen order
  CHECK(rows[0].regime == "vi");
  CHECK(rows[2].regime == "stoch");
  CHECK(rows[0].median == doctest::Approx(rows[2].median).epsilon(1e-15).scale(1));
  CHECK(rows[1].median == doctest::Approx(rows[3].median).epsilon(1e-15).scale(1));

  CHECK_THROWS_AS(
      run_experiment(base_config(dir / "missing.csv", dir / "out4")),
      data_error);
}

TEST_CASE("summarize: medians, quartiles, failed runs") {
  const fs::path dir = tmp_dir("summ");
  const fs::path csv = dir / "summary.csv";
  {
    std::ofstream out(csv, std::ios::binary);
    out << "run,K,regime,seed,iters,final_elbo,wall_ms\n";
    out << "0,2,vi,1,5,-10,0\n";
    out << "0,3,vi,1,5,1,0\n";
    out << "1,3,vi,2,5,2,0\n";
    out << "2,3,vi,3,5,3,0\n";
    out << "3,3,vi,4,5,nan,0\n";
  }
  const auto rows = summarize(csv.string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].count == 1);
  CHECK(rows[0].median == doctest::Approx(-10.0));
  CHECK(rows[1].count == 3);
  CHECK(rows[1].failed == 1);
  CHECK(rows[1].median == doctest::Approx(2.0));
  CHECK(rows[1].q1 == doctest::Approx(1.5));
  CHECK(rows[1].q3 == doctest::Approx(2.5));

  std::ostringstream os;
  write_summary_csv(rows, os);
  CHECK(os.str().rfind("K,regime,count,failed,median,q1,q3\n", 0) == 0);

  const fs::path bad = dir / "bad.csv";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "wrong,header\n";
  }
  CHECK_THROWS_AS(summarize(bad.string()), parse_error);
}

TEST_CASE("classify_eval: separated classes and degenerate ties") {
  const fs::path dir = tmp_dir("cls");
  // two well-separated 1-class generators
  const auto a = synth_gmm(1, 2, 120, 0.0, 1);
  auto shifted = a;
  shifted.points.X.array() += 8.0;

  auto fit_and_save = [&](const Eigen::MatrixXd& X, const std::string& name) {
    GmmFitConfig fc;
    fc.K = 1;
    fc.max_iter = 20;
    fc.tol = 0.0;
    fc.seed = 1;
    const auto fit = gmm_fit(X, fc);
    std::ofstream out(dir / name, std::ios::binary);
    out << gmm_posterior_to_json(fit.posterior);
  };
  fit_and_save(a.points.X, "class_0.json");
  fit_and_save(shifted.points.X, "class_1.json");

  // held-out points from each class
  const auto test_a = synth_gmm(1, 2, 40, 0.0, 2);
  auto test_b = test_a;
  test_b.points.X.array() += 8.0;
  Eigen::MatrixXd test(80, 2);
  test << test_a.points.X, test_b.points.X;
  std::vector<int> labels(80, 0);
  std::fill(labels.begin() + 40, labels.end(), 1);
  const fs::path data = dir / "test.csv";
  const fs::path lab = dir / "labels.txt";
  PointSet ps;
  ps.X = test;
  save_points(ps, data.string());
  save_labels(labels, lab.string());

  CHECK(classify_eval(dir.string(), data.string(), lab.string()) >= 0.9);

  // identical class models: every point ties and breaks to class 0
  const fs::path same = tmp_dir("cls_same");
  fs::copy_file(dir / "class_0.json", same / "class_0.json");
  fs::copy_file(dir / "class_0.json", same / "class_1.json");
  const double acc = classify_eval(same.string(), data.string(), lab.string());
  CHECK(acc == doctest::Approx(0.5).epsilon(1e-12));  // majority rate of label 0

  const fs::path none = tmp_dir("cls_none");
  CHECK_THROWS_AS(classify_eval(none.string(), data.string(), lab.string()),
                  config_error);
}

TEST_CASE("gmm posterior JSON round trip, including trace files") {
  const fs::path dir = tmp_dir("json");
  const auto sg = synth_gmm(2, 2, 40, 2.0, 3);
  GmmFitConfig fc;
  fc.K = 2;
  fc.max_iter = 10;
  fc.tol = 0.0;
  fc.seed = 9;
  const auto fit = gmm_fit(sg.points.X, fc);
  {
    std::ofstream out(dir / "post.json", std::ios::binary);
    out << gmm_posterior_to_json(fit.posterior);
  }
  const GmmPosterior back = gmm_posterior_from_json_file((dir / "post.json").string());
  CHECK((back.alpha - fit.posterior.alpha).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.comps[1].W - fit.posterior.comps[1].W).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(back.comps[0].nu == doctest::Approx(fit.posterior.comps[0].nu));
}
