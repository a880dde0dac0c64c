// avi: annealed variational inference for GMM / discrete HMM / LDA.
//
// Subcommands: fit, sweep, summarize, classify, verify, synth. A
// TOML-like key=value config file can stand in for flags:
//   avi --config run.cfg sweep
// with keys under a [sweep] (or other subcommand) section; command line
// flags override file values. Exit codes: 0 ok, 1 run failure,
// 2 usage/config error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "avi/data_io.hpp"
#include "avi/errors.hpp"
#include "avi/harness.hpp"
#include "avi/verify.hpp"

namespace {

struct ScheduleFlags {
  std::string decay;
  double temp_scale = 5.0;
  int cutoff = 100;

  void attach(CLI::App* cmd) {
    cmd->add_option("--schedule", decay,
                    "decay spec: exp:<base> or linear:<c>:<horizon>");
    cmd->add_option("--temp-scale", temp_scale,
                    "deterministic temperature scale (T = scale/(1-rho))");
    cmd->add_option("--cutoff", cutoff, "iteration after which annealing is off");
  }

  void apply(avi::Schedule& s) const {
    if (!decay.empty()) avi::parse_schedule_decay(decay, s);
    s.temperature_scale = temp_scale;
    s.cutoff = cutoff;
  }
};

int cmd_sweep(const std::string& model, const std::string& data,
              const std::vector<int>& k_grid,
              const std::vector<std::string>& regimes, int restarts,
              std::uint64_t seed, const ScheduleFlags& sf, int max_iter,
              double tol, const std::string& out, int jobs, bool no_timing) {
  avi::ExperimentConfig cfg;
  cfg.model = model;
  cfg.data_path = data;
  cfg.k_grid = k_grid;
  for (const auto& r : regimes) cfg.regimes.push_back(avi::regime_from_name(r));
  cfg.restarts = restarts;
  cfg.master_seed = seed;
  sf.apply(cfg.schedule);
  cfg.max_iter = max_iter;
  cfg.tol = tol;
  cfg.out_dir = out;
  cfg.jobs = jobs;
  cfg.record_timing = !no_timing;
  return avi::run_experiment(cfg);
}

int cmd_verify(const std::string& suite) {
  const auto reports = avi::verify_suite(suite);
  bool all_pass = true;
  for (const auto& r : reports) {
    all_pass = all_pass && r.pass;
    std::printf("[%s] %-40s target=%.12g value=%.12g tol=%.3g", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.target, r.value, r.tolerance);
    if (r.se > 0.0) std::printf(" se=%.3g", r.se);
    std::printf("\n");
  }
  std::printf("%s: %zu checks, %s\n", suite.c_str(), reports.size(),
              all_pass ? "all passed" : "FAILURES present");
  return all_pass ? 0 : 1;
}

int cmd_synth(const std::string& model, const std::string& out,
              const std::string& labels_out, int K, int d, int N, int V, int D,
              double mean_length, double mean_tokens, double separation,
              double concentration, std::uint64_t seed) {
  if (model == "gmm") {
    const auto s = avi::synth_gmm(K, d, N, separation, seed);
    avi::save_points(s.points, out);
    if (!labels_out.empty()) avi::save_labels(s.points.labels, labels_out);
  } else if (model == "hmm") {
    const auto s = avi::synth_hmm(K, V, N, mean_length, seed);
    avi::save_sequences(s.seqs, out);
  } else if (model == "lda") {
    const auto s = avi::synth_lda(K, V, D, mean_tokens, concentration, seed);
    avi::save_bow(s.corpus, out);
  } else {
    throw avi::config_error("model must be gmm|hmm|lda");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"annealed variational inference for conjugate mixture models"};
  app.set_config("--config", "",
                 "key=value config file; keys live in a [<subcommand>] section "
                 "and flags override the file");
  app.require_subcommand(1);

  // ---- fit: single model, single K, single regime ----
  auto* fit = app.add_subcommand("fit", "fit one model once and export its trace");
  std::string fit_model, fit_data, fit_regime = "vi", fit_out;
  int fit_k = 1, fit_max_iter = 200;
  std::uint64_t fit_seed = 0;
  double fit_tol = 1e-6;
  bool fit_no_timing = false;
  ScheduleFlags fit_sched;
  fit->add_option("--model", fit_model, "gmm|hmm|lda")->required();
  fit->add_option("--data", fit_data, "input data file")->required();
  fit->add_option("--k", fit_k, "number of components/states/topics")->required();
  fit->add_option("--regime", fit_regime, "vi|det|stoch");
  fit->add_option("--seed", fit_seed, "master seed");
  fit_sched.attach(fit);
  fit->add_option("--max-iter", fit_max_iter, "iteration cap");
  fit->add_option("--tol", fit_tol, "relative ELBO convergence tolerance");
  fit->add_option("--out", fit_out, "output directory")->required();
  fit->add_flag("--no-timing", fit_no_timing, "zero wall_ms for byte-stable output");

  // ---- sweep: restarts x K grid x regimes ----
  auto* sweep = app.add_subcommand("sweep", "multi-restart K/regime sweep");
  std::string sw_model, sw_data, sw_out;
  std::vector<int> sw_k{1};
  std::vector<std::string> sw_regimes{"vi"};
  int sw_restarts = 1, sw_max_iter = 200, sw_jobs = 1;
  std::uint64_t sw_seed = 0;
  double sw_tol = 1e-6;
  bool sw_no_timing = false;
  ScheduleFlags sw_sched;
  sweep->add_option("--model", sw_model, "gmm|hmm|lda")->required();
  sweep->add_option("--data", sw_data, "input data file")->required();
  sweep->add_option("--k", sw_k, "K grid")->required();
  sweep->add_option("--regimes", sw_regimes, "subset of vi det stoch")->required();
  sweep->add_option("--restarts", sw_restarts, "restarts per (K, regime)");
  sweep->add_option("--seed", sw_seed, "master seed");
  sw_sched.attach(sweep);
  sweep->add_option("--max-iter", sw_max_iter, "iteration cap");
  sweep->add_option("--tol", sw_tol, "relative ELBO convergence tolerance");
  sweep->add_option("--out", sw_out, "output directory")->required();
  sweep->add_option("--jobs", sw_jobs, "worker pool size");
  sweep->add_flag("--no-timing", sw_no_timing, "zero wall_ms for byte-stable output");

  // ---- summarize ----
  auto* summ = app.add_subcommand("summarize", "per-(K, regime) quartile table");
  std::string summ_in, summ_out;
  summ->add_option("--in", summ_in, "summary.csv from a sweep")->required();
  summ->add_option("--out", summ_out, "output CSV (default stdout)");

  // ---- classify ----
  auto* cls = app.add_subcommand("classify", "naive Bayes over per-class GMM fits");
  std::string cls_models, cls_data, cls_labels;
  cls->add_option("--models", cls_models, "directory of class_<label>.json")->required();
  cls->add_option("--data", cls_data, "held-out points CSV")->required();
  cls->add_option("--labels", cls_labels, "held-out labels, one per line")->required();

  // ---- verify ----
  auto* ver = app.add_subcommand("verify", "run an oracle/property suite");
  std::string ver_suite;
  ver->add_option("suite", ver_suite,
                  "fb-enum|mc-elbo|monotone|reductions|recovery")
      ->required();

  // ---- synth ----
  auto* syn = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string syn_model, syn_out, syn_labels_out;
  int syn_k = 3, syn_d = 2, syn_n = 100, syn_v = 10, syn_docs = 50;
  double syn_mean_length = 20.0, syn_mean_tokens = 40.0, syn_sep = 3.0,
         syn_conc = 0.1;
  std::uint64_t syn_seed = 0;
  syn->add_option("--model", syn_model, "gmm|hmm|lda")->required();
  syn->add_option("--out", syn_out, "output data file")->required();
  syn->add_option("--labels-out", syn_labels_out, "label file (gmm only)");
  syn->add_option("--k", syn_k, "ground-truth components/states/topics");
  syn->add_option("--d", syn_d, "dimension (gmm)");
  syn->add_option("--n", syn_n, "points (gmm) or sequences (hmm)");
  syn->add_option("--v", syn_v, "vocabulary size (hmm, lda)");
  syn->add_option("--docs", syn_docs, "documents (lda)");
  syn->add_option("--mean-length", syn_mean_length, "mean sequence length (hmm)");
  syn->add_option("--mean-tokens", syn_mean_tokens, "mean tokens per doc (lda)");
  syn->add_option("--separation", syn_sep, "mean separation scale (gmm)");
  syn->add_option("--concentration", syn_conc, "topic Dirichlet concentration (lda)");
  syn->add_option("--seed", syn_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed())
      return cmd_sweep(fit_model, fit_data, {fit_k}, {fit_regime}, 1, fit_seed,
                       fit_sched, fit_max_iter, fit_tol, fit_out, 1,
                       fit_no_timing);
    if (sweep->parsed())
      return cmd_sweep(sw_model, sw_data, sw_k, sw_regimes, sw_restarts, sw_seed,
                       sw_sched, sw_max_iter, sw_tol, sw_out, sw_jobs,
                       sw_no_timing);
    if (summ->parsed()) {
      const auto rows = avi::summarize(summ_in);
      if (summ_out.empty()) {
        avi::write_summary_csv(rows, std::cout);
      } else {
        std::ofstream out(summ_out, std::ios::binary);
        if (!out) throw avi::data_error("cannot write " + summ_out);
        avi::write_summary_csv(rows, out);
      }
      return 0;
    }
    if (cls->parsed()) {
      const double acc = avi::classify_eval(cls_models, cls_data, cls_labels);
      std::printf("accuracy\n%.6f\n", acc);
      return 0;
    }
    if (ver->parsed()) return cmd_verify(ver_suite);
    if (syn->parsed())
      return cmd_synth(syn_model, syn_out, syn_labels_out, syn_k, syn_d, syn_n,
                       syn_v, syn_docs, syn_mean_length, syn_mean_tokens,
                       syn_sep, syn_conc, syn_seed);
  } catch (const avi::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
