#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "avi/gmm.hpp"
#include "avi/schedule.hpp"

namespace avi {

const char* regime_name(Regime r);
Regime regime_from_name(const std::string& name);  // "vi" | "det" | "stoch"
int regime_id(Regime r);

// Documented seed chain: fold master seed, run index and K through
// splitmix64. The regime is deliberately excluded so that restarts are
// paired across regimes: run r of plain VI and run r of an annealed
// regime start from the same initialization.
std::uint64_t run_seed(std::uint64_t master, int run, int K);

std::string schedule_decay_to_string(const Schedule& s);
void parse_schedule_decay(const std::string& spec, Schedule& s);  // "exp:0.9" | "linear:0.25:50"

struct ExperimentConfig {
  std::string model;  // "gmm" | "hmm" | "lda"
  std::string data_path;
  std::vector<int> k_grid;
  std::vector<Regime> regimes;
  int restarts = 1;
  std::uint64_t master_seed = 0;
  Schedule schedule;  // regime field is overridden per run
  int max_iter = 200;
  double tol = 1e-6;
  std::string out_dir;
  int jobs = 1;
  bool record_timing = true;
  bool write_traces = true;
  void validate() const;
};

// Runs restarts x |K grid| x |regimes| fits on a bounded worker pool and
// writes summary.csv plus one trace JSON per run. Output is deterministic
// in (config, master seed); wall times are the only nondeterministic field
// and are zeroed when record_timing is false. Returns 0, or 1 if any fit
// failed.
int run_experiment(const ExperimentConfig& config);

struct SummaryRow {
  int K = 0;
  std::string regime;
  int count = 0;
  int failed = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

// Groups summary.csv rows by (K, regime); quartiles by linear
// interpolation. Failed runs (NaN final ELBO) are excluded and counted.
std::vector<SummaryRow> summarize(const std::string& csv_path);
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);

// Naive Bayes evaluation over per-class GMM posteriors stored as
// class_<label>.json files in models_dir. Uniform class priors.
double classify_eval(const std::string& models_dir, const std::string& data_path,
                     const std::string& labels_path);

// posterior (de)serialization used by fit/classify
std::string gmm_posterior_to_json(const GmmPosterior& post);
GmmPosterior gmm_posterior_from_json_file(const std::string& path);

}  // namespace avi
