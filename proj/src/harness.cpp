#include "avi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "avi/data_io.hpp"
#include "avi/errors.hpp"
#include "avi/hmm.hpp"
#include "avi/lda.hpp"
#include "avi/rng.hpp"

namespace avi {

using nlohmann::json;
namespace fs = std::filesystem;

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::None: return "vi";
    case Regime::Deterministic: return "det";
    case Regime::Stochastic: return "stoch";
  }
  throw std::logic_error("unreachable");
}

Regime regime_from_name(const std::string& name) {
  if (name == "vi") return Regime::None;
  if (name == "det") return Regime::Deterministic;
  if (name == "stoch") return Regime::Stochastic;
  throw config_error("unknown regime '" + name + "' (expected vi|det|stoch)");
}

int regime_id(Regime r) { return static_cast<int>(r); }

std::uint64_t run_seed(std::uint64_t master, int run, int K) {
  std::uint64_t h = splitmix64(master);
  h = mix_seed(h, static_cast<std::uint64_t>(run));
  h = mix_seed(h, static_cast<std::uint64_t>(K));
  return h;
}

std::string schedule_decay_to_string(const Schedule& s) {
  // shortest round-trip decimal form
  auto fmt = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  if (const auto* e = std::get_if<ExponentialDecay>(&s.decay))
    return "exp:" + fmt(e->base);
  const auto& l = std::get<LinearDecay>(s.decay);
  return "linear:" + fmt(l.c) + ":" + std::to_string(l.horizon);
}

void parse_schedule_decay(const std::string& spec, Schedule& s) {
  std::vector<std::string> parts;
  std::istringstream iss(spec);
  std::string tok;
  while (std::getline(iss, tok, ':')) parts.push_back(tok);
  try {
    if (parts.size() == 2 && parts[0] == "exp") {
      s.decay = ExponentialDecay{std::stod(parts[1])};
      return;
    }
    if (parts.size() == 3 && parts[0] == "linear") {
      s.decay = LinearDecay{std::stod(parts[1]), std::stoi(parts[2])};
      return;
    }
  } catch (const std::exception&) {
  }
  throw config_error("bad schedule spec '" + spec +
                     "' (expected exp:<base> or linear:<c>:<horizon>)");
}

void ExperimentConfig::validate() const {
  if (model != "gmm" && model != "hmm" && model != "lda")
    throw config_error("model must be gmm|hmm|lda");
  if (k_grid.empty()) throw config_error("K grid must be non-empty");
  if (regimes.empty()) throw config_error("regimes must be non-empty");
  if (restarts < 1) throw config_error("restarts must be >= 1");
  if (max_iter < 1) throw config_error("max_iter must be >= 1");
  if (jobs < 1) throw config_error("jobs must be >= 1");
  if (out_dir.empty()) throw config_error("output directory required");
  schedule.validate();
}

namespace {

struct RunOutcome {
  int iters = 0;
  double final_elbo = std::numeric_limits<double>::quiet_NaN();
  long wall_ms = 0;
  std::vector<double> trace;
  json posterior;
  std::string error;  // non-empty on failure
};

json gmm_posterior_json(const GmmPosterior& post) {
  json j;
  j["model"] = "gmm";
  j["alpha"] = std::vector<double>(post.alpha.data(), post.alpha.data() + post.alpha.size());
  json comps = json::array();
  for (const auto& c : post.comps) {
    json jc;
    jc["m"] = std::vector<double>(c.m.data(), c.m.data() + c.m.size());
    auto mat = [](const Eigen::MatrixXd& M) {
      json rows = json::array();
      for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index jj = 0; jj < M.cols(); ++jj) row.push_back(M(i, jj));
        rows.push_back(row);
      }
      return rows;
    };
    jc["S"] = mat(c.S);
    jc["W"] = mat(c.W);
    jc["nu"] = c.nu;
    comps.push_back(jc);
  }
  j["components"] = comps;
  return j;
}

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

struct LoadedData {
  PointSet points;
  SequenceSet seqs;
  BowCorpus corpus;
};

RunOutcome run_one(const ExperimentConfig& cfg, const LoadedData& data, int K,
                   Regime regime, std::uint64_t seed) {
  RunOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Schedule sched = cfg.schedule;
    sched.regime = regime;
    if (cfg.model == "gmm") {
      GmmFitConfig fc{K, sched, cfg.max_iter, cfg.tol, seed};
      auto res = gmm_fit(data.points.X, fc);
      out.iters = res.iterations;
      out.trace = std::move(res.elbo_trace);
      out.posterior = gmm_posterior_json(res.posterior);
    } else if (cfg.model == "hmm") {
      HmmFitConfig fc{K, sched, cfg.max_iter, cfg.tol, seed};
      auto res = hmm_fit(data.seqs, fc);
      out.iters = res.iterations;
      out.trace = std::move(res.elbo_trace);
      out.posterior = {{"model", "hmm"},
                       {"pi", std::vector<double>(res.posterior.pi.data(),
                                                  res.posterior.pi.data() +
                                                      res.posterior.pi.size())},
                       {"A", matrix_json(res.posterior.A)},
                       {"B", matrix_json(res.posterior.B)}};
    } else {
      LdaFitConfig fc{K, sched, cfg.max_iter, cfg.tol, seed};
      auto res = lda_fit(data.corpus, fc);
      out.iters = res.iterations;
      out.trace = std::move(res.elbo_trace);
      out.posterior = {{"model", "lda"},
                       {"beta", matrix_json(res.posterior.beta)},
                       {"theta", matrix_json(res.posterior.theta)}};
    }
    if (!out.trace.empty()) out.final_elbo = out.trace.back();
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  const auto t1 = std::chrono::steady_clock::now();
  out.wall_ms = cfg.record_timing
                    ? std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
                    : 0;
  return out;
}

void write_csv_double(std::ostream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
    return;
  }
  std::ostringstream tmp;
  tmp.precision(17);
  tmp << v;
  os << tmp.str();
}

}  // namespace

int run_experiment(const ExperimentConfig& config) {
  config.validate();

  LoadedData data;
  if (config.model == "gmm")
    data.points = load_points(config.data_path);
  else if (config.model == "hmm")
    data.seqs = load_sequences(config.data_path);
  else
    data.corpus = load_bow(config.data_path);

  fs::create_directories(config.out_dir);

  struct Job {
    Regime regime;
    int K;
    int run;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Regime regime : config.regimes)
    for (int K : config.k_grid)
      for (int run = 0; run < config.restarts; ++run)
        jobs.push_back({regime, K, run, run_seed(config.master_seed, run, K)});

  std::vector<RunOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      outcomes[i] = run_one(config, data, jobs[i].K, jobs[i].regime, jobs[i].seed);
    }
  };
  const int n_threads = std::min<int>(config.jobs, static_cast<int>(jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // results written in job order, independent of completion order
  std::ofstream csv(fs::path(config.out_dir) / "summary.csv", std::ios::binary);
  if (!csv) throw data_error("cannot write summary.csv in " + config.out_dir);
  csv << "run,K,regime,seed,iters,final_elbo,wall_ms\n";
  bool any_failed = false;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    const auto& out = outcomes[i];
    if (!out.error.empty()) any_failed = true;
    csv << job.run << "," << job.K << "," << regime_name(job.regime) << ","
        << job.seed << "," << out.iters << ",";
    write_csv_double(csv, out.final_elbo);
    csv << "," << out.wall_ms << "\n";

    if (config.write_traces) {
      json j;
      j["model"] = config.model;
      j["regime"] = regime_name(job.regime);
      j["K"] = job.K;
      j["run"] = job.run;
      j["seed"] = job.seed;
      j["config"] = {{"max_iter", config.max_iter},
                     {"tol", config.tol},
                     {"cutoff", config.schedule.cutoff},
                     {"temperature_scale", config.schedule.temperature_scale},
                     {"decay", schedule_decay_to_string(config.schedule)},
                     {"master_seed", config.master_seed}};
      j["iterations"] = out.iters;
      j["elbo_trace"] = out.trace;
      if (out.error.empty()) {
        j["final_elbo"] = out.final_elbo;
        j["posterior"] = out.posterior;
      } else {
        j["error"] = out.error;
      }
      std::ostringstream name;
      name << "trace_" << regime_name(job.regime) << "_K" << job.K << "_run"
           << job.run << ".json";
      std::ofstream tf(fs::path(config.out_dir) / name.str(), std::ios::binary);
      tf << j.dump(2) << "\n";
    }
  }
  return any_failed ? 1 : 0;
}

std::vector<SummaryRow> summarize(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw data_error("cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw parse_error("empty CSV", 1);
  if (line != "run,K,regime,seed,iters,final_elbo,wall_ms")
    throw parse_error("unexpected CSV header", 1);

  struct Group {
    std::vector<double> values;
    int failed = 0;
  };
  std::map<std::pair<int, std::string>, Group> groups;
  std::vector<std::pair<int, std::string>> order;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream iss(line);
    std::string cell;
    while (std::getline(iss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw parse_error("expected 7 columns", lineno);
    int K;
    double elbo;
    try {
      K = std::stoi(cells[1]);
      elbo = (cells[5] == "nan") ? std::numeric_limits<double>::quiet_NaN()
                                 : std::stod(cells[5]);
    } catch (const std::exception&) {
      throw parse_error("bad numeric cell", lineno);
    }
    const auto key = std::make_pair(K, cells[2]);
    if (groups.find(key) == groups.end()) order.push_back(key);
    auto& g = groups[key];
    if (std::isnan(elbo))
      ++g.failed;
    else
      g.values.push_back(elbo);
  }

  auto quantile = [](std::vector<double>& v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - lo;
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };

  std::vector<SummaryRow> rows;
  for (const auto& key : order) {
    auto& g = groups[key];
    SummaryRow r;
    r.K = key.first;
    r.regime = key.second;
    r.count = static_cast<int>(g.values.size());
    r.failed = g.failed;
    r.median = quantile(g.values, 0.5);
    r.q1 = quantile(g.values, 0.25);
    r.q3 = quantile(g.values, 0.75);
    rows.push_back(r);
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "K,regime,count,failed,median,q1,q3\n";
  for (const auto& r : rows) {
    out << r.K << "," << r.regime << "," << r.count << "," << r.failed << ",";
    write_csv_double(out, r.median);
    out << ",";
    write_csv_double(out, r.q1);
    out << ",";
    write_csv_double(out, r.q3);
    out << "\n";
  }
}

std::string gmm_posterior_to_json(const GmmPosterior& post) {
  return gmm_posterior_json(post).dump(2);
}

GmmPosterior gmm_posterior_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  json j;
  in >> j;
  if (j.contains("posterior")) j = j["posterior"];  // accept whole trace files
  if (!j.contains("alpha") || !j.contains("components"))
    throw data_error("not a GMM posterior JSON: " + path);
  GmmPosterior post;
  const auto alpha = j["alpha"].get<std::vector<double>>();
  post.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(),
                                                 static_cast<Eigen::Index>(alpha.size()));
  for (const auto& jc : j["components"]) {
    GmmComponent c;
    const auto m = jc["m"].get<std::vector<double>>();
    c.m = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    auto mat = [](const json& rows) {
      Eigen::MatrixXd M(rows.size(), rows.empty() ? 0 : rows[0].size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t jj = 0; jj < rows[i].size(); ++jj)
          M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj)) =
              rows[i][jj].get<double>();
      return M;
    };
    c.S = mat(jc["S"]);
    c.W = mat(jc["W"]);
    c.nu = jc["nu"].get<double>();
    post.comps.push_back(std::move(c));
  }
  return post;
}

double classify_eval(const std::string& models_dir, const std::string& data_path,
                     const std::string& labels_path) {
  std::vector<std::pair<int, GmmPosterior>> models;
  for (const auto& entry : fs::directory_iterator(models_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("class_", 0) == 0 && entry.path().extension() == ".json") {
      const int label = std::stoi(name.substr(6));
      models.emplace_back(label, gmm_posterior_from_json_file(entry.path().string()));
    }
  }
  if (models.empty())
    throw config_error("no class_<label>.json models in " + models_dir);
  std::sort(models.begin(), models.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const PointSet test = load_points(data_path);
  const std::vector<int> labels = load_labels(labels_path);
  if (labels.size() != static_cast<std::size_t>(test.X.rows()))
    throw data_error("label count does not match test point count");

  std::vector<GmmPosterior> posts;
  posts.reserve(models.size());
  for (auto& [label, post] : models) posts.push_back(std::move(post));
  const Eigen::VectorXd priors =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(posts.size()),
                                1.0 / posts.size());
  const std::vector<int> pred = gmm_classify(test.X, posts, priors);

  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (models[static_cast<std::size_t>(pred[i])].first == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace avi
