#include "avi/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "avi/errors.hpp"
#include "avi/rng.hpp"

namespace avi {

double SequenceSet::mean_length() const {
  if (seqs.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& s : seqs) total += s.size();
  return static_cast<double>(total) / seqs.size();
}

int BowDoc::total() const {
  int t = 0;
  for (const auto& [w, c] : tokens) t += c;
  return t;
}

long BowCorpus::total_tokens() const {
  long t = 0;
  for (const auto& d : docs) t += d.total();
  return t;
}

double BowCorpus::mean_tokens() const {
  if (docs.empty()) return 0.0;
  return static_cast<double>(total_tokens()) / docs.size();
}

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open file: " + path);
  return in;
}

// strict int parse of a whole token
int parse_int(const std::string& tok, int line) {
  std::size_t pos = 0;
  int v;
  try {
    v = std::stoi(tok, &pos);
  } catch (const std::exception&) {
    throw parse_error("expected integer, got '" + tok + "'", line);
  }
  if (pos != tok.size())
    throw parse_error("trailing characters in integer '" + tok + "'", line);
  return v;
}

double parse_double(const std::string& tok, int line) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw parse_error("expected number, got '" + tok + "'", line);
  }
  if (pos != tok.size())
    throw parse_error("trailing characters in number '" + tok + "'", line);
  if (!std::isfinite(v)) throw parse_error("non-finite value '" + tok + "'", line);
  return v;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

int sample_categorical(Rng& rng, const Eigen::VectorXd& p) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng) * p.sum();
  for (Eigen::Index k = 0; k < p.size() - 1; ++k) {
    u -= p[k];
    if (u < 0.0) return static_cast<int>(k);
  }
  return static_cast<int>(p.size() - 1);
}

}  // namespace

BowCorpus load_bow(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw parse_error("missing 'D V' header", 1);
  ++lineno;
  auto header = split_ws(line);
  if (header.size() != 2) throw parse_error("header must be 'D V'", lineno);
  const int D = parse_int(header[0], lineno);
  const int V = parse_int(header[1], lineno);
  if (D < 0 || V < 1) throw parse_error("invalid header sizes", lineno);

  BowCorpus corpus;
  corpus.V = V;
  corpus.docs.reserve(D);
  for (int d = 0; d < D; ++d) {
    if (!std::getline(in, line))
      throw parse_error("expected " + std::to_string(D) + " documents", lineno + 1);
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) throw parse_error("empty document", lineno);
    BowDoc doc;
    for (const auto& tok : toks) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos)
        throw parse_error("expected 'wordId:count', got '" + tok + "'", lineno);
      const int w = parse_int(tok.substr(0, colon), lineno);
      const int c = parse_int(tok.substr(colon + 1), lineno);
      if (w < 0 || w >= V)
        throw data_error("word id " + std::to_string(w) + " out of range [0," +
                         std::to_string(V) + ") at line " + std::to_string(lineno));
      if (c < 1) throw parse_error("count must be >= 1", lineno);
      doc.tokens.emplace_back(w, c);
    }
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

void save_bow(const BowCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path);
  out << corpus.docs.size() << " " << corpus.V << "\n";
  for (const auto& doc : corpus.docs) {
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      if (i) out << " ";
      out << doc.tokens[i].first << ":" << doc.tokens[i].second;
    }
    out << "\n";
  }
}

SequenceSet load_sequences(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw parse_error("missing 'N V' header", 1);
  ++lineno;
  auto header = split_ws(line);
  if (header.size() != 2) throw parse_error("header must be 'N V'", lineno);
  const int N = parse_int(header[0], lineno);
  const int V = parse_int(header[1], lineno);
  if (N < 0 || V < 1) throw parse_error("invalid header sizes", lineno);

  SequenceSet out;
  out.V = V;
  out.seqs.reserve(N);
  for (int n = 0; n < N; ++n) {
    if (!std::getline(in, line))
      throw parse_error("expected " + std::to_string(N) + " sequences", lineno + 1);
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) throw parse_error("empty sequence", lineno);
    std::vector<int> seq;
    seq.reserve(toks.size());
    for (const auto& tok : toks) {
      const int code = parse_int(tok, lineno);
      if (code < 0 || code >= V)
        throw data_error("code " + std::to_string(code) + " out of range [0," +
                         std::to_string(V) + ") at line " + std::to_string(lineno));
      seq.push_back(code);
    }
    out.seqs.push_back(std::move(seq));
  }
  return out;
}

void save_sequences(const SequenceSet& seqs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path);
  out << seqs.seqs.size() << " " << seqs.V << "\n";
  for (const auto& s : seqs.seqs) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << " ";
      out << s[i];
    }
    out << "\n";
  }
}

PointSet load_points(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  int lineno = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream iss(line);
    std::string cell;
    while (std::getline(iss, cell, ',')) row.push_back(parse_double(cell, lineno));
    if (row.empty()) throw parse_error("empty row", lineno);
    if (!rows.empty() && row.size() != rows.front().size())
      throw parse_error("inconsistent dimension", lineno);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw data_error("no points in file: " + path);
  PointSet ps;
  ps.X.resize(static_cast<Eigen::Index>(rows.size()),
              static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      ps.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return ps;
}

void save_points(const PointSet& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < points.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.X.cols(); ++j) {
      if (j) out << ",";
      out << points.X(i, j);
    }
    out << "\n";
  }
}

std::vector<int> load_labels(const std::string& path) {
  auto in = open_or_throw(path);
  std::vector<int> labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    labels.push_back(parse_int(line, lineno));
  }
  return labels;
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path);
  for (int l : labels) out << l << "\n";
}

QuantizeResult kmeans_quantize(const Eigen::MatrixXd& points, int V, int iters,
                               std::uint64_t seed) {
  const Eigen::Index N = points.rows();
  if (V < 1) throw config_error("kmeans_quantize: V must be >= 1");
  if (N < V) throw config_error("kmeans_quantize: need at least V points");

  Rng rng(seed);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (std::size_t i = idx.size() - 1; i > 0; --i)
    std::swap(idx[i], idx[rng() % (i + 1)]);

  QuantizeResult res;
  res.codebook.resize(V, points.cols());
  for (int k = 0; k < V; ++k) res.codebook.row(k) = points.row(idx[static_cast<std::size_t>(k)]);
  res.codes.assign(static_cast<std::size_t>(N), 0);

  auto assign = [&]() {
    double wcss = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
      double best = std::numeric_limits<double>::infinity();
      int best_k = 0;
      for (int k = 0; k < V; ++k) {
        const double d2 = (points.row(n) - res.codebook.row(k)).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_k = k;
        }
      }
      res.codes[static_cast<std::size_t>(n)] = best_k;
      wcss += best;
    }
    return wcss;
  };

  res.wcss = assign();
  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(V, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(V), 0);
    for (Eigen::Index n = 0; n < N; ++n) {
      sums.row(res.codes[static_cast<std::size_t>(n)]) += points.row(n);
      ++counts[static_cast<std::size_t>(res.codes[static_cast<std::size_t>(n)])];
    }
    for (int k = 0; k < V; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        res.codebook.row(k) = sums.row(k) / counts[static_cast<std::size_t>(k)];
      } else {
        // re-seed to the point farthest from its current centroid
        double worst = -1.0;
        Eigen::Index worst_n = 0;
        for (Eigen::Index n = 0; n < N; ++n) {
          const double d2 =
              (points.row(n) - res.codebook.row(res.codes[static_cast<std::size_t>(n)]))
                  .squaredNorm();
          if (d2 > worst) {
            worst = d2;
            worst_n = n;
          }
        }
        res.codebook.row(k) = points.row(worst_n);
      }
    }
    const double wcss = assign();
    if (wcss == res.wcss) {
      res.wcss = wcss;
      break;
    }
    res.wcss = wcss;
  }
  return res;
}

SynthGmm synth_gmm(int K, int d, int N, double separation, std::uint64_t seed) {
  if (K < 1 || d < 1 || N < 1) throw config_error("synth_gmm: invalid sizes");
  if (separation < 0.0) throw config_error("synth_gmm: separation must be >= 0");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthGmm out;
  out.truth.weights = dirichlet_draw(rng, K, 5.0);
  out.truth.means.resize(K, d);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < d; ++j) out.truth.means(k, j) = separation * normal(rng);
  out.truth.covs.assign(static_cast<std::size_t>(K), Eigen::MatrixXd::Identity(d, d));

  out.points.X.resize(N, d);
  out.points.labels.resize(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    const int k = sample_categorical(rng, out.truth.weights);
    out.points.labels[static_cast<std::size_t>(n)] = k;
    for (int j = 0; j < d; ++j)
      out.points.X(n, j) = out.truth.means(k, j) + normal(rng);
  }
  return out;
}

SynthHmm synth_hmm(int K, int V, int N, double mean_length, std::uint64_t seed) {
  if (K < 1 || V < 1 || N < 1) throw config_error("synth_hmm: invalid sizes");
  if (!(mean_length >= 1.0)) throw config_error("synth_hmm: mean_length must be >= 1");
  Rng rng(seed);

  SynthHmm out;
  out.truth.pi = dirichlet_draw(rng, K, 5.0);
  out.truth.A.resize(K, K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd row = 0.45 * dirichlet_draw(rng, K, 1.0);
    row[k] += 0.55;  // sticky transitions
    out.truth.A.row(k) = row.transpose();
  }
  // each state emits mostly from its own symbol block
  out.truth.B.setConstant(K, V, 0.1 / V);
  const int block = std::max(1, V / K);
  for (int k = 0; k < K; ++k) {
    const int lo = std::min(k * block, V - 1);
    const int hi = (k == K - 1) ? V : std::min((k + 1) * block, V);
    Eigen::VectorXd w = dirichlet_draw(rng, hi - lo, 5.0);
    for (int v = lo; v < hi; ++v) out.truth.B(k, v) += 0.9 * w[v - lo];
  }

  std::poisson_distribution<int> length(mean_length);
  out.seqs.V = V;
  out.seqs.seqs.reserve(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    const int len = std::max(1, length(rng));
    std::vector<int> seq;
    seq.reserve(static_cast<std::size_t>(len));
    int state = sample_categorical(rng, out.truth.pi);
    for (int t = 0; t < len; ++t) {
      if (t > 0) state = sample_categorical(rng, out.truth.A.row(state).transpose());
      seq.push_back(sample_categorical(rng, out.truth.B.row(state).transpose()));
    }
    out.seqs.seqs.push_back(std::move(seq));
  }
  return out;
}

SynthLda synth_lda(int K, int V, int D, double mean_tokens, double concentration,
                   std::uint64_t seed) {
  if (K < 1 || V < 1 || D < 1) throw config_error("synth_lda: invalid sizes");
  if (!(mean_tokens >= 1.0)) throw config_error("synth_lda: mean_tokens must be >= 1");
  if (!(concentration > 0.0)) throw config_error("synth_lda: concentration must be > 0");
  Rng rng(seed);

  SynthLda out;
  out.truth.topics.resize(K, V);
  for (int k = 0; k < K; ++k)
    out.truth.topics.row(k) = dirichlet_draw(rng, V, concentration).transpose();

  std::poisson_distribution<int> length(mean_tokens);
  out.corpus.V = V;
  out.corpus.docs.reserve(static_cast<std::size_t>(D));
  for (int d = 0; d < D; ++d) {
    const Eigen::VectorXd theta = dirichlet_draw(rng, K, 0.3);
    const int n_tokens = std::max(1, length(rng));
    std::map<int, int> counts;
    for (int t = 0; t < n_tokens; ++t) {
      const int k = sample_categorical(rng, theta);
      const int w = sample_categorical(rng, out.truth.topics.row(k).transpose());
      ++counts[w];
    }
    BowDoc doc;
    doc.tokens.assign(counts.begin(), counts.end());
    out.corpus.docs.push_back(std::move(doc));
  }
  return out;
}

}  // namespace avi
