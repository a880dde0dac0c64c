#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace avi {

// ---- datasets ----

struct PointSet {
  Eigen::MatrixXd X;        // N x d
  std::vector<int> labels;  // empty or size N
};

struct SequenceSet {
  std::vector<std::vector<int>> seqs;  // codes in [0, V)
  int V = 0;
  double mean_length() const;
};

struct BowDoc {
  std::vector<std::pair<int, int>> tokens;  // (word id, count >= 1)
  int total() const;
};

struct BowCorpus {
  std::vector<BowDoc> docs;
  int V = 0;
  double mean_tokens() const;  // total tokens / D
  long total_tokens() const;
};

// ---- text formats (UTF-8, LF) ----
//
// BOW:       header "D V", then one document per line of "wordId:count" pairs.
// Sequences: header "N V", then one space-separated code line per sequence.
// Points:    headerless CSV, one point per row.

BowCorpus load_bow(const std::string& path);
void save_bow(const BowCorpus& corpus, const std::string& path);

SequenceSet load_sequences(const std::string& path);
void save_sequences(const SequenceSet& seqs, const std::string& path);

PointSet load_points(const std::string& path);
void save_points(const PointSet& points, const std::string& path);

// one integer label per line
std::vector<int> load_labels(const std::string& path);
void save_labels(const std::vector<int>& labels, const std::string& path);

// ---- k-means quantization ----

struct QuantizeResult {
  Eigen::MatrixXd codebook;  // V x d
  std::vector<int> codes;    // per point
  double wcss = 0.0;
};

// Lloyd's algorithm, deterministic given seed. Empty clusters are
// re-seeded to the point farthest from its current centroid.
QuantizeResult kmeans_quantize(const Eigen::MatrixXd& points, int V, int iters,
                               std::uint64_t seed);

// ---- synthetic ground-truth generators ----

struct GmmTruth {
  Eigen::VectorXd weights;            // K
  Eigen::MatrixXd means;              // K x d
  std::vector<Eigen::MatrixXd> covs;  // K of d x d
};

struct SynthGmm {
  PointSet points;  // labels hold the generating component
  GmmTruth truth;
};

struct HmmTruth {
  Eigen::VectorXd pi;  // K
  Eigen::MatrixXd A;   // K x K, rows stochastic
  Eigen::MatrixXd B;   // K x V, rows stochastic
};

struct SynthHmm {
  SequenceSet seqs;
  HmmTruth truth;
};

struct LdaTruth {
  Eigen::MatrixXd topics;  // K x V, rows stochastic
};

struct SynthLda {
  BowCorpus corpus;
  LdaTruth truth;
};

SynthGmm synth_gmm(int K, int d, int N, double separation, std::uint64_t seed);
SynthHmm synth_hmm(int K, int V, int N, double mean_length, std::uint64_t seed);
SynthLda synth_lda(int K, int V, int D, double mean_tokens, double concentration,
                   std::uint64_t seed);

}  // namespace avi
