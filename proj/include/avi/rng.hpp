#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace avi {

using Rng = std::mt19937_64;

// splitmix64 step; used to derive per-run seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed chain: fold each component into the running hash.
inline std::uint64_t mix_seed(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ v);
}

// Draw from a symmetric Dirichlet(alpha,...,alpha) of dimension n.
inline Eigen::VectorXd dirichlet_draw(Rng& rng, int n, double alpha = 1.0) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  Eigen::VectorXd v(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = gamma(rng);
    sum += v[i];
  }
  if (sum <= 0.0) {
    v.setConstant(1.0 / n);
    return v;
  }
  return v / sum;
}

}  // namespace avi
