#pragma once

#include <vector>

#include <Eigen/Dense>

namespace avi {

enum class Family { Dirichlet, Normal, Wishart };

// Flat natural-parameter blocks for one variational factor. Vectors are
// stored as n x 1 matrices.
struct NaturalParams {
  Family family = Family::Dirichlet;
  std::vector<Eigen::MatrixXd> blocks;
};

// (1 - rho) * correct + rho * eta, blockwise. rho = 0 returns `correct`
// unchanged (bitwise), rho = 1 returns `eta`.
NaturalParams annealed_update(const NaturalParams& correct,
                              const NaturalParams& eta, double rho);

// correct / T, blockwise. T = 1 returns `correct` unchanged.
NaturalParams det_annealed_update(const NaturalParams& correct, double T);

}  // namespace avi
