#pragma once

#include <string>
#include <vector>

#include "avi/oracle.hpp"

namespace avi {

// Named verification suites backing the `verify` CLI subcommand and the
// acceptance tests. Suites: fb-enum, mc-elbo, monotone, reductions,
// recovery. Unknown names throw config_error.
std::vector<oracle::OracleReport> verify_suite(const std::string& name);

std::vector<oracle::OracleReport> verify_fb_enum();
std::vector<oracle::OracleReport> verify_mc_elbo();
std::vector<oracle::OracleReport> verify_monotone();
std::vector<oracle::OracleReport> verify_reductions();
std::vector<oracle::OracleReport> verify_recovery();

// total-variation distance after the best label permutation (brute force
// over permutations; K <= 8)
double best_permutation_tv(const Eigen::MatrixXd& fitted_rows,
                           const Eigen::MatrixXd& truth_rows);

}  // namespace avi
