#include "avi/natural_params.hpp"

#include <stdexcept>

#include "avi/errors.hpp"

namespace avi {

namespace {

void check_shapes(const NaturalParams& a, const NaturalParams& b) {
  if (a.family != b.family)
    throw std::invalid_argument("annealed_update: family mismatch");
  if (a.blocks.size() != b.blocks.size())
    throw std::invalid_argument("annealed_update: block count mismatch");
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    if (a.blocks[i].rows() != b.blocks[i].rows() ||
        a.blocks[i].cols() != b.blocks[i].cols())
      throw std::invalid_argument("annealed_update: block shape mismatch");
  }
}

void check_dirichlet_positive(const NaturalParams& p, const char* who) {
  if (p.family != Family::Dirichlet) return;
  for (const auto& b : p.blocks)
    if ((b.array() <= 0.0).any())
      throw invariant_error(std::string(who) + ": non-positive Dirichlet block");
}

}  // namespace

NaturalParams annealed_update(const NaturalParams& correct,
                              const NaturalParams& eta, double rho) {
  check_shapes(correct, eta);
  if (!(rho >= 0.0 && rho <= 1.0))
    throw std::invalid_argument("annealed_update: rho must be in [0,1]");
  if (rho == 0.0) return correct;
  if (rho == 1.0) return eta;
  NaturalParams out{correct.family, {}};
  out.blocks.reserve(correct.blocks.size());
  for (std::size_t i = 0; i < correct.blocks.size(); ++i)
    out.blocks.push_back((1.0 - rho) * correct.blocks[i] + rho * eta.blocks[i]);
  check_dirichlet_positive(out, "annealed_update");
  return out;
}

NaturalParams det_annealed_update(const NaturalParams& correct, double T) {
  if (!(T >= 1.0))
    throw std::invalid_argument("det_annealed_update: T must be >= 1");
  if (T == 1.0) return correct;
  NaturalParams out{correct.family, {}};
  out.blocks.reserve(correct.blocks.size());
  for (const auto& b : correct.blocks) out.blocks.push_back(b / T);
  check_dirichlet_positive(out, "det_annealed_update");
  return out;
}

}  // namespace avi
