#pragma once

#include <variant>

namespace avi {

enum class Regime { None, Deterministic, Stochastic };

// rho_t = base^t
struct ExponentialDecay {
  double base = 0.9;
};

// rho_t = c * max(0, 1 - t/horizon)
struct LinearDecay {
  double c = 0.25;
  int horizon = 50;
};

// Annealing schedule. Iterations are indexed from t = 1. Past `cutoff`
// the schedule is inert: rho = 0 and T = 1, so updates are exact VI.
// cutoff = 0 disables annealing entirely (used for reduction checks).
struct Schedule {
  Regime regime = Regime::None;
  std::variant<ExponentialDecay, LinearDecay> decay = ExponentialDecay{};
  double temperature_scale = 5.0;
  int cutoff = 100;

  void validate() const;
  double rho(int t) const;
  double temperature(int t) const;
};

double schedule_rho(const Schedule& s, int t);
double schedule_temperature(const Schedule& s, int t);

}  // namespace avi
