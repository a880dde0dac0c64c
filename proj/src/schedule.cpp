#include "avi/schedule.hpp"

#include <cmath>
#include <stdexcept>

#include "avi/errors.hpp"

namespace avi {

void Schedule::validate() const {
  if (cutoff < 0) throw config_error("schedule: cutoff must be >= 0");
  if (temperature_scale < 1.0)
    throw config_error("schedule: temperature_scale must be >= 1");
  if (const auto* e = std::get_if<ExponentialDecay>(&decay)) {
    if (!(e->base > 0.0 && e->base < 1.0))
      throw config_error("schedule: exponential base must be in (0,1)");
  } else {
    const auto& l = std::get<LinearDecay>(decay);
    if (!(l.c > 0.0)) throw config_error("schedule: linear c must be > 0");
    if (l.horizon < 1) throw config_error("schedule: linear horizon must be >= 1");
    if (l.c * (1.0 - 1.0 / l.horizon) >= 1.0)
      throw config_error("schedule: linear decay yields rho >= 1 at t = 1");
  }
}

double Schedule::rho(int t) const {
  if (t < 1) throw std::invalid_argument("schedule_rho: t must be >= 1");
  if (t > cutoff) return 0.0;
  if (const auto* e = std::get_if<ExponentialDecay>(&decay))
    return std::pow(e->base, t);
  const auto& l = std::get<LinearDecay>(decay);
  return l.c * std::max(0.0, 1.0 - static_cast<double>(t) / l.horizon);
}

double Schedule::temperature(int t) const {
  if (t < 1) throw std::invalid_argument("schedule_temperature: t must be >= 1");
  if (t > cutoff) return 1.0;
  const double r = rho(t);
  if (r >= 1.0) throw config_error("schedule_temperature: rho = 1 gives T = inf");
  return temperature_scale / (1.0 - r);
}

double schedule_rho(const Schedule& s, int t) { return s.rho(t); }
double schedule_temperature(const Schedule& s, int t) { return s.temperature(t); }

}  // namespace avi
