#include "urm/optim/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace urm::optim {

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::kCosine ? "cosine" : "constant"; }

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "constant") return ScheduleKind::kConstant;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw std::invalid_argument("unknown lr schedule: " + name);
}

double LrSchedule::at(std::size_t step, double base) const {
  if (warmup_steps > 0 && step < warmup_steps) return base * double(step) / double(warmup_steps);
  if (kind == ScheduleKind::kConstant || total_steps <= warmup_steps) return base;
  const double progress =
      std::min(1.0, double(step - warmup_steps) / double(total_steps - warmup_steps));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return base * (min_ratio + (1.0 - min_ratio) * cosine);
}

}  // namespace urm::optim
