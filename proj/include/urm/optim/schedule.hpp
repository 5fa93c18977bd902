#pragma once

#include <cstddef>
#include <string>

namespace urm::optim {

enum class ScheduleKind { kConstant, kCosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;  // cosine horizon
  double min_ratio = 0.0;       // cosine floor as a fraction of base

  // Linear warmup from 0 at step 0 to base at step == warmup, then constant
  // or cosine decay towards min_ratio * base at total_steps.
  double at(std::size_t step, double base) const;
};

}  // namespace urm::optim
