#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "urm/nn/params.hpp"
#include "urm/optim/adam_atan2.hpp"
#include "urm/optim/ema.hpp"
#include "urm/optim/muon.hpp"
#include "urm/optim/schedule.hpp"

namespace urm::optim {

enum class OptimizerKind { kAdamAtan2, kMuon };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamAtan2;
  double lr = 3e-4;
  double puzzle_lr = 1e-2;
  double muon_lr = 0.02;
  double weight_decay = 0.1;
  double puzzle_weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double atan2_a = 1.0;
  double atan2_b = 1.0;
  double muon_momentum = 0.95;
  std::size_t muon_ns_steps = 5;
  ScheduleKind schedule = ScheduleKind::kConstant;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;
  double min_lr_ratio = 0.0;
  double ema_decay = 0.999;
  bool use_ema = true;

  std::vector<std::string> validate() const;
  AdamAtan2Config adam() const { return {beta1, beta2, atan2_a, atan2_b}; }
  MuonConfig muon() const { return {muon_momentum, muon_ns_steps, kQuinticNewtonSchulz}; }
  LrSchedule lr_schedule() const { return {schedule, warmup_steps, total_steps, min_lr_ratio}; }
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
// Rejects unknown keys.
void from_json(const nlohmann::json& j, OptimizerConfig& c);

struct ParamGroup {
  std::string name;
  std::vector<std::string> params;
  double lr = 0.0;
  double weight_decay = 0.0;
  OptimizerKind kind = OptimizerKind::kAdamAtan2;
};

// Partition of the store into groups. With Muon, 2-D hidden matrices go to a
// Muon group; everything else uses AdamAtan2. The puzzle embedding always has
// its own group. Every parameter lands in exactly one group.
template <typename Real>
std::vector<ParamGroup> make_param_groups(const nn::ParamStore<Real>& store, const OptimizerConfig& cfg);

// Per-parameter buffers in store order. Adam parameters use m and v; Muon
// parameters use momentum. Unused buffers are empty.
template <typename Real>
struct OptimState {
  std::uint64_t step = 0;
  std::vector<NdArray<Real>> m;
  std::vector<NdArray<Real>> v;
  std::vector<NdArray<Real>> momentum;
  EmaShadow<Real> ema;
};

template <typename Real>
class Optimizer {
 public:
  Optimizer(nn::ParamStore<Real>& store, const OptimizerConfig& cfg);

  const OptimizerConfig& config() const { return cfg_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }
  OptimState<Real>& state() { return state_; }
  const OptimState<Real>& state() const { return state_; }
  std::uint64_t step_count() const { return state_.step; }

  // Learning-rate multiplier from the schedule for the next step.
  double lr_scale() const;

  // Applies one update from the parameters' current gradients (missing
  // gradients count as zero) and refreshes the EMA shadow. Throws
  // NumericError naming the parameter if any gradient is not finite; in that
  // case nothing is modified.
  void step();

 private:
  nn::ParamStore<Real>& store_;
  OptimizerConfig cfg_;
  std::vector<ParamGroup> groups_;
  std::vector<std::size_t> group_of_;  // per parameter index
  OptimState<Real> state_;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace urm::optim
