#include "urm/optim/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace urm::optim {

NLOHMANN_JSON_SERIALIZE_ENUM(OptimizerKind, {{OptimizerKind::kAdamAtan2, "adam_atan2"}, {OptimizerKind::kMuon, "muon"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ScheduleKind, {{ScheduleKind::kConstant, "constant"}, {ScheduleKind::kCosine, "cosine"}})

#define URM_OPTIM_FIELDS(X) \
  X(kind)                   \
  X(lr)                     \
  X(puzzle_lr)              \
  X(muon_lr)                \
  X(weight_decay)           \
  X(puzzle_weight_decay)    \
  X(beta1)                  \
  X(beta2)                  \
  X(atan2_a)                \
  X(atan2_b)                \
  X(muon_momentum)          \
  X(muon_ns_steps)          \
  X(schedule)               \
  X(warmup_steps)           \
  X(total_steps)            \
  X(min_lr_ratio)           \
  X(ema_decay)              \
  X(use_ema)

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kMuon ? "muon" : "adam_atan2"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "adam_atan2" || name == "adamatan2") return OptimizerKind::kAdamAtan2;
  if (name == "muon") return OptimizerKind::kMuon;
  throw std::invalid_argument("unknown optimizer: " + name);
}

std::vector<std::string> OptimizerConfig::validate() const {
  std::vector<std::string> p;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) p.push_back(std::string(name) + " must be > 0");
  };
  positive(lr, "lr");
  positive(puzzle_lr, "puzzle_lr");
  positive(muon_lr, "muon_lr");
  if (weight_decay < 0.0) p.push_back("weight_decay must be >= 0");
  if (puzzle_weight_decay < 0.0) p.push_back("puzzle_weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) p.push_back("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) p.push_back("beta2 must be in [0, 1)");
  positive(atan2_a, "atan2_a");
  positive(atan2_b, "atan2_b");
  if (!(muon_momentum >= 0.0 && muon_momentum < 1.0)) p.push_back("muon_momentum must be in [0, 1)");
  if (muon_ns_steps == 0) p.push_back("muon_ns_steps must be >= 1");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) p.push_back("ema_decay must be in [0, 1]");
  if (!(min_lr_ratio >= 0.0 && min_lr_ratio <= 1.0)) p.push_back("min_lr_ratio must be in [0, 1]");
  return p;
}

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = nlohmann::json::object();
#define URM_WRITE(name) j[#name] = c.name;
  URM_OPTIM_FIELDS(URM_WRITE)
#undef URM_WRITE
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("optimizer config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define URM_READ(name)                                                                                    \
  if (key == #name) {                                                                                     \
    known = true;                                                                                         \
    value.get_to(c.name);                                                                                 \
    if (nlohmann::json(c.name) != value)                                                                  \
      throw std::invalid_argument("invalid value for optimizer config key " #name ": " + value.dump());   \
  }
    URM_OPTIM_FIELDS(URM_READ)
#undef URM_READ
    if (!known) throw std::invalid_argument("unknown optimizer config key: " + key);
  }
}

template <typename Real>
std::vector<ParamGroup> make_param_groups(const nn::ParamStore<Real>& store, const OptimizerConfig& cfg) {
  ParamGroup main{"main", {}, cfg.lr, cfg.weight_decay, OptimizerKind::kAdamAtan2};
  ParamGroup muon{"muon", {}, cfg.muon_lr, cfg.weight_decay, OptimizerKind::kMuon};
  ParamGroup puzzle{"puzzle_embedding", {}, cfg.puzzle_lr, cfg.puzzle_weight_decay, OptimizerKind::kAdamAtan2};
  for (const auto& p : store.entries()) {
    if (p.role == nn::ParamRole::kPuzzleEmbedding)
      puzzle.params.push_back(p.name);
    else if (cfg.kind == OptimizerKind::kMuon && p.role == nn::ParamRole::kHiddenMatrix && p.tensor.value().ndim() == 2)
      muon.params.push_back(p.name);
    else
      main.params.push_back(p.name);
  }
  std::vector<ParamGroup> groups;
  for (auto* g : {&main, &muon, &puzzle})
    if (!g->params.empty()) groups.push_back(std::move(*g));
  return groups;
}

template <typename Real>
Optimizer<Real>::Optimizer(nn::ParamStore<Real>& store, const OptimizerConfig& cfg)
    : store_(store), cfg_(cfg), groups_(make_param_groups(store, cfg)) {
  if (auto problems = cfg.validate(); !problems.empty()) {
    std::string msg = "invalid optimizer config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw std::invalid_argument(msg);
  }
  const std::size_t n = store.size();
  group_of_.assign(n, groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g)
    for (const auto& name : groups_[g].params) {
      std::size_t i = 0;
      while (store.entries()[i].name != name) ++i;
      if (group_of_[i] != groups_.size()) throw std::logic_error("parameter in two groups: " + name);
      group_of_[i] = g;
    }
  state_.m.resize(n);
  state_.v.resize(n);
  state_.momentum.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& shape = store.entries()[i].tensor.shape();
    if (groups_[group_of_[i]].kind == OptimizerKind::kMuon) {
      state_.momentum[i] = NdArray<Real>(shape);
    } else {
      state_.m[i] = NdArray<Real>(shape);
      state_.v[i] = NdArray<Real>(shape);
    }
  }
  state_.ema = EmaShadow<Real>(store, cfg.ema_decay);
}

template <typename Real>
double Optimizer<Real>::lr_scale() const {
  return cfg_.lr_schedule().at(std::size_t(state_.step), 1.0);
}

template <typename Real>
void Optimizer<Real>::step() {
  auto& entries = store_.entries();
  for (const auto& p : entries)
    if (p.tensor.has_grad() && !p.tensor.grad().all_finite())
      throw core::NumericError("optimizer: non-finite gradient in " + p.name + " at step " +
                               std::to_string(state_.step + 1));
  const double scale = lr_scale();
  const std::size_t t = std::size_t(state_.step + 1);
  const auto adam = cfg_.adam();
  const auto muon = cfg_.muon();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& p = entries[i];
    const auto& group = groups_[group_of_[i]];
    const NdArray<Real> zeros = p.tensor.has_grad() ? NdArray<Real>() : NdArray<Real>(p.tensor.shape());
    const NdArray<Real>& grad = p.tensor.has_grad() ? p.tensor.grad() : zeros;
    if (group.kind == OptimizerKind::kMuon) {
      muon_step(p.tensor.mutable_value(), grad, state_.momentum[i], group.lr * scale, group.weight_decay, muon);
    } else {
      AdamMoments<Real> moments{std::move(state_.m[i]), std::move(state_.v[i])};
      adam_atan2_step(p.tensor.mutable_value(), grad, moments, t, group.lr * scale, group.weight_decay, adam);
      state_.m[i] = std::move(moments.m);
      state_.v[i] = std::move(moments.v);
    }
  }
  state_.step = t;
  state_.ema.update(store_);
}

template std::vector<ParamGroup> make_param_groups(const nn::ParamStore<float>&, const OptimizerConfig&);
template std::vector<ParamGroup> make_param_groups(const nn::ParamStore<double>&, const OptimizerConfig&);
template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace urm::optim
