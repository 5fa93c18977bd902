#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "urm/core/rng.hpp"
#include "urm/harness/checkpoint.hpp"
#include "urm/harness/metrics.hpp"
#include "urm/harness/run_config.hpp"
#include "urm/model/urm.hpp"
#include "urm/optim/optimizer.hpp"
#include "urm/tasks/dataset.hpp"

namespace urm::harness {

struct StepStats {
  std::size_t step = 0;  // optimizer steps completed after this one
  double loss = 0.0;
  std::vector<double> loop_losses;
  double cell_accuracy = 0.0;
  double lr = 0.0;
  double mean_act_steps = 0.0;
};

struct TrainSummary {
  std::size_t steps = 0;
  std::size_t parameters = 0;
  double final_loss = 0.0;
  std::vector<double> losses;  // one per step run in this call
  tasks::PassMetrics final_eval;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

// Loads cfg.dataset_dir when set, otherwise generates cfg.data.
tasks::Dataset load_or_generate(const RunConfig& cfg);

// Deterministic training loop. Batch b of step s holds the training
// instances at positions s*B .. s*B+B-1 of a per-epoch permutation seeded by
// (seed, epoch), so the data order depends only on the step counter.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);
  Trainer(const RunConfig& cfg, tasks::Dataset data);

  // Rebuilds a trainer from a checkpoint. The dataset comes from the stored
  // config unless one is given.
  static std::unique_ptr<Trainer> resume(const std::filesystem::path& checkpoint,
                                         std::optional<tasks::Dataset> data = std::nullopt);

  const RunConfig& config() const { return cfg_; }
  const tasks::Dataset& data() const { return data_; }
  model::UrmModel<float>& model() { return *model_; }
  const model::UrmModel<float>& model() const { return *model_; }
  optim::Optimizer<float>& optimizer() { return *optimizer_; }
  std::size_t step_count() const { return step_; }

  // Training instances used at step s.
  std::vector<tasks::PuzzleInstance> batch_for_step(std::size_t s);

  // One forward/backward/update. Throws core::NumericError on a non-finite
  // loss or gradient, leaving parameters untouched.
  StepStats train_step();

  // Trains until `until` (default cfg.total_steps), writing metrics and
  // checkpoints under cfg.output_dir when it is non-empty.
  TrainSummary run(std::optional<std::size_t> until = std::nullopt);

  // Model carrying the EMA shadow weights (or a raw copy).
  std::unique_ptr<model::UrmModel<float>> eval_model(bool use_ema) const;
  tasks::PassMetrics evaluate(std::size_t n, bool use_ema, std::size_t limit = 0,
                              const std::vector<tasks::PuzzleInstance>* split = nullptr) const;

  Checkpoint checkpoint() const;
  void save_checkpoint(const std::filesystem::path& path) const;
  void load_checkpoint(const Checkpoint& ckpt);

 private:
  RunConfig cfg_;
  tasks::Dataset data_;
  std::unique_ptr<model::UrmModel<float>> model_;
  std::unique_ptr<optim::Optimizer<float>> optimizer_;
  core::Rng rng_;
  std::size_t step_ = 0;
  std::size_t perm_epoch_ = std::size_t(-1);
  std::vector<std::size_t> perm_;
};

// Evaluates a model on a split. n == 1 uses the batched greedy path.
tasks::PassMetrics evaluate_model(const model::UrmModel<float>& model,
                                  const std::vector<tasks::PuzzleInstance>& split, std::size_t n,
                                  std::uint64_t seed);

}  // namespace urm::harness
