#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "urm/nn/config.hpp"
#include "urm/optim/optimizer.hpp"
#include "urm/tasks/dataset.hpp"

namespace urm::harness {

inline constexpr int kRunConfigSchemaVersion = 1;

struct RunConfig {
  int schema_version = kRunConfigSchemaVersion;
  nn::ModelConfig model;
  optim::OptimizerConfig optimizer;
  // Dataset directory written by gen-data. When empty, `data` is generated
  // in memory.
  std::string dataset_dir;
  tasks::DatasetSpec data;
  std::size_t batch_size = 32;
  std::size_t total_steps = 1000;
  std::uint64_t seed = 0;
  // Random dihedral / digit augmentation of training batches.
  bool train_augment = false;
  std::size_t eval_every = 0;        // 0: only at the end
  std::size_t checkpoint_every = 0;  // 0: only at the end
  std::size_t eval_pass_n = 1;
  std::size_t eval_limit = 0;        // 0: whole eval split
  bool eval_use_ema = true;
  // Adds wall-clock seconds to metrics records. Off for bitwise comparisons.
  bool log_wall_clock = true;
  std::string output_dir;

  // Every violated invariant, empty when valid.
  std::vector<std::string> validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Strict: unknown keys and schema mismatches are errors. Missing keys keep
// their defaults.
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& c);

// Raised with the full list of problems when a RunConfig does not validate.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

void require_valid(const RunConfig& c);

}  // namespace urm::harness
