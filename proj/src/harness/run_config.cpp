#include "urm/harness/run_config.hpp"

#include <fstream>
#include <sstream>

#include "urm/tasks/grid_tasks.hpp"
#include "urm/tasks/tokenizer.hpp"

namespace urm::harness {

#define URM_RUN_FIELDS(X) \
  X(schema_version)       \
  X(model)                \
  X(optimizer)            \
  X(dataset_dir)          \
  X(data)                 \
  X(batch_size)           \
  X(total_steps)          \
  X(seed)                 \
  X(train_augment)        \
  X(eval_every)           \
  X(checkpoint_every)     \
  X(eval_pass_n)          \
  X(eval_limit)           \
  X(eval_use_ema)         \
  X(log_wall_clock)       \
  X(output_dir)

namespace {

std::string join(const std::vector<std::string>& problems) {
  std::string msg = "invalid run config:";
  for (const auto& p : problems) msg += "\n  - " + p;
  return msg;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::invalid_argument(join(problems)), problems_(std::move(problems)) {}

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> p;
  if (schema_version != kRunConfigSchemaVersion)
    p.push_back("schema_version must be " + std::to_string(kRunConfigSchemaVersion));
  for (const auto& m : model.validate()) p.push_back("model: " + m);
  for (const auto& m : optimizer.validate()) p.push_back("optimizer: " + m);
  if (batch_size == 0) p.push_back("batch_size must be >= 1");
  if (eval_pass_n == 0) p.push_back("eval_pass_n must be >= 1");
  if (dataset_dir.empty()) {
    std::size_t side = data.size;
    if (data.family == "sudoku4") side = 4;
    else if (data.family == "sudoku6") side = 6;
    else {
      try {
        tasks::grid_family_from_string(data.family);
      } catch (const std::exception&) {
        p.push_back("data: unknown family " + data.family);
      }
    }
    if (tasks::tokenized_length(side, side) > model.max_seq_len)
      p.push_back("model: max_seq_len " + std::to_string(model.max_seq_len) + " is shorter than the " +
                  std::to_string(tasks::tokenized_length(side, side)) + " tokens of a " + std::to_string(side) +
                  "x" + std::to_string(side) + " grid");
    if (data.train_count == 0) p.push_back("data: train_count must be >= 1");
    if (model.puzzle_embedding == nn::PuzzleEmbedding::kPerInstance &&
        data.train_count + data.eval_count > model.puzzle_table_size)
      p.push_back("model: puzzle_table_size is smaller than the number of instances");
    if (model.puzzle_embedding == nn::PuzzleEmbedding::kPerFamily) {
      try {
        if (std::size_t(tasks::family_index(data.family)) >= model.puzzle_table_size)
          p.push_back("model: puzzle_table_size does not cover the family index");
      } catch (const std::exception&) {
        // reported above
      }
    }
  }
  return p;
}

void require_valid(const RunConfig& c) {
  if (auto problems = c.validate(); !problems.empty()) throw ValidationError(std::move(problems));
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json::object();
#define URM_WRITE(name) j[#name] = c.name;
  URM_RUN_FIELDS(URM_WRITE)
#undef URM_WRITE
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
  if (!j.contains("schema_version")) throw std::invalid_argument("run config: missing schema_version");
  if (j.at("schema_version") != kRunConfigSchemaVersion)
    throw std::invalid_argument("run config: unsupported schema_version " + j.at("schema_version").dump());
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define URM_READ(name)      \
  if (key == #name) {       \
    known = true;           \
    value.get_to(c.name);   \
  }
    URM_RUN_FIELDS(URM_READ)
#undef URM_READ
    if (!known) throw std::invalid_argument("unknown run config key: " + key);
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return j.get<RunConfig>();
}

void save_run_config(const std::filesystem::path& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << nlohmann::json(c).dump(2) << '\n';
}

}  // namespace urm::harness
