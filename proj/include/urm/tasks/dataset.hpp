#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "urm/tasks/instance.hpp"

namespace urm::tasks {

inline constexpr int kDatasetFormatVersion = 1;

// family: "sudoku4", "sudoku6", or a grid family name ("gravity", ...).
struct DatasetSpec {
  std::string family = "sudoku4";
  std::size_t size = 4;    // grid side for grid families
  int holes = 8;           // sudoku only
  std::size_t train_count = 512;
  std::size_t eval_count = 128;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

void to_json(nlohmann::json& j, const DatasetSpec& s);
void from_json(const nlohmann::json& j, DatasetSpec& s);

struct Dataset {
  DatasetSpec spec;
  std::vector<PuzzleInstance> train;
  std::vector<PuzzleInstance> eval;
};

// Stable family index for per-family puzzle embeddings.
int family_index(const std::string& family);

// Re-derives the target from the input with the family's oracle (unique
// backtracking solve for sudoku, the rule function otherwise).
bool verify_instance(const PuzzleInstance& inst);

// Instance i is generated from a seed derived from (spec.seed, i), so shards can
// be produced independently. Duplicate puzzles are skipped; train and eval ids
// are disjoint ranges.
Dataset generate_dataset(const DatasetSpec& spec);

nlohmann::json instance_to_json(const PuzzleInstance& inst);
PuzzleInstance instance_from_json(const nlohmann::json& j);

void write_shard(const std::filesystem::path& path, const std::vector<PuzzleInstance>& instances);
std::vector<PuzzleInstance> read_shard(const std::filesystem::path& path);

// Writes train.jsonl, eval.jsonl and manifest.json under dir.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace urm::tasks
