#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "urm/harness/run_config.hpp"

namespace urm::harness {

inline constexpr int kSuiteSchemaVersion = 1;

struct SuiteRow {
  std::string label;
  nlohmann::json overrides = nlohmann::json::object();  // merge patch over the base config
};

// A matched-budget grid: every row trains from the same base config (same
// data, batch size and step budget) with its overrides applied, once per seed.
struct AblationSuite {
  std::string name;
  std::string description;
  nlohmann::json base;  // full RunConfig JSON
  std::vector<std::uint64_t> seeds;
  std::vector<SuiteRow> rows;
  double budget_seconds = 0.0;  // 0: unlimited
  // Smoothed training loss threshold for steps-to-threshold (0: not tracked).
  double loss_threshold = 0.0;
  std::size_t loss_window = 20;

  RunConfig row_config(std::size_t row, std::uint64_t seed) const;
};

void to_json(nlohmann::json& j, const AblationSuite& s);
void from_json(const nlohmann::json& j, AblationSuite& s);
AblationSuite load_suite(const std::filesystem::path& path);

struct AblationCell {
  std::uint64_t seed = 0;
  bool completed = false;
  double exact_match = 0.0;    // pass@1 on the eval split
  double cell_accuracy = 0.0;
  double final_loss = 0.0;     // smoothed training loss at the end
  double final_last_loop_loss = 0.0;
  std::optional<std::size_t> steps_to_threshold;
  double seconds = 0.0;

  friend bool operator==(const AblationCell&, const AblationCell&) = default;
};

struct AblationRow {
  std::string label;
  nlohmann::json overrides;
  std::size_t parameters = 0;
  std::size_t layer_applications = 0;  // layers x inner loops x ACT cap, a FLOPs proxy
  std::vector<AblationCell> cells;

  bool completed() const;
  double mean_exact_match() const;  // over completed cells
  double mean_cell_accuracy() const;
  double mean_final_loss() const;
  // Mean over completed cells; a cell that never reached the threshold counts
  // as the full step budget. Empty when nothing is tracked.
  std::optional<double> mean_steps_to_threshold(std::size_t budget) const;

  friend bool operator==(const AblationRow&, const AblationRow&) = default;
};

struct AblationTable {
  std::string suite;
  std::size_t total_steps = 0;
  double loss_threshold = 0.0;
  std::vector<AblationRow> rows;
  bool budget_exceeded = false;

  const AblationRow& row(const std::string& label) const;
  friend bool operator==(const AblationTable&, const AblationTable&) = default;
};

void to_json(nlohmann::json& j, const AblationTable& t);
void from_json(const nlohmann::json& j, AblationTable& t);

struct AblationOptions {
  // Per-run directories (metrics, summary) go here when set.
  std::filesystem::path output_dir;
  std::function<void(const std::string&)> progress;
};

AblationTable run_suite(const AblationSuite& suite, const AblationOptions& options = {});

// Plain-text layout: one line per row with the per-seed values and the mean.
std::string format_table(const AblationTable& table);

}  // namespace urm::harness
