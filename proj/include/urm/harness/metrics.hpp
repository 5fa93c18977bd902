#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include <json.hpp>

#include "urm/tasks/evaluate.hpp"

namespace urm::harness {

struct MetricsRecord {
  std::size_t step = 0;
  double loss = 0.0;
  std::vector<double> loop_losses;  // per trainable loop
  double cell_accuracy = 0.0;       // training batch, argmax of final logits
  double lr = 0.0;
  double mean_act_steps = 0.0;
  std::optional<tasks::PassMetrics> eval;
  std::optional<double> wall_clock;  // seconds since run start

  nlohmann::json to_json() const;
};

// Append-only JSONL stream. Steps must not decrease.
class MetricsWriter {
 public:
  MetricsWriter() = default;
  MetricsWriter(const std::filesystem::path& path, bool append);

  bool is_open() const { return out_.is_open(); }
  void write(const MetricsRecord& record);

 private:
  std::ofstream out_;
  std::optional<std::size_t> last_step_;
};

std::vector<nlohmann::json> read_metrics(const std::filesystem::path& path);

}  // namespace urm::harness
