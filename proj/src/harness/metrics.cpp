#include "urm/harness/metrics.hpp"

#include <stdexcept>
#include <string>

namespace urm::harness {

nlohmann::json MetricsRecord::to_json() const {
  nlohmann::json j = {{"step", step},
                      {"loss", loss},
                      {"loop_losses", loop_losses},
                      {"cell_accuracy", cell_accuracy},
                      {"lr", lr},
                      {"mean_act_steps", mean_act_steps}};
  if (eval) j["eval"] = tasks::to_json(*eval);
  if (wall_clock) j["wall_clock"] = *wall_clock;
  return j;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open metrics file " + path.string());
}

void MetricsWriter::write(const MetricsRecord& record) {
  if (last_step_ && record.step < *last_step_)
    throw std::logic_error("metrics step went backwards: " + std::to_string(record.step));
  last_step_ = record.step;
  out_ << record.to_json().dump() << '\n';
  out_.flush();
}

std::vector<nlohmann::json> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace urm::harness
