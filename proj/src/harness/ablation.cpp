#include "urm/harness/ablation.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "urm/harness/trainer.hpp"

namespace urm::harness {

RunConfig AblationSuite::row_config(std::size_t row, std::uint64_t seed) const {
  nlohmann::json j = base;
  j.merge_patch(rows.at(row).overrides);
  auto cfg = j.get<RunConfig>();
  cfg.seed = seed;
  return cfg;
}

void to_json(nlohmann::json& j, const AblationSuite& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.rows) rows.push_back({{"label", r.label}, {"overrides", r.overrides}});
  j = {{"schema_version", kSuiteSchemaVersion},
       {"suite", s.name},
       {"description", s.description},
       {"base", s.base},
       {"seeds", s.seeds},
       {"rows", rows},
       {"budget_seconds", s.budget_seconds},
       {"loss_threshold", s.loss_threshold},
       {"loss_window", s.loss_window}};
}

void from_json(const nlohmann::json& j, AblationSuite& s) {
  static const char* kKeys[] = {"schema_version", "suite",          "description",   "base", "seeds",
                                "rows",           "budget_seconds", "loss_threshold", "loss_window"};
  for (const auto& [key, value] : j.items())
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
      throw std::invalid_argument("unknown suite key: " + key);
  if (j.at("schema_version") != kSuiteSchemaVersion) throw std::invalid_argument("unsupported suite schema_version");
  j.at("suite").get_to(s.name);
  s.description = j.value("description", "");
  s.base = j.at("base");
  j.at("seeds").get_to(s.seeds);
  s.rows.clear();
  for (const auto& r : j.at("rows")) {
    for (const auto& [key, value] : r.items())
      if (key != "label" && key != "overrides") throw std::invalid_argument("unknown suite row key: " + key);
    s.rows.push_back({r.at("label").get<std::string>(), r.value("overrides", nlohmann::json::object())});
  }
  s.budget_seconds = j.value("budget_seconds", 0.0);
  s.loss_threshold = j.value("loss_threshold", 0.0);
  s.loss_window = j.value("loss_window", std::size_t(20));
  if (s.seeds.empty()) throw std::invalid_argument("suite needs at least one seed");
  if (s.loss_window == 0) throw std::invalid_argument("loss_window must be >= 1");
  // Fail early on a bad row rather than halfway through the grid.
  for (std::size_t i = 0; i < s.rows.size(); ++i) require_valid(s.row_config(i, s.seeds.front()));
}

AblationSuite load_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open suite " + path.string());
  return nlohmann::json::parse(in).get<AblationSuite>();
}

namespace {

template <typename F>
double mean_over_completed(const std::vector<AblationCell>& cells, F f) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells)
    if (c.completed) {
      total += f(c);
      ++n;
    }
  return n ? total / double(n) : 0.0;
}

void to_json(nlohmann::json& j, const AblationCell& c) {
  j = {{"seed", c.seed},
       {"completed", c.completed},
       {"exact_match", c.exact_match},
       {"cell_accuracy", c.cell_accuracy},
       {"final_loss", c.final_loss},
       {"final_last_loop_loss", c.final_last_loop_loss},
       {"steps_to_threshold", c.steps_to_threshold ? nlohmann::json(*c.steps_to_threshold) : nlohmann::json()},
       {"seconds", c.seconds}};
}

void from_json(const nlohmann::json& j, AblationCell& c) {
  j.at("seed").get_to(c.seed);
  j.at("completed").get_to(c.completed);
  j.at("exact_match").get_to(c.exact_match);
  j.at("cell_accuracy").get_to(c.cell_accuracy);
  j.at("final_loss").get_to(c.final_loss);
  j.at("final_last_loop_loss").get_to(c.final_last_loop_loss);
  c.steps_to_threshold = j.at("steps_to_threshold").is_null()
                             ? std::nullopt
                             : std::optional<std::size_t>(j.at("steps_to_threshold").get<std::size_t>());
  j.at("seconds").get_to(c.seconds);
}

}  // namespace

bool AblationRow::completed() const {
  return std::all_of(cells.begin(), cells.end(), [](const AblationCell& c) { return c.completed; });
}
double AblationRow::mean_exact_match() const {
  return mean_over_completed(cells, [](const AblationCell& c) { return c.exact_match; });
}
double AblationRow::mean_cell_accuracy() const {
  return mean_over_completed(cells, [](const AblationCell& c) { return c.cell_accuracy; });
}
double AblationRow::mean_final_loss() const {
  return mean_over_completed(cells, [](const AblationCell& c) { return c.final_loss; });
}
std::optional<double> AblationRow::mean_steps_to_threshold(std::size_t budget) const {
  return mean_over_completed(cells, [budget](const AblationCell& c) {
    return double(c.steps_to_threshold.value_or(budget));
  });
}

const AblationRow& AblationTable::row(const std::string& label) const {
  for (const auto& r : rows)
    if (r.label == label) return r;
  throw std::out_of_range("no ablation row " + label);
}

void to_json(nlohmann::json& j, const AblationTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells) {
      nlohmann::json cj;
      to_json(cj, c);
      cells.push_back(cj);
    }
    rows.push_back({{"label", r.label},
                    {"overrides", r.overrides},
                    {"parameters", r.parameters},
                    {"layer_applications", r.layer_applications},
                    {"completed", r.completed()},
                    {"mean_exact_match", r.mean_exact_match()},
                    {"mean_cell_accuracy", r.mean_cell_accuracy()},
                    {"cells", cells}});
  }
  j = {{"suite", t.suite},
       {"total_steps", t.total_steps},
       {"loss_threshold", t.loss_threshold},
       {"budget_exceeded", t.budget_exceeded},
       {"rows", rows}};
}

void from_json(const nlohmann::json& j, AblationTable& t) {
  j.at("suite").get_to(t.suite);
  j.at("total_steps").get_to(t.total_steps);
  j.at("loss_threshold").get_to(t.loss_threshold);
  j.at("budget_exceeded").get_to(t.budget_exceeded);
  t.rows.clear();
  for (const auto& rj : j.at("rows")) {
    AblationRow r;
    rj.at("label").get_to(r.label);
    r.overrides = rj.at("overrides");
    rj.at("parameters").get_to(r.parameters);
    rj.at("layer_applications").get_to(r.layer_applications);
    for (const auto& cj : rj.at("cells")) {
      AblationCell c;
      from_json(cj, c);
      r.cells.push_back(c);
    }
    t.rows.push_back(std::move(r));
  }
}

AblationTable run_suite(const AblationSuite& suite, const AblationOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  auto say = [&](const std::string& msg) {
    if (options.progress) options.progress(msg);
  };

  AblationTable table;
  table.suite = suite.name;
  table.loss_threshold = suite.loss_threshold;
  std::map<std::string, tasks::Dataset> datasets;  // keyed by data spec / dir

  for (std::size_t r = 0; r < suite.rows.size(); ++r) {
    AblationRow row;
    row.label = suite.rows[r].label;
    row.overrides = suite.rows[r].overrides;
    for (const auto seed : suite.seeds) {
      AblationCell cell;
      cell.seed = seed;
      auto cfg = suite.row_config(r, seed);
      table.total_steps = cfg.total_steps;
      row.layer_applications = cfg.model.layers * cfg.model.inner_loops * cfg.model.act_max_steps;
      if (suite.budget_seconds > 0.0 && elapsed() > suite.budget_seconds) {
        table.budget_exceeded = true;
        say(row.label + " seed " + std::to_string(seed) + ": skipped, budget exceeded");
        row.cells.push_back(cell);
        continue;
      }
      if (!options.output_dir.empty())
        cfg.output_dir = (options.output_dir / (row.label + "_seed" + std::to_string(seed))).string();
      const std::string key = cfg.dataset_dir.empty() ? nlohmann::json(cfg.data).dump() : cfg.dataset_dir;
      if (!datasets.count(key)) datasets.emplace(key, load_or_generate(cfg));

      const auto cell_start = elapsed();
      Trainer trainer(cfg, datasets.at(key));
      row.parameters = trainer.model().parameter_count();
      std::vector<double> window;
      double window_sum = 0.0, last_loop = 0.0;
      for (std::size_t s = 0; s < cfg.total_steps; ++s) {
        const auto stats = trainer.train_step();
        window.push_back(stats.loss);
        window_sum += stats.loss;
        if (window.size() > suite.loss_window) window_sum -= window[window.size() - 1 - suite.loss_window];
        const double smooth = window_sum / double(std::min(window.size(), suite.loss_window));
        if (suite.loss_threshold > 0.0 && !cell.steps_to_threshold && window.size() >= suite.loss_window &&
            smooth < suite.loss_threshold)
          cell.steps_to_threshold = stats.step;
        cell.final_loss = smooth;
        if (!stats.loop_losses.empty()) last_loop = stats.loop_losses.back();
      }
      cell.final_last_loop_loss = last_loop;
      const auto eval = trainer.evaluate(1, cfg.eval_use_ema, cfg.eval_limit);
      cell.exact_match = eval.pass(1);
      cell.cell_accuracy = eval.cell_accuracy;
      cell.completed = true;
      cell.seconds = elapsed() - cell_start;
      std::ostringstream msg;
      msg << row.label << " seed " << seed << ": exact " << std::fixed << std::setprecision(4) << cell.exact_match
          << " loss " << cell.final_loss << " (" << std::setprecision(1) << cell.seconds << "s)";
      say(msg.str());
      row.cells.push_back(cell);
    }
    table.rows.push_back(std::move(row));
  }
  if (!options.output_dir.empty()) {
    std::filesystem::create_directories(options.output_dir);
    std::ofstream(options.output_dir / (suite.name + ".table.json")) << nlohmann::json(table).dump(2) << '\n';
  }
  return table;
}

std::string format_table(const AblationTable& table) {
  std::ostringstream os;
  os << "suite " << table.suite << " (" << table.total_steps << " steps";
  if (table.budget_exceeded) os << ", budget exceeded";
  os << ")\n";
  os << std::left << std::setw(28) << "row" << std::setw(10) << "params" << std::setw(8) << "apps" << std::setw(10)
     << "exact" << std::setw(10) << "cell" << std::setw(10) << "loss";
  if (table.loss_threshold > 0.0) os << std::setw(12) << "steps<thr";
  os << "per-seed exact\n";
  os << std::fixed;
  for (const auto& r : table.rows) {
    os << std::setw(28) << (r.label + (r.completed() ? "" : " *")) << std::setw(10) << r.parameters << std::setw(8)
       << r.layer_applications << std::setw(10) << std::setprecision(4) << r.mean_exact_match() << std::setw(10)
       << r.mean_cell_accuracy() << std::setw(10) << r.mean_final_loss();
    if (table.loss_threshold > 0.0)
      os << std::setw(12) << std::setprecision(1) << r.mean_steps_to_threshold(table.total_steps).value_or(0.0);
    for (const auto& c : r.cells) {
      if (c.completed)
        os << std::setprecision(4) << c.exact_match << ' ';
      else
        os << "- ";
    }
    os << '\n';
  }
  if (std::any_of(table.rows.begin(), table.rows.end(), [](const AblationRow& r) { return !r.completed(); }))
    os << "* incomplete row\n";
  return os.str();
}

}  // namespace urm::harness
