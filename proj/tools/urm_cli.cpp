// Command-line front end: train, eval, gradcheck, ablate, dump-attention, gen-data.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "urm/harness/ablation.hpp"
#include "urm/harness/attention_tools.hpp"
#include "urm/harness/gradcheck_suite.hpp"
#include "urm/harness/trainer.hpp"

namespace fs = std::filesystem;
using namespace urm;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kNumeric = 2, kGradcheck = 3 };

// --set a.b.c=value, value parsed as JSON when possible.
void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + assignment);
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  std::string pointer = "/" + key;
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  j[nlohmann::json::json_pointer(pointer)] = value;
}

harness::RunConfig build_config(const std::string& path, const std::vector<std::string>& sets) {
  nlohmann::json j = path.empty() ? nlohmann::json(harness::RunConfig{}) : nlohmann::json(harness::load_run_config(path));
  for (const auto& s : sets) apply_override(j, s);
  return j.get<harness::RunConfig>();
}

void print_problems(const std::vector<std::string>& problems) {
  std::cerr << "config validation failed:\n";
  for (const auto& p : problems) std::cerr << "  - " << p << '\n';
}

std::vector<tasks::PuzzleInstance> pick_split(const tasks::Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "eval") return ds.eval;
  throw std::invalid_argument("split must be train or eval");
}

fs::path find_suite(const std::string& name) {
  if (fs::exists(name)) return name;
  for (fs::path dir : {fs::path("suites"), fs::path(URM_SOURCE_DIR) / "suites"}) {
    const auto p = dir / (name + ".json");
    if (fs::exists(p)) return p;
  }
  throw std::invalid_argument("no suite named " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Looped transformer trainer and ablation harness"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train from a run config");
  std::string train_config, resume_from, output_dir;
  std::vector<std::string> train_sets;
  std::optional<std::size_t> steps;
  train->add_option("-c,--config", train_config, "RunConfig JSON");
  train->add_option("--set", train_sets, "Override a config field, e.g. model.inner_loops=8");
  train->add_option("--steps", steps, "Total steps");
  train->add_option("-o,--output", output_dir, "Run directory");
  train->add_option("--resume", resume_from, "Checkpoint to resume from");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (pass@n)");
  std::string eval_ckpt, eval_dataset, eval_split = "eval", eval_out;
  std::size_t eval_n = 1, eval_limit = 0;
  bool eval_raw = false;
  eval->add_option("checkpoint", eval_ckpt)->required();
  eval->add_option("--dataset", eval_dataset, "Dataset directory (default: from the run config)");
  eval->add_option("--split", eval_split, "train or eval");
  eval->add_option("-n", eval_n, "Candidates per instance");
  eval->add_option("--limit", eval_limit, "Evaluate the first N instances only");
  eval->add_flag("--raw", eval_raw, "Use raw weights instead of the EMA shadow");
  eval->add_option("-o,--output", eval_out, "Write metrics JSON here");

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite (double)");
  core::GradCheckOptions gopts;
  std::string grad_out;
  grad->add_option("--tolerance", gopts.tolerance);
  grad->add_option("--step", gopts.step);
  grad->add_option("-o,--output", grad_out, "Write the JSON report here");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run an ablation suite");
  std::string suite_name, ablate_out;
  std::vector<std::uint64_t> ablate_seeds;
  ablate->add_option("suite", suite_name,
                     "loops-vs-vanilla, truncation-sweep, conv-position, nonlinearity, optimizer, or a suite file")
      ->required();
  ablate->add_option("-o,--output", ablate_out, "Directory for per-run outputs and the table");
  ablate->add_option("--seeds", ablate_seeds, "Override the suite's seeds");

  // dump-attention
  auto* dump = app.add_subcommand("dump-attention", "Write attention maps for one instance");
  std::string dump_ckpt, dump_dataset, dump_split = "eval", dump_out = "attention";
  std::size_t dump_index = 0;
  bool dump_raw = false;
  dump->add_option("checkpoint", dump_ckpt)->required();
  dump->add_option("--dataset", dump_dataset);
  dump->add_option("--split", dump_split);
  dump->add_option("--index", dump_index, "Instance position in the split");
  dump->add_flag("--raw", dump_raw);
  dump->add_option("-o,--output", dump_out);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a dataset directory");
  tasks::DatasetSpec spec;
  std::string gen_out;
  gen->add_option("--family", spec.family, "sudoku4, sudoku6, recolor-map, mirror, gravity, largest-shape-fill, border-draw");
  gen->add_option("--size", spec.size, "Grid side for grid families");
  gen->add_option("--holes", spec.holes, "Empty cells for sudoku");
  gen->add_option("--train", spec.train_count);
  gen->add_option("--eval", spec.eval_count);
  gen->add_option("--seed", spec.seed);
  gen->add_option("-o,--output", gen_out)->required();

  // show-config
  auto* show = app.add_subcommand("show-config", "Print the effective run config");
  std::string show_config;
  std::vector<std::string> show_sets;
  show->add_option("-c,--config", show_config);
  show->add_option("--set", show_sets);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  auto load_for_eval = [&](const std::string& ckpt_path, const std::string& dataset, bool raw,
                           const std::string& split) {
    const auto ckpt = harness::read_checkpoint(ckpt_path);
    auto cfg = nlohmann::json::parse(ckpt.config_json).get<harness::RunConfig>();
    if (!dataset.empty()) cfg.dataset_dir = dataset;
    auto data = harness::load_or_generate(cfg);
    harness::Trainer trainer(cfg, data);
    trainer.load_checkpoint(ckpt);
    return std::make_tuple(trainer.eval_model(!raw), pick_split(data, split), cfg);
  };

  try {
    if (*train) {
      std::unique_ptr<harness::Trainer> trainer;
      if (!resume_from.empty()) {
        trainer = harness::Trainer::resume(resume_from);
        if (!output_dir.empty() || steps) {
          auto cfg = trainer->config();
          if (!output_dir.empty()) cfg.output_dir = output_dir;
          if (steps) cfg.total_steps = *steps;
          auto ckpt = trainer->checkpoint();
          trainer = std::make_unique<harness::Trainer>(cfg, trainer->data());
          trainer->load_checkpoint(ckpt);
        }
      } else {
        auto cfg = build_config(train_config, train_sets);
        if (steps) cfg.total_steps = *steps;
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (auto problems = cfg.validate(); !problems.empty()) {
          print_problems(problems);
          return kValidation;
        }
        trainer = std::make_unique<harness::Trainer>(cfg);
      }
      const auto summary = trainer->run();
      std::cout << summary.to_json().dump(2) << '\n';
    } else if (*eval) {
      auto [model, split, cfg] = load_for_eval(eval_ckpt, eval_dataset, eval_raw, eval_split);
      if (eval_limit > 0 && eval_limit < split.size()) split.resize(eval_limit);
      const auto metrics = harness::evaluate_model(*model, split, eval_n, cfg.seed);
      auto j = tasks::to_json(metrics);
      j["weights"] = eval_raw ? "raw" : "ema";
      j["split"] = eval_split;
      if (!eval_out.empty()) std::ofstream(eval_out) << j.dump(2) << '\n';
      std::cout << j.dump(2) << '\n';
    } else if (*grad) {
      const auto report = harness::run_gradcheck_suite(harness::default_gradcheck_cases(), gopts);
      for (const auto& e : report.entries)
        std::cout << (e.ok ? "ok   " : "FAIL ") << e.name << "  max_rel_error=" << e.result.max_rel_error
                  << (e.expect_failure ? "  (negative control, must fail)" : "") << '\n';
      std::cout << (report.passed ? "gradcheck passed" : "gradcheck FAILED") << " in " << report.seconds << "s\n";
      if (!grad_out.empty()) std::ofstream(grad_out) << report.to_json().dump(2) << '\n';
      return report.passed ? kOk : kGradcheck;
    } else if (*ablate) {
      auto suite = harness::load_suite(find_suite(suite_name));
      if (!ablate_seeds.empty()) suite.seeds = ablate_seeds;
      harness::AblationOptions opts;
      opts.output_dir = ablate_out;
      opts.progress = [](const std::string& msg) { std::cerr << msg << '\n'; };
      const auto table = harness::run_suite(suite, opts);
      std::cout << harness::format_table(table);
    } else if (*dump) {
      auto [model, split, cfg] = load_for_eval(dump_ckpt, dump_dataset, dump_raw, dump_split);
      if (dump_index >= split.size()) throw std::invalid_argument("--index beyond the split");
      const auto files = harness::dump_attention(*model, split[dump_index], dump_out);
      std::cout << files.dump.string() << '\n' << files.index.string() << '\n' << files.entropy.string() << '\n';
    } else if (*gen) {
      const auto ds = tasks::generate_dataset(spec);
      tasks::write_dataset(gen_out, ds);
      std::cout << "wrote " << ds.train.size() << " train and " << ds.eval.size() << " eval instances to " << gen_out
                << '\n';
    } else if (*show) {
      const auto cfg = build_config(show_config, show_sets);
      std::cout << nlohmann::json(cfg).dump(2) << '\n';
      if (auto problems = cfg.validate(); !problems.empty()) {
        print_problems(problems);
        return kValidation;
      }
    }
  } catch (const harness::ValidationError& e) {
    print_problems(e.problems());
    return kValidation;
  } catch (const model::ConfigError& e) {
    print_problems(e.problems());
    return kValidation;
  } catch (const core::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}
