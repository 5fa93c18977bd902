#include "urm/harness/trainer.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

#include "urm/core/ops.hpp"
#include "urm/model/predict.hpp"
#include "urm/tasks/augment.hpp"
#include "urm/tasks/tokenizer.hpp"

namespace urm::harness {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int sudoku_palette(const std::string& family) {
  if (family == "sudoku4") return 4;
  if (family == "sudoku6") return 6;
  return 0;
}

}  // namespace

nlohmann::json TrainSummary::to_json() const {
  return {{"steps", steps},
          {"parameters", parameters},
          {"final_loss", final_loss},
          {"final_eval", tasks::to_json(final_eval)},
          {"seconds", seconds}};
}

tasks::Dataset load_or_generate(const RunConfig& cfg) {
  if (!cfg.dataset_dir.empty()) return tasks::read_dataset(cfg.dataset_dir);
  return tasks::generate_dataset(cfg.data);
}

Trainer::Trainer(const RunConfig& cfg) : Trainer(cfg, (require_valid(cfg), load_or_generate(cfg))) {}

Trainer::Trainer(const RunConfig& cfg, tasks::Dataset data)
    : cfg_(cfg), data_(std::move(data)), rng_(splitmix64(cfg.seed ^ 0x5eedULL)) {
  require_valid(cfg_);
  if (data_.train.empty()) throw ValidationError({"dataset has no training instances"});
  model_ = std::make_unique<model::UrmModel<float>>(cfg_.model, cfg_.seed);
  optimizer_ = std::make_unique<optim::Optimizer<float>>(model_->params(), cfg_.optimizer);
}

std::unique_ptr<Trainer> Trainer::resume(const std::filesystem::path& checkpoint,
                                         std::optional<tasks::Dataset> data) {
  const auto ckpt = read_checkpoint(checkpoint);
  const auto cfg = nlohmann::json::parse(ckpt.config_json).get<RunConfig>();
  auto trainer = data ? std::make_unique<Trainer>(cfg, std::move(*data)) : std::make_unique<Trainer>(cfg);
  trainer->load_checkpoint(ckpt);
  return trainer;
}

std::vector<tasks::PuzzleInstance> Trainer::batch_for_step(std::size_t s) {
  const std::size_t n = data_.train.size(), b = cfg_.batch_size;
  std::vector<tasks::PuzzleInstance> batch;
  batch.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t global = s * b + i;
    const std::size_t epoch = global / n;
    if (epoch != perm_epoch_) {
      perm_.resize(n);
      std::iota(perm_.begin(), perm_.end(), std::size_t(0));
      core::Rng order(splitmix64(cfg_.seed * 0x100000001b3ULL + epoch));
      order.shuffle(perm_);
      perm_epoch_ = epoch;
    }
    batch.push_back(data_.train[perm_[global % n]]);
  }
  return batch;
}

StepStats Trainer::train_step() {
  auto batch_instances = batch_for_step(step_);
  if (cfg_.train_augment) {
    const int palette = sudoku_palette(data_.spec.family);
    if (palette > 0)
      for (auto& inst : batch_instances) inst = tasks::augment(inst, tasks::random_augmentation(rng_, palette, 0));
  }
  const auto batch = model::make_batch(batch_instances, cfg_.model);
  auto& store = model_->params();
  store.zero_grad();

  StepStats stats;
  const auto result = model_->forward(batch);
  auto loss = model::tbptl_loss(result, batch.labels, cfg_.model, &stats.loop_losses);
  stats.loss = double(loss.item());
  if (!std::isfinite(stats.loss))
    throw core::NumericError("non-finite loss at step " + std::to_string(step_ + 1));
  loss.backward();

  stats.lr = cfg_.optimizer.lr * optimizer_->lr_scale();
  optimizer_->step();
  ++step_;
  stats.step = step_;

  const auto& logits = result.logits.value();
  std::size_t counted = 0, correct = 0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const int label = batch.labels[r];
    if (label == core::kIgnoreIndex) continue;
    const float* row = logits.data().data() + r * logits.cols();
    const auto best = std::max_element(row, row + logits.cols()) - row;
    correct += best == label;
    ++counted;
  }
  stats.cell_accuracy = counted ? double(correct) / double(counted) : 0.0;
  double steps = 0.0;
  for (int s : result.steps_used) steps += s;
  stats.mean_act_steps = steps / double(result.steps_used.size());
  return stats;
}

TrainSummary Trainer::run(std::optional<std::size_t> until) {
  const std::size_t stop = until.value_or(cfg_.total_steps);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  const bool persist = !cfg_.output_dir.empty();
  std::filesystem::path dir = cfg_.output_dir;
  MetricsWriter metrics;
  if (persist) {
    std::filesystem::create_directories(dir);
    save_run_config(dir / "config.json", cfg_);
    metrics = MetricsWriter(dir / "metrics.jsonl", step_ > 0);
  }

  TrainSummary summary;
  summary.parameters = model_->parameter_count();
  while (step_ < stop) {
    const auto stats = train_step();
    summary.losses.push_back(stats.loss);
    summary.final_loss = stats.loss;
    const bool eval_now = cfg_.eval_every > 0 && step_ % cfg_.eval_every == 0 && step_ < stop;
    if (persist) {
      MetricsRecord rec{stats.step, stats.loss, stats.loop_losses, stats.cell_accuracy, stats.lr,
                        stats.mean_act_steps, std::nullopt, std::nullopt};
      if (eval_now) rec.eval = evaluate(cfg_.eval_pass_n, cfg_.eval_use_ema, cfg_.eval_limit);
      if (cfg_.log_wall_clock) rec.wall_clock = elapsed();
      metrics.write(rec);
      if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0)
        save_checkpoint(dir / ("step_" + std::to_string(step_) + ".ckpt"));
    }
  }
  summary.steps = step_;
  summary.final_eval = evaluate(cfg_.eval_pass_n, cfg_.eval_use_ema, cfg_.eval_limit);
  summary.seconds = elapsed();
  if (persist) {
    save_checkpoint(dir / "final.ckpt");
    auto j = summary.to_json();
    if (!cfg_.log_wall_clock) j.erase("seconds");
    j["config"] = cfg_;
    std::ofstream(dir / "summary.json") << j.dump(2) << '\n';
  }
  return summary;
}

std::unique_ptr<model::UrmModel<float>> Trainer::eval_model(bool use_ema) const {
  auto m = std::make_unique<model::UrmModel<float>>(cfg_.model, cfg_.seed);
  m->copy_values_from(*model_);
  if (use_ema) optimizer_->state().ema.copy_to(m->params());
  return m;
}

tasks::PassMetrics evaluate_model(const model::UrmModel<float>& model,
                                  const std::vector<tasks::PuzzleInstance>& split, std::size_t n,
                                  std::uint64_t seed) {
  if (n > 1) return tasks::evaluate_pass_n(model::make_predictor(model, seed), split, n);
  const auto preds = model::greedy_predictions<float>(model, split);
  std::unordered_map<int, const tasks::Prediction*> by_id;
  for (std::size_t i = 0; i < split.size(); ++i) by_id[split[i].instance_id] = &preds[i];
  if (by_id.size() != split.size()) throw std::invalid_argument("evaluate: duplicate instance ids");
  return tasks::evaluate_pass_n([&](const tasks::PuzzleInstance& inst, std::size_t) { return *by_id.at(inst.instance_id); },
                                split, 1);
}

tasks::PassMetrics Trainer::evaluate(std::size_t n, bool use_ema, std::size_t limit,
                                     const std::vector<tasks::PuzzleInstance>* split) const {
  const auto& source = split ? *split : data_.eval;
  std::vector<tasks::PuzzleInstance> subset(
      source.begin(), source.begin() + std::ptrdiff_t(limit > 0 ? std::min(limit, source.size()) : source.size()));
  const auto m = eval_model(use_ema);
  return evaluate_model(*m, subset, n, cfg_.seed);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config_json = nlohmann::json(cfg_).dump();
  c.step = step_;
  capture_params(model_->params(), c);
  capture_optimizer(optimizer_->state(), c);
  c.rng_state = rng_.serialize();
  return c;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const { write_checkpoint(path, checkpoint()); }

void Trainer::load_checkpoint(const Checkpoint& ckpt) {
  restore_params(ckpt, model_->params());
  restore_optimizer(ckpt, optimizer_->state());
  rng_.deserialize(ckpt.rng_state);
  step_ = std::size_t(ckpt.step);
}

}  // namespace urm::harness
