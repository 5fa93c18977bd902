#include "urm/model/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "urm/tasks/tokenizer.hpp"

namespace urm::model {

template <typename Real>
tasks::Grid decode_grid(const NdArray<Real>& logits, std::size_t row0, std::size_t rows, std::size_t cols,
                        double* log_prob) {
  const std::size_t V = logits.cols();
  tasks::Grid g(rows, cols);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const Real* row = logits.data().data() + (row0 + tasks::cell_position(r, c, cols)) * V;
      int best = 0;
      for (int k = 1; k < tasks::kNumColors; ++k)
        if (row[tasks::kColorBase + k] > row[tasks::kColorBase + best]) best = k;
      g.at(r, c) = best;
      if (log_prob != nullptr) {
        const double mx = *std::max_element(row, row + V);
        double z = 0.0;
        for (std::size_t j = 0; j < V; ++j) z += std::exp(double(row[j]) - mx);
        total += double(row[tasks::kColorBase + best]) - mx - std::log(z);
      }
    }
  if (log_prob != nullptr) *log_prob = total;
  return g;
}

std::vector<tasks::Augmentation> default_views(const std::string& family, std::size_t count,
                                               std::uint64_t seed) {
  std::vector<tasks::Augmentation> views;
  for (int e = 1; e < 8 && views.size() < count; ++e) {
    tasks::Augmentation a;
    a.dihedral = e;
    views.push_back(a);
  }
  const int palette = family == "sudoku4" ? 4 : family == "sudoku6" ? 6 : 0;
  core::Rng rng(seed);
  while (views.size() < count) {
    auto a = tasks::random_augmentation(rng, palette, 0);
    if (!a.is_identity()) views.push_back(a);
  }
  return views;
}

template <typename Real>
PredictResult predict(const UrmModel<Real>& model, const tasks::PuzzleInstance& instance, std::size_t n,
                      const std::vector<tasks::Augmentation>& views) {
  if (n == 0) throw std::invalid_argument("predict: n must be >= 1");
  core::NoGradGuard no_grad;
  std::vector<tasks::Augmentation> all{tasks::Augmentation::identity()};
  if (n > 1) all.insert(all.end(), views.begin(), views.end());

  std::vector<tasks::PuzzleInstance> inputs;
  inputs.reserve(all.size());
  for (const auto& a : all) inputs.push_back(tasks::augment(instance, a));
  const auto batch = make_batch(inputs, model.config());
  const auto fwd = model.forward(batch);
  const auto& logits = fwd.logits.value();

  PredictResult out;
  for (int s : fwd.steps_used) out.mean_act_steps += s;
  out.mean_act_steps /= double(std::max<std::size_t>(1, fwd.steps_used.size()));

  for (std::size_t v = 0; v < all.size(); ++v) {
    double lp = 0.0;
    const auto& in = inputs[v].input;
    auto grid = tasks::invert(all[v], decode_grid(logits, v * batch.seq_len, in.rows, in.cols, &lp));
    auto it = std::find_if(out.candidates.begin(), out.candidates.end(),
                           [&](const Candidate& c) { return c.grid == grid; });
    if (it == out.candidates.end()) {
      out.candidates.push_back({std::move(grid), lp, 1});
    } else {
      const double hi = std::max(it->log_prob, lp), lo = std::min(it->log_prob, lp);
      it->log_prob = hi + std::log1p(std::exp(lo - hi));
      ++it->votes;
    }
  }
  // Greedy stays first; the rest are ranked by aggregate log-probability.
  std::stable_sort(out.candidates.begin() + 1, out.candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.log_prob > b.log_prob; });
  if (out.candidates.size() > n) out.candidates.resize(n);
  out.fewer_than_requested = out.candidates.size() < n;
  return out;
}

template <typename Real>
std::vector<tasks::Prediction> greedy_predictions(const UrmModel<Real>& model,
                                                  std::span<const tasks::PuzzleInstance> instances,
                                                  std::size_t chunk) {
  core::NoGradGuard no_grad;
  std::vector<tasks::Prediction> out;
  out.reserve(instances.size());
  for (std::size_t start = 0; start < instances.size(); start += chunk) {
    const auto part = instances.subspan(start, std::min(chunk, instances.size() - start));
    const auto batch = make_batch(part, model.config());
    const auto fwd = model.forward(batch);
    for (std::size_t i = 0; i < part.size(); ++i) {
      tasks::Prediction p;
      p.candidates.push_back(
          decode_grid(fwd.logits.value(), i * batch.seq_len, part[i].input.rows, part[i].input.cols));
      double steps = 0.0;
      for (std::size_t t = 0; t < batch.seq_len; ++t) steps += fwd.steps_used[i * batch.seq_len + t];
      p.act_steps = steps / double(batch.seq_len);
      out.push_back(std::move(p));
    }
  }
  return out;
}

template <typename Real>
tasks::Predictor make_predictor(const UrmModel<Real>& model, std::uint64_t seed) {
  return [&model, seed](const tasks::PuzzleInstance& inst, std::size_t n) {
    const auto views = n > 1 ? default_views(inst.family, std::max<std::size_t>(8, 2 * n),
                                             seed ^ std::uint64_t(inst.instance_id))
                             : std::vector<tasks::Augmentation>{};
    auto res = predict(model, inst, n, views);
    tasks::Prediction p;
    for (auto& c : res.candidates) p.candidates.push_back(std::move(c.grid));
    p.act_steps = res.mean_act_steps;
    p.fewer_than_requested = res.fewer_than_requested;
    return p;
  };
}

#define URM_INSTANTIATE_PREDICT(Real)                                                                   \
  template tasks::Grid decode_grid(const NdArray<Real>&, std::size_t, std::size_t, std::size_t, double*); \
  template PredictResult predict(const UrmModel<Real>&, const tasks::PuzzleInstance&, std::size_t,      \
                                 const std::vector<tasks::Augmentation>&);                              \
  template tasks::Predictor make_predictor(const UrmModel<Real>&, std::uint64_t);                       \
  template std::vector<tasks::Prediction> greedy_predictions(const UrmModel<Real>&,                      \
                                                             std::span<const tasks::PuzzleInstance>,     \
                                                             std::size_t);

URM_INSTANTIATE_PREDICT(float)
URM_INSTANTIATE_PREDICT(double)

}  // namespace urm::model
