#include "urm/harness/gradcheck_suite.hpp"

#include <chrono>
#include <cmath>

#include "urm/core/rng.hpp"
#include "urm/model/urm.hpp"
#include "urm/nn/blocks.hpp"

namespace urm::harness {

using core::GradCheckOptions;
using core::GradCheckResult;
using core::NdArray;
using core::Shape;
using T = core::Tensor<double>;
namespace ops = urm::core;

namespace {

NdArray<double> random(Shape shape, core::Rng& rng, double scale = 1.0) {
  NdArray<double> a(std::move(shape));
  for (auto& v : a.data()) v = rng.normal(0.0, scale);
  return a;
}

// Values bounded away from zero so kinks stay outside the FD stencil.
NdArray<double> away_from_zero(Shape shape, core::Rng& rng) {
  NdArray<double> a(std::move(shape));
  for (auto& v : a.data()) {
    const double m = rng.uniform(0.2, 1.5);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return a;
}

// Projects a tensor onto fixed random weights so every output entry
// contributes to the scalar with an O(1) coefficient.
struct Projector {
  core::Rng rng;
  T operator()(const T& y) {
    auto w = T::constant(random(y.shape(), rng));
    return ops::sum(ops::mul(y, w));
  }
};

using Fn = std::function<T(const std::vector<T>&)>;

GradCheckCase op_case(std::string name, std::vector<NdArray<double>> inputs, Fn f) {
  return {std::move(name), [inputs = std::move(inputs), f = std::move(f)](const GradCheckOptions& o) {
            return core::gradcheck(f, inputs, o);
          }};
}

// Wraps a projected function so the weights are the same on every call.
Fn projected(std::function<T(const std::vector<T>&)> body, std::uint64_t seed) {
  return [body = std::move(body), seed](const std::vector<T>& in) {
    Projector p{core::Rng(seed)};
    return p(body(in));
  };
}

std::vector<T> params_of(const nn::ParamStore<double>& store) {
  std::vector<T> out;
  for (const auto& p : store.entries()) out.push_back(p.tensor);
  return out;
}

GradCheckCase block_case(std::string name, nn::ModelConfig cfg, std::uint64_t seed) {
  return {std::move(name), [cfg, seed](const GradCheckOptions& o) {
            core::Rng rng(seed);
            nn::ParamStore<double> store;
            auto layer = nn::make_layer(store, "layer", cfg, rng);
            const std::size_t batch = 2, seq = 5;
            auto ctx = nn::make_context<double>(cfg, batch, seq);
            auto x = T::parameter(random({batch * seq, cfg.hidden}, rng));
            auto params = params_of(store);
            params.push_back(x);
            const auto loss = [&] {
              Projector p{core::Rng(seed + 1)};
              return p(nn::transition_block(x, layer, ctx));
            };
            return core::gradcheck_inplace(loss, params, o);
          }};
}

nn::ModelConfig small_block_config() {
  nn::ModelConfig c;
  c.layers = 1;
  c.hidden = 8;
  c.heads = 2;
  c.ffn_width = 12;
  c.conv_kernel = 3;
  c.max_seq_len = 8;
  c.inner_loops = 2;
  c.forward_only_loops = 0;
  c.act_max_steps = 1;
  return c;
}

}  // namespace

T corrupted_silu(const T& x) {
  NdArray<double> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double v = x.value()[i];
    out[i] = v / (1.0 + std::exp(-v));
  }
  return core::make_result<double>("corrupted_silu", std::move(out), {x.node()}, [](core::Node<double>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-in.value[i]));
      g[i] += self.grad[i] * s;  // missing s * x * (1 - s)
    }
  });
}

nn::ModelConfig tiny_gradcheck_config() {
  nn::ModelConfig c;
  c.layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.inner_loops = 3;
  c.forward_only_loops = 1;
  c.act_max_steps = 2;
  c.max_seq_len = 6;
  c.ffn_width = 32;
  c.conv_kernel = 2;
  c.puzzle_table_size = 4;
  return c;
}

std::vector<GradCheckCase> default_gradcheck_cases(std::uint64_t seed) {
  core::Rng rng(seed);
  std::vector<GradCheckCase> cases;
  auto s = [&] { return rng.next_u64(); };

  cases.push_back(op_case("matmul", {random({3, 4}, rng), random({4, 5}, rng)},
                          projected([](const std::vector<T>& in) { return ops::matmul(in[0], in[1]); }, s())));
  cases.push_back(op_case("transpose", {random({3, 4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::transpose(in[0]); }, s())));
  cases.push_back(op_case("add", {random({3, 4}, rng), random({3, 4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::add(in[0], in[1]); }, s())));
  cases.push_back(op_case("sub", {random({3, 4}, rng), random({3, 4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::sub(in[0], in[1]); }, s())));
  cases.push_back(op_case("mul", {random({3, 4}, rng), random({3, 4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::mul(in[0], in[1]); }, s())));
  cases.push_back(op_case("scale", {random({3, 4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::scale(in[0], -1.7); }, s())));
  cases.push_back(op_case("add_scalar", {random({3, 4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::add_scalar(in[0], 0.3); }, s())));
  cases.push_back(op_case("add_row", {random({3, 4}, rng), random({4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::add_row(in[0], in[1]); }, s())));
  cases.push_back(op_case("mul_col", {random({3, 4}, rng), random({3, 1}, rng)},
                          projected([](const std::vector<T>& in) { return ops::mul_col(in[0], in[1]); }, s())));
  cases.push_back(op_case("silu", {random({3, 4}, rng, 2.0)},
                          projected([](const std::vector<T>& in) { return ops::silu(in[0]); }, s())));
  cases.push_back(op_case("relu", {away_from_zero({3, 4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::relu(in[0]); }, s())));
  cases.push_back(op_case("sigmoid", {random({3, 4}, rng, 2.0)},
                          projected([](const std::vector<T>& in) { return ops::sigmoid(in[0]); }, s())));
  cases.push_back(op_case("sum", {random({3, 4}, rng)}, [](const std::vector<T>& in) { return ops::sum(in[0]); }));
  cases.push_back(op_case("mean", {random({3, 4}, rng)}, [](const std::vector<T>& in) { return ops::mean(in[0]); }));
  cases.push_back(op_case("softmax_lastdim", {random({3, 5}, rng, 2.0)},
                          projected([](const std::vector<T>& in) { return ops::softmax_lastdim(in[0]); }, s())));
  cases.push_back(op_case("rmsnorm", {random({3, 6}, rng), random({6}, rng)},
                          projected([](const std::vector<T>& in) { return ops::rmsnorm(in[0], in[1], 1e-5); }, s())));
  {
    const std::vector<int> targets{2, core::kIgnoreIndex, 0, 4};
    cases.push_back(op_case("cross_entropy", {random({4, 5}, rng, 2.0)}, [targets](const std::vector<T>& in) {
      return ops::cross_entropy(in[0], targets, core::kIgnoreIndex);
    }));
  }
  cases.push_back(op_case("dwconv1d", {random({8, 3}, rng), random({3, 3}, rng)},
                          projected([](const std::vector<T>& in) { return ops::dwconv1d(in[0], in[1], 2, 4); }, s())));
  for (const bool causal : {false, true})
    for (const bool softmax : {true, false}) {
      const core::AttentionSpec spec{2, 4, causal, softmax};
      std::string name = std::string("attention") + (causal ? "_causal" : "") + (softmax ? "" : "_nosoftmax");
      cases.push_back(op_case(std::move(name), {random({8, 6}, rng), random({8, 6}, rng), random({8, 6}, rng)},
                              projected(
                                  [spec](const std::vector<T>& in) {
                                    return ops::scaled_dot_attention<double>(in[0], in[1], in[2], spec, nullptr);
                                  },
                                  s())));
    }
  cases.push_back(op_case("reshape", {random({3, 4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::reshape(in[0], {2, 6}); }, s())));
  cases.push_back(op_case("concat_cols", {random({3, 2}, rng), random({3, 4}, rng)},
                          projected([](const std::vector<T>& in) { return ops::concat_cols(std::vector<T>{in[0], in[1]}); }, s())));
  cases.push_back(op_case("slice_cols", {random({3, 6}, rng)},
                          projected([](const std::vector<T>& in) { return ops::slice_cols(in[0], 1, 4); }, s())));
  cases.push_back(op_case("repeat_rows", {random({2, 3}, rng)},
                          projected([](const std::vector<T>& in) { return ops::repeat_rows(in[0], 3); }, s())));
  {
    const std::vector<int> ids{1, 3, 1, 0};
    cases.push_back(op_case("embedding", {random({5, 3}, rng)},
                            projected([ids](const std::vector<T>& in) { return ops::embedding(in[0], ids); }, s())));
  }
  // Stop-gradient: gradients through a detach must equal those of the same
  // graph with the detached value replaced by a constant, bit for bit.
  {
    auto a0 = random({3, 4}, rng), b0 = random({4, 4}, rng);
    const std::uint64_t wseed = s();
    cases.push_back({"detach", [a0, b0, wseed](const GradCheckOptions&) {
                       auto grads = [&](bool use_detach) {
                         auto a = T::parameter(a0), b = T::parameter(b0);
                         auto h = ops::silu(ops::matmul(a, b));
                         auto cut = use_detach ? ops::detach(h) : T::constant(h.value());
                         Projector p{core::Rng(wseed)};
                         p(ops::add(ops::matmul(cut, b), h)).backward();
                         return std::make_pair(a.grad(), b.grad());
                       };
                       const auto x = grads(true), y = grads(false);
                       GradCheckResult r;
                       for (std::size_t i = 0; i < x.first.numel(); ++i)
                         r.max_rel_error = std::max(r.max_rel_error, std::abs(x.first[i] - y.first[i]));
                       for (std::size_t i = 0; i < x.second.numel(); ++i)
                         r.max_rel_error = std::max(r.max_rel_error, std::abs(x.second[i] - y.second[i]));
                       r.entries_checked = x.first.numel() + x.second.numel();
                       r.passed = r.max_rel_error == 0.0;
                       if (!r.passed) r.worst = "detach gradient differs from constant substitution";
                       return r;
                     }});
  }

  // Block compositions.
  {
    auto c = small_block_config();
    cases.push_back(block_case("block_convswiglu", c, s()));
    c.conv_insertion = nn::ConvInsertion::kNone;
    cases.push_back(block_case("block_swiglu", c, s()));
    for (auto where : {nn::ConvInsertion::kAfterSdpa, nn::ConvInsertion::kAfterValue, nn::ConvInsertion::kAfterKey,
                       nn::ConvInsertion::kAfterQuery, nn::ConvInsertion::kBeforeOutputProj}) {
      c.conv_insertion = where;
      cases.push_back(block_case("block_conv_" + nn::to_string(where), c, s()));
    }
    c = small_block_config();
    c.ffn_activation = nn::FfnActivation::kSilu;
    cases.push_back(block_case("block_silu", c, s()));
    c.ffn_activation = nn::FfnActivation::kRelu;
    cases.push_back(block_case("block_relu", c, s()));
    c = small_block_config();
    c.attention_softmax = false;
    cases.push_back(block_case("block_no_softmax", c, s()));
    c = small_block_config();
    c.positional = nn::PositionalScheme::kRotary;
    cases.push_back(block_case("block_rotary", c, s()));
    c = small_block_config();
    c.norm_placement = nn::NormPlacement::kPre;
    c.causal = true;
    cases.push_back(block_case("block_prenorm_causal", c, s()));
  }

  // End-to-end tiny model, every parameter.
  {
    const std::uint64_t model_seed = s();
    cases.push_back({"urm_end_to_end", [model_seed](const GradCheckOptions& o) {
                       const auto cfg = tiny_gradcheck_config();
                       model::UrmModel<double> m(cfg, model_seed);
                       core::Rng rng(model_seed + 1);
                       // Nonzero puzzle rows so that table is exercised too.
                       for (auto& v : m.params().find("embed.puzzle")->tensor.mutable_value().data())
                         v = rng.normal(0.0, 0.1);
                       model::Batch batch;
                       batch.seq_len = cfg.max_seq_len;
                       for (std::size_t i = 0; i < 2 * batch.seq_len; ++i) {
                         batch.tokens.push_back(int(rng.below(cfg.vocab_size)));
                         batch.labels.push_back(i % 5 == 4 ? core::kIgnoreIndex : int(rng.below(cfg.vocab_size)));
                       }
                       batch.puzzle_ids = {0, 1};
                       // Loops 1..N carry no gradient, so the reference holds
                       // their output fixed at the unperturbed parameters.
                       m.set_truncation_cache(model::TruncationCache::kRecord);
                       (void)m.forward(batch);
                       m.set_truncation_cache(model::TruncationCache::kReplay);
                       const auto loss = [&] {
                         return model::tbptl_loss(m.forward(batch), batch.labels, cfg);
                       };
                       return core::gradcheck_inplace(loss, params_of(m.params()), o);
                     }});
  }

  cases.push_back(op_case("negative_control_corrupted_silu", {random({3, 4}, rng, 2.0)},
                          projected([](const std::vector<T>& in) { return corrupted_silu(in[0]); }, s())));
  cases.back().expect_failure = true;
  return cases;
}

GradCheckReport run_gradcheck_suite(const std::vector<GradCheckCase>& cases, const GradCheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  for (const auto& c : cases) {
    GradCheckEntry e{c.name, c.run(options), c.expect_failure, false};
    e.ok = e.result.passed != c.expect_failure;
    if (!c.expect_failure) report.max_rel_error = std::max(report.max_rel_error, e.result.max_rel_error);
    report.passed = report.passed && e.ok;
    report.entries.push_back(std::move(e));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json GradCheckReport::to_json() const {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& e : entries)
    cases.push_back({{"name", e.name},
                     {"max_rel_error", e.result.max_rel_error},
                     {"entries_checked", e.result.entries_checked},
                     {"worst", e.result.worst},
                     {"expect_failure", e.expect_failure},
                     {"ok", e.ok}});
  return {{"passed", passed}, {"max_rel_error", max_rel_error}, {"seconds", seconds}, {"cases", cases}};
}

}  // namespace urm::harness
