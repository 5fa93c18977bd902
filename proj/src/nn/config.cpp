#include "urm/nn/config.hpp"

#include <stdexcept>

namespace urm::nn {

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.layers = 2;
  c.hidden = 64;
  c.heads = 4;
  c.inner_loops = 4;
  c.forward_only_loops = 1;
  c.act_max_steps = 1;
  return c;
}

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> errors;
  if (layers == 0) errors.emplace_back("layers must be >= 1");
  if (hidden == 0) errors.emplace_back("hidden must be >= 1");
  if (heads == 0 || hidden % heads != 0) errors.emplace_back("hidden must be divisible by heads");
  if (inner_loops == 0) errors.emplace_back("inner_loops must be >= 1");
  if (forward_only_loops >= inner_loops)
    errors.emplace_back("forward_only_loops (N) must be < inner_loops (M)");
  if (act_max_steps == 0) errors.emplace_back("act_max_steps must be >= 1");
  if (!(halt_epsilon > 0.0 && halt_epsilon < 0.5)) errors.emplace_back("halt_epsilon must lie in (0, 0.5)");
  if (vocab_size < 2) errors.emplace_back("vocab_size must be >= 2");
  if (max_seq_len == 0) errors.emplace_back("max_seq_len must be >= 1");
  if (conv_kernel == 0) errors.emplace_back("conv_kernel must be >= 1");
  if (norm_eps <= 0.0) errors.emplace_back("norm_eps must be > 0");
  if (positional == PositionalScheme::kRotary && head_dim() % 2 != 0)
    errors.emplace_back("rotary encoding needs an even head dimension");
  if (depth_encoding == DepthEncoding::kLearned && max_depth < inner_loops)
    errors.emplace_back("max_depth must cover inner_loops for a learned depth table");
  if (puzzle_embedding != PuzzleEmbedding::kNone && puzzle_table_size == 0)
    errors.emplace_back("puzzle_table_size must be >= 1 when puzzle embeddings are on");
  if (ponder_cost < 0.0) errors.emplace_back("ponder_cost must be >= 0");
  return errors;
}

#define URM_CONFIG_FIELDS(X)                                                                     \
  X(layers) X(hidden) X(heads) X(inner_loops) X(forward_only_loops) X(act_max_steps)             \
  X(halt_epsilon) X(halt_bias_init) X(act_granularity) X(vocab_size) X(max_seq_len)             \
  X(conv_insertion) X(conv_kernel) X(conv_silu) X(ffn_activation) X(attention_softmax)          \
  X(ffn_width) X(norm_placement) X(norm_eps) X(positional) X(depth_encoding) X(max_depth)       \
  X(input_injection) X(causal) X(puzzle_embedding) X(puzzle_table_size)                          \
  X(loss_mean_over_loops) X(act_supervise_mixture) X(ponder_cost)

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json::object();
#define URM_WRITE(name) j[#name] = c.name;
  URM_CONFIG_FIELDS(URM_WRITE)
#undef URM_WRITE
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define URM_READ(name)                     \
  if (key == #name) {                      \
    known = true;                          \
    value.get_to(c.name);                  \
    if (nlohmann::json(c.name) != value)   \
      throw std::invalid_argument("invalid value for model config key " #name ": " + value.dump()); \
  }
    URM_CONFIG_FIELDS(URM_READ)
#undef URM_READ
    if (!known) throw std::invalid_argument("unknown model config key: " + key);
  }
}

std::string to_string(ConvInsertion p) { return nlohmann::json(p).get<std::string>(); }

ConvInsertion conv_insertion_from_string(const std::string& s) {
  // Accept the letter labels (a)-(f) as well as the long names.
  static const std::pair<const char*, ConvInsertion> kLetters[] = {
      {"a", ConvInsertion::kAfterSdpa},        {"b", ConvInsertion::kAfterValue},
      {"c", ConvInsertion::kAfterKey},         {"d", ConvInsertion::kAfterQuery},
      {"e", ConvInsertion::kBeforeOutputProj}, {"f", ConvInsertion::kAfterMlpExpansion}};
  for (const auto& [letter, p] : kLetters)
    if (s == letter) return p;
  const nlohmann::json j = s;
  const auto p = j.get<ConvInsertion>();
  if (p == ConvInsertion::kNone && s != "none") throw std::invalid_argument("unknown insertion point: " + s);
  return p;
}

}  // namespace urm::nn
