#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace urm::nn {

// Where the short depthwise convolution module sits inside a layer.
enum class ConvInsertion {
  kNone,
  kAfterSdpa,          // (a) per-head attention output
  kAfterValue,         // (b) per-head value projection
  kAfterKey,           // (c) per-head key projection
  kAfterQuery,         // (d) per-head query projection
  kBeforeOutputProj,   // (e) concatenated heads, before W_O
  kAfterMlpExpansion,  // (f) ConvSwiGLU
};

enum class FfnActivation { kSwiGlu, kSilu, kRelu };
enum class PositionalScheme { kNone, kSinusoidal, kRotary, kLearned };
enum class DepthEncoding { kNone, kSinusoidal, kLearned };
enum class NormPlacement { kPost, kPre };
enum class PuzzleEmbedding { kNone, kPerInstance, kPerFamily };
enum class ActGranularity { kToken, kSequence };

NLOHMANN_JSON_SERIALIZE_ENUM(ConvInsertion, {{ConvInsertion::kNone, "none"},
                                             {ConvInsertion::kAfterSdpa, "after_sdpa"},
                                             {ConvInsertion::kAfterValue, "after_value"},
                                             {ConvInsertion::kAfterKey, "after_key"},
                                             {ConvInsertion::kAfterQuery, "after_query"},
                                             {ConvInsertion::kBeforeOutputProj, "before_output_proj"},
                                             {ConvInsertion::kAfterMlpExpansion, "after_mlp_expansion"}})
NLOHMANN_JSON_SERIALIZE_ENUM(FfnActivation, {{FfnActivation::kSwiGlu, "swiglu"},
                                             {FfnActivation::kSilu, "silu"},
                                             {FfnActivation::kRelu, "relu"}})
NLOHMANN_JSON_SERIALIZE_ENUM(PositionalScheme, {{PositionalScheme::kNone, "none"},
                                                {PositionalScheme::kSinusoidal, "sinusoidal"},
                                                {PositionalScheme::kRotary, "rotary"},
                                                {PositionalScheme::kLearned, "learned"}})
NLOHMANN_JSON_SERIALIZE_ENUM(DepthEncoding, {{DepthEncoding::kNone, "none"},
                                             {DepthEncoding::kSinusoidal, "sinusoidal"},
                                             {DepthEncoding::kLearned, "learned"}})
NLOHMANN_JSON_SERIALIZE_ENUM(NormPlacement, {{NormPlacement::kPost, "post"}, {NormPlacement::kPre, "pre"}})
NLOHMANN_JSON_SERIALIZE_ENUM(PuzzleEmbedding, {{PuzzleEmbedding::kNone, "none"},
                                               {PuzzleEmbedding::kPerInstance, "per_instance"},
                                               {PuzzleEmbedding::kPerFamily, "per_family"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ActGranularity, {{ActGranularity::kToken, "token"},
                                              {ActGranularity::kSequence, "sequence"}})

// Architecture record. Defaults are the full-size reference setting; desk()
// gives the scaled-down shape used by the toy suites.
struct ModelConfig {
  std::size_t layers = 4;
  std::size_t hidden = 512;
  std::size_t heads = 8;
  std::size_t inner_loops = 8;        // M
  std::size_t forward_only_loops = 2; // N, loops 1..N run without gradient
  std::size_t act_max_steps = 16;
  double halt_epsilon = 0.01;
  double halt_bias_init = 0.0;
  ActGranularity act_granularity = ActGranularity::kToken;

  std::size_t vocab_size = 13;
  std::size_t max_seq_len = 111;

  ConvInsertion conv_insertion = ConvInsertion::kAfterMlpExpansion;
  std::size_t conv_kernel = 2;
  bool conv_silu = true;  // SiLU after the depthwise conv
  FfnActivation ffn_activation = FfnActivation::kSwiGlu;
  bool attention_softmax = true;
  std::size_t ffn_width = 0;  // m; 0 selects 4 * hidden

  NormPlacement norm_placement = NormPlacement::kPost;
  double norm_eps = 1e-5;
  PositionalScheme positional = PositionalScheme::kSinusoidal;
  DepthEncoding depth_encoding = DepthEncoding::kSinusoidal;
  std::size_t max_depth = 64;  // size of the learned depth table
  bool input_injection = true;
  bool causal = false;

  PuzzleEmbedding puzzle_embedding = PuzzleEmbedding::kPerFamily;
  std::size_t puzzle_table_size = 8;

  // Loss wiring.
  bool loss_mean_over_loops = false;
  bool act_supervise_mixture = true;
  double ponder_cost = 0.0;  // extension, off by default

  std::size_t expansion() const { return ffn_width == 0 ? 4 * hidden : ffn_width; }
  std::size_t head_dim() const { return hidden / heads; }
  std::size_t trainable_loops() const { return inner_loops - forward_only_loops; }

  static ModelConfig desk();
  // Violated invariants, empty when valid.
  std::vector<std::string> validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
// Rejects unknown keys; missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

std::string to_string(ConvInsertion p);
ConvInsertion conv_insertion_from_string(const std::string& s);

}  // namespace urm::nn
