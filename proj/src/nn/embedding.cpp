#include "urm/nn/embedding.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace urm::nn {

namespace ops = urm::core;

template <typename Real>
EmbeddingParams<Real> make_embedding(ParamStore<Real>& store, const ModelConfig& cfg,
                                     core::Rng& rng) {
  const std::size_t d = cfg.hidden;
  EmbeddingParams<Real> p;
  p.token = store.add("embed.token", normal_array<Real>({cfg.vocab_size, d}, 1.0, rng), ParamRole::kEmbedding);
  if (cfg.positional == PositionalScheme::kLearned)
    p.position = store.add("embed.position", normal_array<Real>({cfg.max_seq_len, d}, 0.1, rng),
                           ParamRole::kEmbedding);
  if (cfg.depth_encoding == DepthEncoding::kLearned)
    p.depth = store.add("embed.depth", normal_array<Real>({cfg.max_depth, d}, 0.1, rng),
                        ParamRole::kEmbedding);
  if (cfg.puzzle_embedding != PuzzleEmbedding::kNone)
    p.puzzle = store.add("embed.puzzle", NdArray<Real>(Shape{cfg.puzzle_table_size, d}),
                         ParamRole::kPuzzleEmbedding);
  return p;
}

template <typename Real>
NdArray<Real> sinusoidal_table(std::size_t length, std::size_t width) {
  NdArray<Real> t(Shape{length, width});
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t pair = c / 2;
      const double angle = double(pos) / std::pow(10000.0, 2.0 * double(pair) / double(width));
      t.at(pos, c) = Real(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return t;
}

template <typename Real>
Tensor<Real> embed_base(std::span<const int> tokens, std::size_t seq_len,
                        std::span<const int> puzzle_ids, const EmbeddingParams<Real>& p,
                        const ModelConfig& cfg) {
  if (seq_len == 0 || tokens.size() % seq_len != 0)
    throw core::DimensionError("embed: token count is not a multiple of seq_len");
  if (seq_len > cfg.max_seq_len)
    throw core::DimensionError("embed: seq_len " + std::to_string(seq_len) + " exceeds max_seq_len " +
                               std::to_string(cfg.max_seq_len));
  const std::size_t batch = tokens.size() / seq_len;
  auto h = ops::embedding(p.token, tokens);

  if (cfg.positional == PositionalScheme::kSinusoidal) {
    auto table = Tensor<Real>::constant(sinusoidal_table<Real>(seq_len, cfg.hidden));
    h = ops::add(h, ops::repeat_rows(table, batch));
  } else if (cfg.positional == PositionalScheme::kLearned) {
    std::vector<int> pos(tokens.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = int(i % seq_len);
    h = ops::add(h, ops::embedding(p.position, pos));
  }

  if (p.puzzle.defined()) {
    if (puzzle_ids.size() != batch)
      throw core::DimensionError("embed: expected " + std::to_string(batch) + " puzzle ids, got " +
                                 std::to_string(puzzle_ids.size()));
    std::vector<int> rows(tokens.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const int id = puzzle_ids[i / seq_len];
      if (id < 0 || std::size_t(id) >= cfg.puzzle_table_size)
        throw std::out_of_range("embed: puzzle id " + std::to_string(id) + " outside table of " +
                                std::to_string(cfg.puzzle_table_size));
      rows[i] = id;
    }
    h = ops::add(h, ops::embedding(p.puzzle, rows));
  }
  return h;
}

template <typename Real>
Tensor<Real> depth_encoding(std::size_t step, std::size_t rows, const EmbeddingParams<Real>& p,
                            const ModelConfig& cfg) {
  if (cfg.depth_encoding == DepthEncoding::kNone) return {};
  if (cfg.depth_encoding == DepthEncoding::kLearned) {
    if (step >= cfg.max_depth) throw std::out_of_range("depth_encoding: step beyond max_depth");
    const std::vector<int> ids(rows, int(step));
    return ops::embedding(p.depth, ids);
  }
  NdArray<Real> row(Shape{1, cfg.hidden});
  for (std::size_t c = 0; c < cfg.hidden; ++c) {
    const double angle = double(step) / std::pow(10000.0, 2.0 * double(c / 2) / double(cfg.hidden));
    row[c] = Real(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
  }
  return ops::repeat_rows(Tensor<Real>::constant(std::move(row)), rows);
}

template <typename Real>
Tensor<Real> embed(std::span<const int> tokens, std::size_t seq_len, std::span<const int> puzzle_ids,
                   const EmbeddingParams<Real>& p, const ModelConfig& cfg, std::size_t step) {
  auto h = embed_base(tokens, seq_len, puzzle_ids, p, cfg);
  auto depth = depth_encoding(step, h.rows(), p, cfg);
  return depth.defined() ? ops::add(h, depth) : h;
}

#define URM_INSTANTIATE_EMBED(Real)                                                                 \
  template EmbeddingParams<Real> make_embedding(ParamStore<Real>&, const ModelConfig&, core::Rng&); \
  template NdArray<Real> sinusoidal_table<Real>(std::size_t, std::size_t);                         \
  template Tensor<Real> embed_base(std::span<const int>, std::size_t, std::span<const int>,        \
                                   const EmbeddingParams<Real>&, const ModelConfig&);              \
  template Tensor<Real> depth_encoding(std::size_t, std::size_t, const EmbeddingParams<Real>&,     \
                                       const ModelConfig&);                                        \
  template Tensor<Real> embed(std::span<const int>, std::size_t, std::span<const int>,             \
                              const EmbeddingParams<Real>&, const ModelConfig&, std::size_t);

URM_INSTANTIATE_EMBED(float)
URM_INSTANTIATE_EMBED(double)

}  // namespace urm::nn
