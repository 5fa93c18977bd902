#include "urm/nn/attention_dump.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace urm::nn {

static_assert(std::endian::native == std::endian::little, "dump format assumes a little-endian host");

void write_attention_dump(const std::filesystem::path& path, const core::NdArray<float>& attn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::uint64_t rank = attn.ndim();
  out.write(reinterpret_cast<const char*>(&rank), sizeof rank);
  for (auto e : attn.shape()) {
    const std::uint64_t v = e;
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  out.write(reinterpret_cast<const char*>(attn.data().data()),
            static_cast<std::streamsize>(attn.numel() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

core::NdArray<float> read_attention_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), sizeof rank);
  if (!in || rank > 16) throw std::runtime_error("malformed attention dump header: " + path.string());
  core::Shape shape(rank);
  for (auto& e : shape) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    e = v;
  }
  std::vector<float> data(core::shape_numel(shape));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated attention dump: " + path.string());
  return core::NdArray<float>(std::move(shape), std::move(data));
}

nlohmann::json attention_entropy_summary(const core::NdArray<float>& attn) {
  if (attn.ndim() != 5) throw core::DimensionError("attention dump must be rank 5 (layers, loops, heads, T, T)");
  const auto& s = attn.shape();
  const std::size_t layers = s[0], loops = s[1], heads = s[2], T = s[3];
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t l = 0; l < layers; ++l)
    for (std::size_t t = 0; t < loops; ++t)
      for (std::size_t h = 0; h < heads; ++h) {
        const float* base = attn.data().data() + (((l * loops + t) * heads + h) * T * T);
        std::vector<double> rows(T);
        double total = 0.0;
        for (std::size_t i = 0; i < T; ++i) {
          double e = 0.0;
          for (std::size_t j = 0; j < T; ++j) {
            const double p = base[i * T + j];
            if (p > 0.0) e -= p * std::log(p);
          }
          rows[i] = e;
          total += e;
        }
        entries.push_back({{"layer", l}, {"loop", t}, {"head", h},
                           {"mean_row_entropy", total / double(T)}, {"row_entropy", rows}});
      }
  return {{"dims", s}, {"axes", {"layer", "loop", "head", "query", "key"}}, {"entries", entries}};
}

}  // namespace urm::nn
