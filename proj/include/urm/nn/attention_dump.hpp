#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "urm/core/ndarray.hpp"

namespace urm::nn {

// Binary attention record: uint64 LE rank, rank x uint64 LE extents, then
// row-major float32 LE values. Extents are (layers, loops, heads, T, T).
void write_attention_dump(const std::filesystem::path& path, const core::NdArray<float>& attn);
core::NdArray<float> read_attention_dump(const std::filesystem::path& path);

// Per-(layer, loop, head) mean row entropy (nats) plus per-row values.
nlohmann::json attention_entropy_summary(const core::NdArray<float>& attn);

}  // namespace urm::nn
