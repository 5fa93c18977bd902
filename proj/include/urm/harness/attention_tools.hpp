#pragma once

#include <filesystem>

#include "urm/model/urm.hpp"

namespace urm::harness {

// Runs one instance and stacks every attention matrix into
// [layers x loops x heads x T x T]; loops counts every executed loop
// (forward-only ones included) across all ACT steps.
core::NdArray<float> collect_attention(const model::UrmModel<float>& model, const tasks::PuzzleInstance& instance);

struct AttentionDumpFiles {
  std::filesystem::path dump;     // binary tensor
  std::filesystem::path index;    // JSON: dims, axes, instance, file name
  std::filesystem::path entropy;  // JSON: per-row entropy summary
};

AttentionDumpFiles dump_attention(const model::UrmModel<float>& model, const tasks::PuzzleInstance& instance,
                                  const std::filesystem::path& dir);

}  // namespace urm::harness
