#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "urm/core/gradcheck.hpp"
#include "urm/nn/config.hpp"

namespace urm::harness {

struct GradCheckCase {
  std::string name;
  std::function<core::GradCheckResult(const core::GradCheckOptions&)> run;
  // Negative controls must fail the check.
  bool expect_failure = false;
};

struct GradCheckEntry {
  std::string name;
  core::GradCheckResult result;
  bool expect_failure = false;
  bool ok = false;  // passed, or failed as expected
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed = true;
  double max_rel_error = 0.0;  // over the cases expected to pass
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

// SiLU whose backward drops the x * sigma'(x) term. Test fixture only.
core::Tensor<double> corrupted_silu(const core::Tensor<double>& x);

// D=2, d=16, M=3, N=1 model over T=6 sequences with two ACT steps.
nn::ModelConfig tiny_gradcheck_config();

// Every differentiable op, the block-level compositions, the end-to-end tiny
// model and the corrupted-backward negative control.
std::vector<GradCheckCase> default_gradcheck_cases(std::uint64_t seed = 1);

GradCheckReport run_gradcheck_suite(const std::vector<GradCheckCase>& cases,
                                    const core::GradCheckOptions& options = {});

}  // namespace urm::harness
