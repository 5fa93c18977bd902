#pragma once

#include <functional>
#include <string>
#include <vector>

#include "urm/core/ops.hpp"

namespace urm::core {

struct GradCheckOptions {
  double step = 1e-5;       // central-difference h
  double tolerance = 1e-4;  // max relative error
  double floor = 1e-6;      // denominator floor for near-zero gradients, times max(1, |f|)
  // Entries checked per input; 0 checks all of them.
  std::size_t max_entries = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::string worst;  // "input i, entry j: analytic a vs numeric n"
  bool passed = true;
};

using ScalarFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

double relative_error(double analytic, double numeric, double floor);

// Compares reverse-mode gradients of f at `inputs` with central finite
// differences. Always runs in double precision.
GradCheckResult gradcheck(const ScalarFn& f, const std::vector<NdArray<double>>& inputs,
                          const GradCheckOptions& options = {});

// Same comparison for a loss that closes over existing parameter tensors:
// entries are perturbed in place and restored afterwards.
GradCheckResult gradcheck_inplace(const std::function<Tensor<double>()>& loss,
                                  const std::vector<Tensor<double>>& params,
                                  const GradCheckOptions& options = {});

}  // namespace urm::core
