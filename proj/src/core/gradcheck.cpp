#include "urm/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace urm::core {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

// Cancellation noise in (f(x+h) - f(x-h)) / 2h grows like eps * |f| / h, so
// the near-zero floor grows with the loss.
double scaled_floor(double floor, double loss) { return floor * std::max(1.0, std::abs(loss)); }

}  // namespace

GradCheckResult gradcheck(const ScalarFn& f, const std::vector<NdArray<double>>& inputs,
                          const GradCheckOptions& options) {
  std::vector<Tensor<double>> params;
  params.reserve(inputs.size());
  for (const auto& x : inputs) params.push_back(Tensor<double>::parameter(x));
  auto value = f(params);
  const double floor = scaled_floor(options.floor, value.item());
  value.backward();

  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].numel();
    const std::size_t limit = options.max_entries == 0 ? n : std::min(n, options.max_entries);
    // Spread the checked entries over the whole tensor.
    const std::size_t stride = std::max<std::size_t>(1, n / std::max<std::size_t>(1, limit));
    for (std::size_t c = 0, j = 0; c < limit && j < n; ++c, j += stride) {
      const double analytic = params[i].has_grad() ? params[i].grad()[j] : 0.0;
      std::vector<Tensor<double>> probe;
      probe.reserve(inputs.size());
      for (const auto& x : inputs) probe.push_back(Tensor<double>::constant(x));
      auto& v = probe[i].mutable_value()[j];
      const double orig = v;
      double plus, minus;
      {
        NoGradGuard guard;
        v = orig + options.step;
        plus = f(probe).item();
        v = orig - options.step;
        minus = f(probe).item();
      }
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = relative_error(analytic, numeric, floor);
      ++result.entries_checked;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = std::isfinite(err) ? err : INFINITY;
        std::ostringstream os;
        os << "input " << i << ", entry " << j << ": analytic " << analytic << " vs numeric "
           << numeric;
        result.worst = os.str();
      }
    }
  }
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

GradCheckResult gradcheck_inplace(const std::function<Tensor<double>()>& loss,
                                  const std::vector<Tensor<double>>& params,
                                  const GradCheckOptions& options) {
  for (auto p : params) p.zero_grad();
  auto value = loss();
  const double floor = scaled_floor(options.floor, value.item());
  value.backward();
  std::vector<NdArray<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.has_grad() ? p.grad() : NdArray<double>(p.shape()));

  GradCheckResult result;
  NoGradGuard guard;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto tensor = params[i];
    const std::size_t n = tensor.numel();
    const std::size_t limit = options.max_entries == 0 ? n : std::min(n, options.max_entries);
    const std::size_t stride = std::max<std::size_t>(1, n / std::max<std::size_t>(1, limit));
    for (std::size_t c = 0, j = 0; c < limit && j < n; ++c, j += stride) {
      auto& v = tensor.mutable_value()[j];
      const double orig = v;
      v = orig + options.step;
      const double plus = loss().item();
      v = orig - options.step;
      const double minus = loss().item();
      v = orig;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = relative_error(analytic[i][j], numeric, floor);
      ++result.entries_checked;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = std::isfinite(err) ? err : INFINITY;
        std::ostringstream os;
        os << "param " << i << ", entry " << j << ": analytic " << analytic[i][j] << " vs numeric " << numeric;
        result.worst = os.str();
      }
    }
  }
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

}  // namespace urm::core
