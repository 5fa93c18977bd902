#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "urm/core/ndarray.hpp"

namespace urm::core {

enum class Precision { kSingle, kDouble };

template <typename Real>
constexpr Precision precision_of() {
  return sizeof(Real) == sizeof(double) ? Precision::kDouble : Precision::kSingle;
}

template <typename Real>
struct Node {
  NdArray<Real> value;
  NdArray<Real> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs that require grad.
  std::function<void(Node&)> backward;

  NdArray<Real>& grad_buffer();
  void accumulate_grad(std::span<const Real> g);
};

// Handle to a value in the autodiff graph. Copies share the node. Nodes that do
// not require grad hold no inputs, so forward-only computation leaves no graph.
template <typename Real>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<Real>> node) : node_(std::move(node)) {}

  static Tensor constant(NdArray<Real> value);
  static Tensor parameter(NdArray<Real> value);

  bool defined() const { return node_ != nullptr; }
  const NdArray<Real>& value() const { return node_->value; }
  NdArray<Real>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t numel() const { return node_->value.numel(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  Real item() const { return node_->value.item(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const NdArray<Real>& grad() const { return node_->grad; }
  void zero_grad();
  std::uint64_t node_id() const { return node_->id; }
  std::string_view op_name() const { return node_->op; }
  bool is_leaf() const { return !node_->backward; }

  // Seeds d(self)/d(self) = 1 and runs reverse mode. Self must be a scalar.
  void backward() const;

  const std::shared_ptr<Node<Real>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<Real>> node_;
};

// Topologically ordered list of the recorded (grad-requiring) nodes reachable
// from a root. Rebuilt for every backward pass.
template <typename Real>
class Tape {
 public:
  static Tape record(const Tensor<Real>& root);

  std::size_t size() const { return order_.size(); }
  // Number of non-leaf recorded ops.
  std::size_t op_count() const;
  std::span<Node<Real>* const> nodes() const { return order_; }

  void backward(const NdArray<Real>& seed) const;

 private:
  std::vector<Node<Real>*> order_;
};

// Builds an op result. When no input requires grad (or grad mode is off) the
// result is a constant and the backward rule is dropped.
template <typename Real>
Tensor<Real> make_result(std::string_view op, NdArray<Real> value,
                         std::vector<std::shared_ptr<Node<Real>>> inputs,
                         std::function<void(Node<Real>&)> backward);

bool grad_mode_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Enabled by URM_DEBUG_NUMERICS=1 in the environment, or programmatically.
bool numeric_checks_enabled();
void set_numeric_checks(bool enabled);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace urm::core
