#include "urm/core/tensor.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <unordered_set>

namespace urm::core {

namespace {

thread_local bool g_grad_mode = true;
thread_local std::uint64_t g_next_id = 1;

bool env_numeric_checks() {
  const char* v = std::getenv("URM_DEBUG_NUMERICS");
  return v != nullptr && std::string(v) != "0" && std::string(v) != "";
}

bool g_numeric_checks = env_numeric_checks();

}  // namespace

bool grad_mode_enabled() { return g_grad_mode; }

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

bool numeric_checks_enabled() { return g_numeric_checks; }
void set_numeric_checks(bool enabled) { g_numeric_checks = enabled; }

template <typename Real>
NdArray<Real>& Node<Real>::grad_buffer() {
  if (grad.empty() && value.numel() > 0) grad = NdArray<Real>(value.shape(), Real(0));
  if (grad.shape() != value.shape()) grad = NdArray<Real>(value.shape(), Real(0));
  return grad;
}

template <typename Real>
void Node<Real>::accumulate_grad(std::span<const Real> g) {
  auto& buf = grad_buffer();
  auto dst = buf.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

template <typename Real>
Tensor<Real> Tensor<Real>::constant(NdArray<Real> value) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  node->id = g_next_id++;
  return Tensor(std::move(node));
}

template <typename Real>
Tensor<Real> Tensor<Real>::parameter(NdArray<Real> value) {
  auto t = constant(std::move(value));
  t.node_->requires_grad = true;
  return t;
}

template <typename Real>
void Tensor<Real>::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(Real(0));
}

template <typename Real>
void Tensor<Real>::backward() const {
  if (node_->value.numel() != 1) {
    throw DimensionError("backward(): root must be a scalar, got " +
                         shape_string(node_->value.shape()));
  }
  if (!node_->requires_grad) return;
  Tape<Real>::record(*this).backward(NdArray<Real>(node_->value.shape(), Real(1)));
}

template <typename Real>
Tape<Real> Tape<Real>::record(const Tensor<Real>& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  // Iterative post-order DFS; inputs are visited in declaration order so the
  // resulting order is deterministic.
  std::unordered_set<const Node<Real>*> visited;
  std::vector<std::pair<Node<Real>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<Real>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

template <typename Real>
std::size_t Tape<Real>::op_count() const {
  return static_cast<std::size_t>(
      std::count_if(order_.begin(), order_.end(), [](const Node<Real>* n) { return bool(n->backward); }));
}

template <typename Real>
void Tape<Real>::backward(const NdArray<Real>& seed) const {
  if (order_.empty()) return;
  Node<Real>* root = order_.back();
  if (seed.shape() != root->value.shape()) throw_shape_mismatch("backward seed", seed.shape(), root->value.shape());
  root->accumulate_grad(seed.data());
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node<Real>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template <typename Real>
Tensor<Real> make_result(std::string_view op, NdArray<Real> value,
                         std::vector<std::shared_ptr<Node<Real>>> inputs,
                         std::function<void(Node<Real>&)> backward) {
  if (g_numeric_checks && !value.all_finite()) {
    throw NumericError(std::string(op) + ": produced a non-finite value");
  }
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  node->id = g_next_id++;
  node->op = op;
  const bool needs_grad =
      g_grad_mode && std::any_of(inputs.begin(), inputs.end(),
                                 [](const auto& n) { return n && n->requires_grad; });
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor<Real>(std::move(node));
}

template struct Node<float>;
template struct Node<double>;
template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template Tensor<float> make_result(std::string_view, NdArray<float>,
                                   std::vector<std::shared_ptr<Node<float>>>,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(std::string_view, NdArray<double>,
                                    std::vector<std::shared_ptr<Node<double>>>,
                                    std::function<void(Node<double>&)>);

}  // namespace urm::core
