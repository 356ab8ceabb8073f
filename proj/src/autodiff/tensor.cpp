#include "graphnf/autodiff/tensor.hpp"

#include <unordered_set>

#include "graphnf/errors.hpp"

namespace graphnf::ad {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw ContractViolation("tensor shape " + shape_str(shape) + " does not match " +
                            std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw ContractViolation("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ContractViolation("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::span<const double> Tensor::values() const {
  if (!node_) throw ContractViolation("use of undefined tensor");
  return node_->values;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw ContractViolation("use of undefined tensor");
  if (!node_->is_leaf) throw ContractViolation("mutable_values on a non-leaf tensor");
  return node_->values;
}

double Tensor::item() const {
  auto v = values();
  if (v.size() != 1) throw ContractViolation("item() on tensor of shape " + shape_str(shape()));
  return v[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad_allocated; }

std::span<const double> Tensor::grad() const {
  if (!node_ || !node_->grad_allocated) return {};
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) throw ContractViolation("use of undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && node_->grad_allocated) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return constant(shape(), std::vector<double>(values().begin(), values().end())); }

void backward(const Tensor& root) {
  if (!root.defined()) throw ContractViolation("backward on undefined tensor");
  if (root.size() != 1) {
    throw ContractViolation("backward root must be scalar, got shape " + shape_str(root.shape()));
  }
  auto* start = root.node().get();
  if (!start->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{start, 0}};
  visited.insert(start);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  start->ensure_grad();
  start->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = *it;
    if (node->is_leaf) continue;
    if (node->backward_fn && node->grad_allocated) node->backward_fn(*node);
  }
  for (auto* node : order) {
    if (node->is_leaf) continue;
    node->backward_fn = nullptr;
    node->parents.clear();
  }
}

}  // namespace graphnf::ad
