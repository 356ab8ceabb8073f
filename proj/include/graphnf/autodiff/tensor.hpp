#pragma once

// Minimal reverse-mode differentiable tensor.
//
// A Tensor is a cheap handle to a shared node holding row-major float64 values.
// Operations on tensors that require gradients record their parents and a
// backward closure; backward() walks that tape once and then releases it.
// Leaves keep their accumulated gradient until zero_grad().

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace graphnf::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool grad_allocated = false;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (!grad_allocated) {
      grad.assign(values.size(), 0.0);
      grad_allocated = true;
    }
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const { return values().size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<const double> values() const;
  // Writable view of a leaf's values (optimizer updates, initialization).
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Copy of the values with no tape attached.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Accumulates d(root)/d(leaf) into every reachable requires-grad leaf and frees
// the intermediate tape. root must hold exactly one value.
void backward(const Tensor& root);

}  // namespace graphnf::ad
