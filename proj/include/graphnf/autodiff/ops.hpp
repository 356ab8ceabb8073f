#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "graphnf/autodiff/tensor.hpp"

namespace graphnf::ad {

enum class OpKind {
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  Concat,
  Slice,
  Reshape,
  Transpose,
  Exp,
  Log,
  Sqrt,
  Sum,
  Mean,
  Outer,
  Elu,
  LeakyRelu,
  Softmax,
  ConvTranspose1d,
  Conv1d,
};

struct OpAttrs {
  int axis = -1;  // -1 on Sum/Mean means "reduce everything"
  bool keepdims = false;
  std::size_t begin = 0;
  std::size_t end = 0;
  Shape shape;
  double scalar = 1.0;  // Scale factor, ELU alpha or LeakyReLU slope
  std::size_t stride = 1;
  std::size_t padding = 0;
};

OpKind op_kind_from_name(std::string_view name);
std::string_view op_name(OpKind kind);

// Generic dispatch used by tests and tooling; the typed functions below are the
// normal entry points.
Tensor apply(OpKind kind, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise with numpy-style broadcasting (right-aligned, size-1 dims stretch).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis, bool keepdims = false);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, std::size_t axis, bool keepdims = false);

// u (m values) and v (n values) of any shape -> [m,n] = u v^T
Tensor outer(const Tensor& u, const Tensor& v);

Tensor elu(const Tensor& a, double alpha = 1.0);
Tensor leaky_relu(const Tensor& a, double slope = 0.01);
Tensor softmax(const Tensor& a, std::size_t axis);

// x: [c_in, len], weight: [c_in, c_out, kernel], bias: [c_out] or undefined.
// Output length (len - 1) * stride - 2 * padding + kernel.
Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        std::size_t stride, std::size_t padding);

// Adjoint of conv_transpose1d without bias: y: [c_out, len_out] -> [c_in, len]
// with len = (len_out + 2 * padding - kernel) / stride + 1.
Tensor conv1d(const Tensor& y, const Tensor& weight, std::size_t stride, std::size_t padding);

}  // namespace graphnf::ad
