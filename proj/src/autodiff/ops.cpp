#include "graphnf/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "graphnf/errors.hpp"

namespace graphnf::ad {

using detail::Node;

namespace {

using BackwardFn = std::function<void(Node&)>;

Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs,
                   BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  bool needs = false;
  for (const auto* t : inputs) needs = needs || (t->defined() && t->requires_grad());
  if (needs) {
    node->requires_grad = true;
    node->is_leaf = false;
    for (const auto* t : inputs) {
      if (t->defined()) node->parents.push_back(t->node());
    }
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of parent i, or nullptr if it does not take gradients.
double* grad_of(Node& self, std::size_t i) {
  auto& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

const double* values_of(Node& self, std::size_t i) { return self.parents[i]->values.data(); }

void require(bool cond, const std::string& message) {
  if (!cond) throw ContractViolation(message);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  require(t.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                                shape_str(t.shape()));
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// ---- broadcasting -------------------------------------------------------

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  bool same = false;
};

Broadcast broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  bc.same = a == b;
  const auto rank = std::max(a.size(), b.size());
  bc.out.assign(rank, 1);
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw ContractViolation(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    bc.out[i] = std::max(pa[i], pb[i]);
  }
  bc.stride_a.assign(rank, 0);
  bc.stride_b.assign(rank, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    bc.stride_a[i] = pa[i] == 1 ? 0 : sa;
    bc.stride_b[i] = pb[i] == 1 ? 0 : sb;
    sa *= pa[i];
    sb *= pb[i];
  }
  return bc;
}

template <typename F>
void for_each_broadcast(const Broadcast& bc, F&& f) {
  const auto n = shape_size(bc.out);
  if (bc.same) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  const auto rank = bc.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += bc.stride_a[d];
      ib += bc.stride_b[d];
      if (idx[d] < bc.out[d]) break;
      ia -= bc.stride_a[d] * idx[d];
      ib -= bc.stride_b[d] * idx[d];
      idx[d] = 0;
    }
  }
}

enum class Binary { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* op) {
  auto bc = broadcast_shapes(a.shape(), b.shape(), op);
  std::vector<double> out(shape_size(bc.out));
  const auto* va = a.values().data();
  const auto* vb = b.values().data();
  for_each_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    switch (kind) {
      case Binary::Add: out[i] = va[ia] + vb[ib]; break;
      case Binary::Sub: out[i] = va[ia] - vb[ib]; break;
      case Binary::Mul: out[i] = va[ia] * vb[ib]; break;
    }
  });
  return make_result(bc.out, std::move(out), {&a, &b}, [bc, kind](Node& self) {
    const auto* g = self.grad.data();
    auto* ga = grad_of(self, 0);
    auto* gb = grad_of(self, 1);
    const auto* va = values_of(self, 0);
    const auto* vb = values_of(self, 1);
    for_each_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      switch (kind) {
        case Binary::Add:
          if (ga) ga[ia] += g[i];
          if (gb) gb[ib] += g[i];
          break;
        case Binary::Sub:
          if (ga) ga[ia] += g[i];
          if (gb) gb[ib] -= g[i];
          break;
        case Binary::Mul:
          if (ga) ga[ia] += g[i] * vb[ib];
          if (gb) gb[ib] += g[i] * va[ia];
          break;
      }
    });
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(a.shape(), std::move(out), {&a}, [deriv](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    const auto* x = values_of(self, 0);
    const auto& y = self.values;
    for (std::size_t i = 0; i < y.size(); ++i) ga[i] += self.grad[i] * deriv(x[i], y[i]);
  });
}

std::size_t check_axis(const Tensor& a, int axis, const char* op) {
  require(axis >= 0 && static_cast<std::size_t>(axis) < a.rank(),
          std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " + shape_str(a.shape()));
  return static_cast<std::size_t>(axis);
}

}  // namespace

// ---- dispatch -----------------------------------------------------------

namespace {

struct OpName {
  OpKind kind;
  std::string_view name;
};

constexpr OpName kOpNames[] = {
    {OpKind::MatMul, "matmul"},
    {OpKind::Add, "add"},
    {OpKind::Sub, "sub"},
    {OpKind::Mul, "mul"},
    {OpKind::Scale, "scale"},
    {OpKind::Concat, "concat"},
    {OpKind::Slice, "slice"},
    {OpKind::Reshape, "reshape"},
    {OpKind::Transpose, "transpose"},
    {OpKind::Exp, "exp"},
    {OpKind::Log, "log"},
    {OpKind::Sqrt, "sqrt"},
    {OpKind::Sum, "sum"},
    {OpKind::Mean, "mean"},
    {OpKind::Outer, "outer"},
    {OpKind::Elu, "elu"},
    {OpKind::LeakyRelu, "leaky_relu"},
    {OpKind::Softmax, "softmax"},
    {OpKind::ConvTranspose1d, "conv_transpose1d"},
    {OpKind::Conv1d, "conv1d"},
};

}  // namespace

OpKind op_kind_from_name(std::string_view name) {
  for (const auto& entry : kOpNames) {
    if (entry.name == name) return entry.kind;
  }
  throw ContractViolation("unknown op kind '" + std::string(name) + "'");
}

std::string_view op_name(OpKind kind) {
  for (const auto& entry : kOpNames) {
    if (entry.kind == kind) return entry.name;
  }
  throw ContractViolation("unknown op kind");
}

Tensor apply(OpKind kind, std::span<const Tensor> in, const OpAttrs& attrs) {
  auto arity = [&](std::size_t n) {
    require(in.size() == n, std::string(op_name(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                                std::to_string(in.size()));
  };
  switch (kind) {
    case OpKind::MatMul: arity(2); return matmul(in[0], in[1]);
    case OpKind::Add: arity(2); return add(in[0], in[1]);
    case OpKind::Sub: arity(2); return sub(in[0], in[1]);
    case OpKind::Mul: arity(2); return mul(in[0], in[1]);
    case OpKind::Scale: arity(1); return scale(in[0], attrs.scalar);
    case OpKind::Concat:
      require(!in.empty(), "concat: no inputs");
      return concat(in, check_axis(in[0], attrs.axis, "concat"));
    case OpKind::Slice:
      arity(1);
      return slice(in[0], check_axis(in[0], attrs.axis, "slice"), attrs.begin, attrs.end);
    case OpKind::Reshape: arity(1); return reshape(in[0], attrs.shape);
    case OpKind::Transpose: arity(1); return transpose(in[0]);
    case OpKind::Exp: arity(1); return exp(in[0]);
    case OpKind::Log: arity(1); return log(in[0]);
    case OpKind::Sqrt: arity(1); return sqrt(in[0]);
    case OpKind::Sum:
      arity(1);
      return attrs.axis < 0 ? sum(in[0]) : sum(in[0], check_axis(in[0], attrs.axis, "sum"), attrs.keepdims);
    case OpKind::Mean:
      arity(1);
      return attrs.axis < 0 ? mean(in[0]) : mean(in[0], check_axis(in[0], attrs.axis, "mean"), attrs.keepdims);
    case OpKind::Outer: arity(2); return outer(in[0], in[1]);
    case OpKind::Elu: arity(1); return elu(in[0], attrs.scalar);
    case OpKind::LeakyRelu: arity(1); return leaky_relu(in[0], attrs.scalar);
    case OpKind::Softmax: arity(1); return softmax(in[0], check_axis(in[0], attrs.axis, "softmax"));
    case OpKind::ConvTranspose1d:
      require(in.size() == 2 || in.size() == 3, "conv_transpose1d: expected 2 or 3 inputs");
      return conv_transpose1d(in[0], in[1], in.size() == 3 ? in[2] : Tensor{}, attrs.stride, attrs.padding);
    case OpKind::Conv1d: arity(2); return conv1d(in[0], in[1], attrs.stride, attrs.padding);
  }
  throw ContractViolation("unknown op kind");
}

// ---- linear algebra -----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const auto* va = a.values().data();
  const auto* vb = b.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = va[i * k + p];
      if (s == 0.0) continue;
      const double* brow = vb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    const auto* g = self.grad.data();
    const auto* va = values_of(self, 0);
    const auto* vb = values_of(self, 1);
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = vb + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double s = va[i * k + p];
          if (s == 0.0) continue;
          double* gbrow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += s * grow[j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor outer(const Tensor& u, const Tensor& v) {
  const auto m = u.size(), n = v.size();
  std::vector<double> out(m * n);
  const auto* vu = u.values().data();
  const auto* vv = v.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = vu[i] * vv[j];
  return make_result({m, n}, std::move(out), {&u, &v}, [m, n](Node& self) {
    const auto* g = self.grad.data();
    const auto* vu = values_of(self, 0);
    const auto* vv = values_of(self, 1);
    if (auto* gu = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gu[i] += g[i * n + j] * vv[j];
    }
    if (auto* gv = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gv[j] += g[i * n + j] * vu[i];
    }
  });
}

// ---- structural ---------------------------------------------------------

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const auto& first = parts[0].shape();
  require(axis < first.size(), "concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    require(ok, "concat: shape mismatch " + shape_str(first) + " vs " + shape_str(s));
    lens.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const auto split = split_axis(out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto* src = parts[p].values().data();
    const auto chunk = lens[p] * split.inner;
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(src + o * chunk, chunk, out.data() + o * split.len * split.inner + offset * split.inner);
    }
    offset += lens[p];
  }

  auto node = std::make_shared<Node>();
  node->shape = out_shape;
  node->values = std::move(out);
  bool needs = std::any_of(parts.begin(), parts.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->is_leaf = false;
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward_fn = [split, lens](Node& self) {
      std::size_t offset = 0;
      for (std::size_t p = 0; p < lens.size(); ++p) {
        const auto chunk = lens[p] * split.inner;
        if (auto* gp = grad_of(self, p)) {
          for (std::size_t o = 0; o < split.outer; ++o) {
            const double* src = self.grad.data() + o * split.len * split.inner + offset * split.inner;
            for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += src[i];
          }
        }
        offset += lens[p];
      }
    };
  }
  return Tensor(std::move(node));
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto& shape = a.shape();
  require(axis < shape.size(), "slice: axis out of range for " + shape_str(shape));
  require(begin <= end && end <= shape[axis], "slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                                  ") invalid for " + shape_str(shape));
  const auto split = split_axis(shape, axis);
  Shape out_shape = shape;
  out_shape[axis] = end - begin;
  const auto chunk = (end - begin) * split.inner;
  std::vector<double> out(split.outer * chunk);
  const auto* src = a.values().data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(src + o * split.len * split.inner + begin * split.inner, chunk, out.data() + o * chunk);
  }
  return make_result(out_shape, std::move(out), {&a}, [split, begin, chunk](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t o = 0; o < split.outer; ++o) {
      double* dst = ga + o * split.len * split.inner + begin * split.inner;
      const double* src = self.grad.data() + o * chunk;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_size(shape) == a.size(), "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {&a}, [](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto* v = a.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
  return make_result({n, m}, std::move(out), {&a}, [m, n](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
  });
}

// ---- elementwise --------------------------------------------------------

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor elu(const Tensor& a, double alpha) {
  return unary(
      a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

// ---- reductions ---------------------------------------------------------

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_result({}, {total}, {&a}, [](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    const double g = self.grad[0];
    const auto n = self.parents[0]->values.size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

Tensor mean(const Tensor& a) {
  require(a.size() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum(const Tensor& a, std::size_t axis, bool keepdims) {
  const auto& shape = a.shape();
  require(axis < shape.size(), "sum: axis out of range for " + shape_str(shape));
  const auto split = split_axis(shape, axis);
  Shape out_shape = shape;
  if (keepdims) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  std::vector<double> out(split.outer * split.inner, 0.0);
  const auto* v = a.values().data();
  for (std::size_t o = 0; o < split.outer; ++o)
    for (std::size_t l = 0; l < split.len; ++l)
      for (std::size_t i = 0; i < split.inner; ++i)
        out[o * split.inner + i] += v[(o * split.len + l) * split.inner + i];
  return make_result(out_shape, std::move(out), {&a}, [split](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t o = 0; o < split.outer; ++o)
      for (std::size_t l = 0; l < split.len; ++l)
        for (std::size_t i = 0; i < split.inner; ++i)
          ga[(o * split.len + l) * split.inner + i] += self.grad[o * split.inner + i];
  });
}

Tensor mean(const Tensor& a, std::size_t axis, bool keepdims) {
  require(axis < a.rank() && a.dim(axis) > 0, "mean: invalid axis for " + shape_str(a.shape()));
  return scale(sum(a, axis, keepdims), 1.0 / static_cast<double>(a.dim(axis)));
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto& shape = a.shape();
  require(axis < shape.size(), "softmax: axis out of range for " + shape_str(shape));
  const auto split = split_axis(shape, axis);
  require(split.len > 0, "softmax: empty axis");
  std::vector<double> out(a.size());
  const auto* v = a.values().data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t i = 0; i < split.inner; ++i) {
      const auto at = [&](std::size_t l) { return (o * split.len + l) * split.inner + i; };
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < split.len; ++l) hi = std::max(hi, v[at(l)]);
      require(std::isfinite(hi), "softmax: slice with no finite logit");
      double total = 0.0;
      for (std::size_t l = 0; l < split.len; ++l) {
        out[at(l)] = std::exp(v[at(l)] - hi);
        total += out[at(l)];
      }
      for (std::size_t l = 0; l < split.len; ++l) out[at(l)] /= total;
    }
  }
  return make_result(shape, std::move(out), {&a}, [split](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    const auto& y = self.values;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < split.outer; ++o) {
      for (std::size_t i = 0; i < split.inner; ++i) {
        const auto at = [&](std::size_t l) { return (o * split.len + l) * split.inner + i; };
        double dot = 0.0;
        for (std::size_t l = 0; l < split.len; ++l) dot += g[at(l)] * y[at(l)];
        for (std::size_t l = 0; l < split.len; ++l) ga[at(l)] += y[at(l)] * (g[at(l)] - dot);
      }
    }
  });
}

// ---- convolution --------------------------------------------------------

Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                        std::size_t padding) {
  require_rank(x, 2, "conv_transpose1d");
  require_rank(weight, 3, "conv_transpose1d");
  require(stride >= 1, "conv_transpose1d: stride must be >= 1");
  const auto c_in = x.dim(0), len = x.dim(1);
  const auto c_out = weight.dim(1), kernel = weight.dim(2);
  require(weight.dim(0) == c_in, "conv_transpose1d: weight " + shape_str(weight.shape()) +
                                     " does not match input " + shape_str(x.shape()));
  require(len >= 1 && (len - 1) * stride + kernel > 2 * padding, "conv_transpose1d: empty output");
  if (bias.defined()) {
    require(bias.size() == c_out, "conv_transpose1d: bias " + shape_str(bias.shape()) + " does not match " +
                                      std::to_string(c_out) + " output channels");
  }
  const auto len_out = (len - 1) * stride + kernel - 2 * padding;
  std::vector<double> out(c_out * len_out, 0.0);
  const auto* vx = x.values().data();
  const auto* vw = weight.values().data();
  if (bias.defined()) {
    for (std::size_t co = 0; co < c_out; ++co)
      for (std::size_t t = 0; t < len_out; ++t) out[co * len_out + t] = bias.values()[co];
  }
  // Output position t = i * stride + k - padding.
  auto each_tap = [=](auto&& f) {
    for (std::size_t ci = 0; ci < c_in; ++ci)
      for (std::size_t co = 0; co < c_out; ++co)
        for (std::size_t k = 0; k < kernel; ++k)
          for (std::size_t i = 0; i < len; ++i) {
            const auto pos = static_cast<std::ptrdiff_t>(i * stride + k) - static_cast<std::ptrdiff_t>(padding);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len_out)) continue;
            f(ci * len + i, (ci * c_out + co) * kernel + k, co * len_out + static_cast<std::size_t>(pos), co);
          }
  };
  each_tap([&](std::size_t ix, std::size_t iw, std::size_t io, std::size_t) { out[io] += vx[ix] * vw[iw]; });
  return make_result({c_out, len_out}, std::move(out), {&x, &weight, &bias}, [each_tap](Node& self) {
    const auto* g = self.grad.data();
    auto* gx = grad_of(self, 0);
    auto* gw = grad_of(self, 1);
    auto* gb = self.parents.size() > 2 ? grad_of(self, 2) : nullptr;
    const auto* vx = values_of(self, 0);
    const auto* vw = values_of(self, 1);
    each_tap([&](std::size_t ix, std::size_t iw, std::size_t io, std::size_t) {
      if (gx) gx[ix] += g[io] * vw[iw];
      if (gw) gw[iw] += g[io] * vx[ix];
    });
    if (gb) {
      const auto c_out = self.shape[0], len_out = self.shape[1];
      for (std::size_t co = 0; co < c_out; ++co)
        for (std::size_t t = 0; t < len_out; ++t) gb[co] += g[co * len_out + t];
    }
  });
}

Tensor conv1d(const Tensor& y, const Tensor& weight, std::size_t stride, std::size_t padding) {
  require_rank(y, 2, "conv1d");
  require_rank(weight, 3, "conv1d");
  require(stride >= 1, "conv1d: stride must be >= 1");
  const auto c_in = weight.dim(0), c_out = weight.dim(1), kernel = weight.dim(2);
  require(y.dim(0) == c_out, "conv1d: weight " + shape_str(weight.shape()) + " does not match input " +
                                 shape_str(y.shape()));
  const auto len_out = y.dim(1);
  require(len_out + 2 * padding >= kernel && (len_out + 2 * padding - kernel) % stride == 0,
          "conv1d: length " + std::to_string(len_out) + " inconsistent with stride/kernel/padding");
  const auto len = (len_out + 2 * padding - kernel) / stride + 1;
  auto each_tap = [=](auto&& f) {
    for (std::size_t ci = 0; ci < c_in; ++ci)
      for (std::size_t co = 0; co < c_out; ++co)
        for (std::size_t k = 0; k < kernel; ++k)
          for (std::size_t i = 0; i < len; ++i) {
            const auto pos = static_cast<std::ptrdiff_t>(i * stride + k) - static_cast<std::ptrdiff_t>(padding);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len_out)) continue;
            f(ci * len + i, (ci * c_out + co) * kernel + k, co * len_out + static_cast<std::size_t>(pos));
          }
  };
  std::vector<double> out(c_in * len, 0.0);
  const auto* vy = y.values().data();
  const auto* vw = weight.values().data();
  each_tap([&](std::size_t io, std::size_t iw, std::size_t iy) { out[io] += vy[iy] * vw[iw]; });
  return make_result({c_in, len}, std::move(out), {&y, &weight}, [each_tap](Node& self) {
    const auto* g = self.grad.data();
    auto* gy = grad_of(self, 0);
    auto* gw = grad_of(self, 1);
    const auto* vy = values_of(self, 0);
    const auto* vw = values_of(self, 1);
    each_tap([&](std::size_t io, std::size_t iw, std::size_t iy) {
      if (gy) gy[iy] += g[io] * vw[iw];
      if (gw) gw[iw] += g[io] * vy[iy];
    });
  });
}

}  // namespace graphnf::ad
