#include "cyclesum/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <utility>

namespace cyclesum::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

MatMap as_mat(Buffer& v, std::size_t r, std::size_t c) {
  return MatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

ConstMatMap as_mat(const Buffer& v, std::size_t r, std::size_t c) {
  return ConstMatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_string(a.shape()));
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

// Broadcast rule shared by the elementwise binary ops.
enum class Bcast { same, rows };

Bcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Bcast::same;
  if (a.rank() == 2 && b.rank() == 1 && b.size() == a.cols()) return Bcast::rows;
  shape_fail(op, a, b);
}

template <class Fwd, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  const Bcast kind = broadcast_kind(op, a, b);
  const std::size_t n = a.size();
  const std::size_t bn = b.size();
  auto av = a.values();
  auto bv = b.values();
  Buffer out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[kind == Bcast::same ? i : i % bn]);
  return make_node(a.shape(), std::move(out), {a, b}, [kind, bn, da, db](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const std::size_t n = self.value.size();
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = kind == Bcast::same ? i : i % bn;
        pa.grad[i] += self.grad[i] * da(pa.value[i], pb.value[j], self.value[i]);
      }
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = kind == Bcast::same ? i : i % bn;
        pb.grad[j] += self.grad[i] * db(pa.value[i], pb.value[j], self.value[i]);
      }
    }
  });
}

// dfn(x, y) gives dy/dx from the input and output values.
template <class Fwd, class D>
Tensor unary(const Tensor& a, Fwd fwd, D dfn) {
  auto av = a.values();
  Buffer out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return make_node(a.shape(), std::move(out), {a}, [dfn](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      pa.grad[i] += self.grad[i] * dfn(pa.value[i], self.value[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) shape_fail("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
  Buffer out(m * p);
  as_mat(out, m, p).noalias() = as_mat(a.node()->value, m, k) * as_mat(b.node()->value, k, p);
  return make_node({m, p}, std::move(out), {a, b}, [m, k, p](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    auto g = as_mat(std::as_const(self.grad), m, p);
    if (pa.requires_grad) {
      as_mat(pa.grad, m, k).noalias() += g * as_mat(std::as_const(pb.value), k, p).transpose();
    }
    if (pb.requires_grad) {
      as_mat(pb.grad, k, p).noalias() += as_mat(std::as_const(pa.value), m, k).transpose() * g;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.values()) {
    if (v == 0.0) throw DomainError("div: zero in denominator of shape " + shape_string(b.shape()));
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) {
      throw DomainError("log: non-positive entry " + std::to_string(v) + " in tensor of shape " +
                        shape_string(a.shape()));
    }
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor l2_norm(const Tensor& a) {
  double ss = 0.0;
  for (double v : a.values()) ss += v * v;
  const double norm = std::sqrt(ss);
  return make_node({1}, {norm}, {a}, [](Node& self) {
    Node& pa = parent(self, 0);
    const double norm = self.value[0];
    if (norm == 0.0) return;
    const double g = self.grad[0] / norm;
    for (std::size_t i = 0; i < pa.value.size(); ++i) pa.grad[i] += g * pa.value[i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_node({1}, {s}, {a}, [](Node& self) {
    Node& pa = parent(self, 0);
    for (auto& g : pa.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor sum(const Tensor& a, int axis) {
  require_rank2("sum(axis)", a);
  const std::size_t r = a.rows(), c = a.cols();
  if (axis == 0) {
    Buffer out(c, 0.0);
    auto av = a.values();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
    return make_node({c}, std::move(out), {a}, [r, c](Node& self) {
      Node& pa = parent(self, 0);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) pa.grad[i * c + j] += self.grad[j];
    });
  }
  if (axis == 1) {
    Buffer out(r, 0.0);
    auto av = a.values();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i] += av[i * c + j];
    return make_node({r}, std::move(out), {a}, [r, c](Node& self) {
      Node& pa = parent(self, 0);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) pa.grad[i * c + j] += self.grad[i];
    });
  }
  throw ShapeError("sum: axis must be 0 or 1, got " + std::to_string(axis));
}

Tensor mean(const Tensor& a, int axis) {
  require_rank2("mean(axis)", a);
  const double n = static_cast<double>(axis == 0 ? a.rows() : a.cols());
  return scale(sum(a, axis), 1.0 / n);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  for (const auto& p : parts) require_rank2("concat", p);
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  const std::size_t r0 = parts[0].rows(), c0 = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (axis == 0 && p.cols() != c0) shape_fail("concat", parts[0], p);
    if (axis == 1 && p.rows() != r0) shape_fail("concat", parts[0], p);
    total += axis == 0 ? p.rows() : p.cols();
  }
  const std::size_t R = axis == 0 ? total : r0;
  const std::size_t C = axis == 0 ? c0 : total;
  Buffer out(R * C);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    auto pv = p.values();
    const std::size_t pr = p.rows(), pc = p.cols();
    for (std::size_t i = 0; i < pr; ++i)
      for (std::size_t j = 0; j < pc; ++j) {
        const std::size_t oi = axis == 0 ? off + i : i;
        const std::size_t oj = axis == 0 ? j : off + j;
        out[oi * C + oj] = pv[i * pc + j];
      }
    off += axis == 0 ? pr : pc;
  }
  return make_node({R, C}, std::move(out), parts, [axis, C, offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      const std::size_t pr = p.shape[0], pc = p.shape[1];
      for (std::size_t i = 0; i < pr; ++i)
        for (std::size_t j = 0; j < pc; ++j) {
          const std::size_t oi = axis == 0 ? offsets[k] + i : i;
          const std::size_t oj = axis == 0 ? j : offsets[k] + j;
          p.grad[i * pc + j] += self.grad[oi * C + oj];
        }
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2("slice_rows", a);
  if (begin >= end || end > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + shape_string(a.shape()));
  }
  const std::size_t c = a.cols();
  auto av = a.values();
  Buffer out(av.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          av.begin() + static_cast<std::ptrdiff_t>(end * c));
  return make_node({end - begin, c}, std::move(out), {a}, [begin, c](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[begin * c + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2("slice_cols", a);
  if (begin >= end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + shape_string(a.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  auto av = a.values();
  Buffer out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * c + begin + j];
  return make_node({r, w}, std::move(out), {a}, [r, c, w, begin](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) pa.grad[i * c + begin + j] += self.grad[i * w + j];
  });
}

Tensor reverse_rows(const Tensor& a) {
  require_rank2("reverse_rows", a);
  const std::size_t r = a.rows(), c = a.cols();
  auto av = a.values();
  Buffer out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>((r - 1 - i) * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(i * c));
  return make_node({r, c}, std::move(out), {a}, [r, c](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) pa.grad[(r - 1 - i) * c + j] += self.grad[i * c + j];
  });
}

Tensor repeat_rows(const Tensor& row, std::size_t count) {
  if (row.rows() != 1) throw ShapeError("repeat_rows: expected a single row, got " + shape_string(row.shape()));
  if (count == 0) throw ShapeError("repeat_rows: count must be positive");
  const std::size_t c = row.cols();
  auto rv = row.values();
  Buffer out(count * c);
  for (std::size_t i = 0; i < count; ++i) std::copy(rv.begin(), rv.end(), out.begin() + static_cast<std::ptrdiff_t>(i * c));
  return make_node({count, c}, std::move(out), {row}, [count, c](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < c; ++j) pa.grad[j] += self.grad[i * c + j];
  });
}

Tensor scale_rows(const Tensor& a, const Tensor& weights) {
  require_rank2("scale_rows", a);
  if (weights.size() != a.rows()) shape_fail("scale_rows", a, weights);
  const std::size_t r = a.rows(), c = a.cols();
  auto av = a.values();
  auto wv = weights.values();
  Buffer out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] * wv[i];
  return make_node({r, c}, std::move(out), {a, weights}, [r, c](Node& self) {
    Node& pa = parent(self, 0);
    Node& pw = parent(self, 1);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double g = self.grad[i * c + j];
        if (pa.requires_grad) pa.grad[i * c + j] += g * pw.value[i];
        if (pw.requires_grad) pw.grad[i] += g * pa.value[i * c + j];
      }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  Buffer out(a.values().begin(), a.values().end());
  return make_node(std::move(shape), std::move(out), {a}, [](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

}  // namespace cyclesum::ad
