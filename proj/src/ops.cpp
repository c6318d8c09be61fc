#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crnmt/tensor.hpp"

namespace crnmt {

using detail::Node;
using detail::NodePtr;

namespace {

bool needs_tape(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor make(Shape shape, std::vector<double> data) { return Tensor(std::move(shape), std::move(data), false); }

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

// Index maps for numpy-style broadcasting of two shapes.
struct Broadcast {
  Shape out;
  bool same = false;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out[i] = pb[i];
    } else {
      throw ShapeError(std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) +
                       " are not broadcast-compatible");
    }
  }
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : stride_a;
    sb[i] = pb[i] == 1 ? 0 : stride_b;
    stride_a *= pa[i];
    stride_b *= pb[i];
  }
  const std::size_t n = shape_numel(plan.out);
  plan.ia.resize(n);
  plan.ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t offa = 0, offb = 0;
  for (std::size_t k = 0; k < n; ++k) {
    plan.ia[k] = offa;
    plan.ib[k] = offb;
    for (std::size_t i = rank; i-- > 0;) {
      ++idx[i];
      offa += sa[i];
      offb += sb[i];
      if (idx[i] < plan.out[i]) break;
      offa -= sa[i] * idx[i];
      offb -= sb[i] * idx[i];
      idx[i] = 0;
    }
  }
  return plan;
}

enum class Binary { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* name) {
  require_defined(a, name);
  require_defined(b, name);
  auto plan = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape(), name));
  const std::size_t n = shape_numel(plan->out);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = plan->same ? x[k] : x[plan->ia[k]];
    const double v = plan->same ? y[k] : y[plan->ib[k]];
    switch (kind) {
      case Binary::kAdd: out[k] = u + v; break;
      case Binary::kSub: out[k] = u - v; break;
      case Binary::kMul: out[k] = u * v; break;
    }
  }
  Tensor result = make(plan->out, std::move(out));
  if (needs_tape({&a, &b})) {
    NodePtr na = a.node(), nb = b.node(), no = result.node();
    Tape::current().record(no, {na, nb}, [na, nb, no, plan, kind] {
      const auto& g = no->grad;
      const std::size_t n = g.size();
      if (na->requires_grad) {
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t i = plan->same ? k : plan->ia[k];
          const double local = kind == Binary::kMul ? nb->data[plan->same ? k : plan->ib[k]] : 1.0;
          na->grad[i] += g[k] * local;
        }
      }
      if (nb->requires_grad) {
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t j = plan->same ? k : plan->ib[k];
          double local = 1.0;
          if (kind == Binary::kSub) local = -1.0;
          if (kind == Binary::kMul) local = na->data[plan->same ? k : plan->ia[k]];
          nb->grad[j] += g[k] * local;
        }
      }
    });
  }
  return result;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv_from_output) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  Tensor result = make(a.shape(), std::move(out));
  if (needs_tape({&a})) {
    NodePtr na = a.node(), no = result.node();
    Tape::current().record(no, {na}, [na, no, deriv_from_output] {
      for (std::size_t i = 0; i < no->grad.size(); ++i) {
        na->grad[i] += no->grad[i] * deriv_from_output(no->data[i]);
      }
    });
  }
  return result;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Splits a shape into (outer, axis, inner) extents around `axis`.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " + to_string(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kMul, "mul"); }

Tensor affine(const Tensor& a, double alpha, double beta) {
  require_defined(a, "affine");
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i] + beta;
  Tensor result = make(a.shape(), std::move(out));
  if (needs_tape({&a})) {
    NodePtr na = a.node(), no = result.node();
    Tape::current().record(no, {na}, [na, no, alpha] {
      for (std::size_t i = 0; i < no->grad.size(); ++i) na->grad[i] += alpha * no->grad[i];
    });
  }
  return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + to_string(a.shape()) + " by " + to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const double* A = a.data().data();
  const double* B = b.data().data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = A[i * k + p];
      if (s == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  Tensor result = make({m, n}, std::move(out));
  if (needs_tape({&a, &b})) {
    NodePtr na = a.node(), nb = b.node(), no = result.node();
    Tape::current().record(no, {na, nb}, [na, nb, no, m, k, n] {
      const double* G = no->grad.data();
      if (na->requires_grad) {
        // dA = dC * B^T
        const double* Bd = nb->data.data();
        double* dA = na->grad.data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = G + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = Bd + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            dA[i * k + p] += acc;
          }
        }
      }
      if (nb->requires_grad) {
        // dB = A^T * dC
        const double* Ad = na->data.data();
        double* dB = nb->grad.data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = G + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double s = Ad[i * k + p];
            if (s == 0.0) continue;
            double* drow = dB + p * n;
            for (std::size_t j = 0; j < n; ++j) drow[j] += s * grow[j];
          }
        }
      }
    });
  }
  return result;
}

Tensor tanh(const Tensor& a) {
  require_defined(a, "tanh");
  return unary(a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  require_defined(a, "sigmoid");
  return unary(a, stable_sigmoid, [](double y) { return y * (1.0 - y); });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  require_defined(a, "softmax");
  const AxisView v = axis_view(a.shape(), axis, "softmax");
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < v.extent; ++t) mx = std::max(mx, x[base + t * v.inner]);
      double total = 0.0;
      for (std::size_t t = 0; t < v.extent; ++t) {
        const double e = std::exp(x[base + t * v.inner] - mx);
        out[base + t * v.inner] = e;
        total += e;
      }
      for (std::size_t t = 0; t < v.extent; ++t) out[base + t * v.inner] /= total;
    }
  }
  Tensor result = make(a.shape(), std::move(out));
  if (needs_tape({&a})) {
    NodePtr na = a.node(), no = result.node();
    Tape::current().record(no, {na}, [na, no, v] {
      const auto& y = no->data;
      const auto& g = no->grad;
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
          const std::size_t base = o * v.extent * v.inner + in;
          double dot = 0.0;
          for (std::size_t t = 0; t < v.extent; ++t) dot += g[base + t * v.inner] * y[base + t * v.inner];
          for (std::size_t t = 0; t < v.extent; ++t) {
            const std::size_t i = base + t * v.inner;
            na->grad[i] += y[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return result;
}

Tensor masked_softmax(const Tensor& a, std::span<const std::uint8_t> mask) {
  require_defined(a, "masked_softmax");
  if (mask.size() != a.numel()) {
    throw ShapeError("masked_softmax: mask has " + std::to_string(mask.size()) + " entries for shape " +
                     to_string(a.shape()));
  }
  const std::size_t width = a.shape().back();
  const std::size_t rows = width == 0 ? 0 : a.numel() / width;
  const auto x = a.data();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * width;
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t t = 0; t < width; ++t) {
      if (mask[base + t]) {
        mx = std::max(mx, x[base + t]);
        any = true;
      }
    }
    if (!any) throw std::invalid_argument("masked_softmax: row " + std::to_string(r) + " has every position masked");
    double total = 0.0;
    for (std::size_t t = 0; t < width; ++t) {
      if (!mask[base + t]) continue;
      out[base + t] = std::exp(x[base + t] - mx);
      total += out[base + t];
    }
    for (std::size_t t = 0; t < width; ++t) out[base + t] /= total;
  }
  Tensor result = make(a.shape(), std::move(out));
  if (needs_tape({&a})) {
    NodePtr na = a.node(), no = result.node();
    Tape::current().record(no, {na}, [na, no, rows, width] {
      const auto& y = no->data;
      const auto& g = no->grad;
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * width;
        double dot = 0.0;
        for (std::size_t t = 0; t < width; ++t) dot += g[base + t] * y[base + t];
        for (std::size_t t = 0; t < width; ++t) na->grad[base + t] += y[base + t] * (g[base + t] - dot);
      }
    });
  }
  return result;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis " + std::to_string(axis) + " invalid for " + to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat: shape " + to_string(s) + " does not match " + to_string(first) + " off axis " +
                       std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisView ov = axis_view(out_shape, axis, "concat");
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.dim(axis) * ov.inner;
    const auto src = p.data();
    for (std::size_t o = 0; o < ov.outer; ++o) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * ov.extent * ov.inner + offset * ov.inner));
    }
    offset += p.dim(axis);
  }
  Tensor result = make(out_shape, std::move(out));
  bool record = false;
  if (grad_enabled()) {
    for (const auto& p : parts) record = record || p.requires_grad();
  }
  if (record) {
    std::vector<NodePtr> inputs;
    for (const auto& p : parts) inputs.push_back(p.node());
    NodePtr no = result.node();
    Tape::current().record(no, inputs, [inputs, no, offsets, ov, axis] {
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto& in = inputs[k];
        if (!in->requires_grad) continue;
        const std::size_t chunk = in->shape[axis] * ov.inner;
        for (std::size_t o = 0; o < ov.outer; ++o) {
          const double* g = no->grad.data() + o * ov.extent * ov.inner + offsets[k] * ov.inner;
          double* dst = in->grad.data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
        }
      }
    });
  }
  return result;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  require_defined(a, "slice");
  const AxisView v = axis_view(a.shape(), axis, "slice");
  if (start + length > v.extent) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") exceeds axis " + std::to_string(axis) + " of " + to_string(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  const std::size_t chunk = length * v.inner;
  std::vector<double> out(v.outer * chunk);
  const auto src = a.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * v.extent * v.inner + start * v.inner), chunk,
                out.begin() + static_cast<std::ptrdiff_t>(o * chunk));
  }
  Tensor result = make(out_shape, std::move(out));
  if (needs_tape({&a})) {
    NodePtr na = a.node(), no = result.node();
    Tape::current().record(no, {na}, [na, no, v, start, chunk] {
      for (std::size_t o = 0; o < v.outer; ++o) {
        double* dst = na->grad.data() + o * v.extent * v.inner + start * v.inner;
        const double* g = no->grad.data() + o * chunk;
        for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
      }
    });
  }
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  Tensor result = make(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
  if (needs_tape({&a})) {
    NodePtr na = a.node(), no = result.node();
    Tape::current().record(no, {na}, [na, no] {
      for (std::size_t i = 0; i < no->grad.size(); ++i) na->grad[i] += no->grad[i];
    });
  }
  return result;
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::int64_t> ids) {
  require_defined(table, "embedding_lookup");
  if (table.rank() != 2) throw ShapeError("embedding_lookup: table must be 2-D, got " + to_string(table.shape()));
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                       " outside [0, " + std::to_string(vocab) + ")");
    }
  }
  std::vector<double> out(ids.size() * d);
  const auto src = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  Tensor result = make({ids.size(), d}, std::move(out));
  if (needs_tape({&table})) {
    NodePtr nt = table.node(), no = result.node();
    std::vector<std::int64_t> rows(ids.begin(), ids.end());
    Tape::current().record(no, {nt}, [nt, no, rows = std::move(rows), d] {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        double* dst = nt->grad.data() + static_cast<std::size_t>(rows[i]) * d;
        const double* g = no->grad.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += g[j];
      }
    });
  }
  return result;
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  require_defined(input, "conv1d");
  require_defined(kernel, "conv1d");
  require_defined(bias, "conv1d");
  if (kernel.rank() != 3) throw ShapeError("conv1d: kernel must be [n x d_in x d_out], got " + to_string(kernel.shape()));
  const std::size_t width = kernel.dim(0), d_in = kernel.dim(1), d_out = kernel.dim(2);
  if (width % 2 == 0) {
    throw std::invalid_argument("conv1d: filter width " + std::to_string(width) +
                                " is even; SAME padding needs an odd width");
  }
  if (input.rank() != 2 && input.rank() != 3) {
    throw ShapeError("conv1d: input must be [T x d] or [B x T x d], got " + to_string(input.shape()));
  }
  const bool batched = input.rank() == 3;
  const std::size_t batch = batched ? input.dim(0) : 1;
  const std::size_t steps = batched ? input.dim(1) : input.dim(0);
  if (input.shape().back() != d_in) {
    throw ShapeError("conv1d: input " + to_string(input.shape()) + " does not match kernel " + to_string(kernel.shape()));
  }
  if (bias.numel() != d_out) throw ShapeError("conv1d: bias " + to_string(bias.shape()) + " must have " + std::to_string(d_out) + " entries");
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width / 2);
  const double* X = input.data().data();
  const double* K = kernel.data().data();
  const double* Bv = bias.data().data();
  std::vector<double> out(batch * steps * d_out);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      double* y = out.data() + (b * steps + t) * d_out;
      std::copy_n(Bv, d_out, y);
      for (std::size_t j = 0; j < width; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
        const double* x = X + (b * steps + static_cast<std::size_t>(src)) * d_in;
        const double* kj = K + j * d_in * d_out;
        for (std::size_t i = 0; i < d_in; ++i) {
          const double s = x[i];
          if (s == 0.0) continue;
          const double* krow = kj + i * d_out;
          for (std::size_t o = 0; o < d_out; ++o) y[o] += s * krow[o];
        }
      }
    }
  }
  Shape out_shape = batched ? Shape{batch, steps, d_out} : Shape{steps, d_out};
  Tensor result = make(out_shape, std::move(out));
  if (needs_tape({&input, &kernel, &bias})) {
    NodePtr nx = input.node(), nk = kernel.node(), nb = bias.node(), no = result.node();
    Tape::current().record(no, {nx, nk, nb}, [=] {
      const double* G = no->grad.data();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
          const double* g = G + (b * steps + t) * d_out;
          if (nb->requires_grad) {
            for (std::size_t o = 0; o < d_out; ++o) nb->grad[o] += g[o];
          }
          for (std::size_t j = 0; j < width; ++j) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
            const std::size_t row = (b * steps + static_cast<std::size_t>(src)) * d_in;
            for (std::size_t i = 0; i < d_in; ++i) {
              const std::size_t kbase = (j * d_in + i) * d_out;
              if (nx->requires_grad) {
                double acc = 0.0;
                for (std::size_t o = 0; o < d_out; ++o) acc += g[o] * nk->data[kbase + o];
                nx->grad[row + i] += acc;
              }
              if (nk->requires_grad) {
                const double s = nx->data[row + i];
                if (s == 0.0) continue;
                for (std::size_t o = 0; o < d_out; ++o) nk->grad[kbase + o] += s * g[o];
              }
            }
          }
        }
      }
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_defined(x, "layer_norm");
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
  if (x.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
  }
  const std::size_t rows = d == 0 ? 0 : x.numel() / d;
  const auto in = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  std::vector<double> out(in.size());
  auto normalized = std::make_shared<std::vector<double>>(in.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat = (row[j] - mu) * is;
      (*normalized)[r * d + j] = xhat;
      out[r * d + j] = xhat * gv[j] + bv[j];
    }
  }
  Tensor result = make(x.shape(), std::move(out));
  if (needs_tape({&x, &gain, &bias})) {
    NodePtr nx = x.node(), ng = gain.node(), nb = bias.node(), no = result.node();
    Tape::current().record(no, {nx, ng, nb}, [=] {
      const auto& g = no->grad;
      const auto& xhat = *normalized;
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * d;
        double sum_gx = 0.0, sum_gxx = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double gy = g[base + j];
          if (ng->requires_grad) ng->grad[j] += gy * xhat[base + j];
          if (nb->requires_grad) nb->grad[j] += gy;
          const double gxh = gy * ng->data[j];
          sum_gx += gxh;
          sum_gxx += gxh * xhat[base + j];
        }
        if (!nx->requires_grad) continue;
        const double scale = (*inv_std)[r] / static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
          const double gxh = g[base + j] * ng->data[j];
          nx->grad[base + j] +=
              scale * (static_cast<double>(d) * gxh - sum_gx - xhat[base + j] * sum_gxx);
        }
      }
    });
  }
  return result;
}

Tensor nll_loss(const Tensor& logits, std::span<const std::int64_t> targets, std::span<const std::uint8_t> mask) {
  require_defined(logits, "nll_loss");
  if (logits.rank() != 2) throw ShapeError("nll_loss: logits must be [steps x V], got " + to_string(logits.shape()));
  const std::size_t steps = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != steps || mask.size() != steps) {
    throw ShapeError("nll_loss: " + std::to_string(steps) + " steps but " + std::to_string(targets.size()) +
                     " targets and " + std::to_string(mask.size()) + " mask entries");
  }
  std::size_t active = 0;
  for (auto m : mask) active += m ? 1 : 0;
  if (active == 0) throw std::invalid_argument("nll_loss: mask selects no steps");
  const auto x = logits.data();
  auto probs = std::make_shared<std::vector<double>>(x.size(), 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    if (!mask[s]) continue;
    if (targets[s] < 0 || static_cast<std::size_t>(targets[s]) >= vocab) {
      throw IndexError("nll_loss: target " + std::to_string(targets[s]) + " at step " + std::to_string(s) +
                       " outside [0, " + std::to_string(vocab) + ")");
    }
    const double* row = x.data() + s * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) z += std::exp(row[v] - mx);
    const double lse = mx + std::log(z);
    total += lse - row[targets[s]];
    for (std::size_t v = 0; v < vocab; ++v) (*probs)[s * vocab + v] = std::exp(row[v] - lse);
  }
  const double denom = static_cast<double>(active);
  Tensor result = make({1}, {total / denom});
  if (needs_tape({&logits})) {
    NodePtr nl = logits.node(), no = result.node();
    std::vector<std::int64_t> tg(targets.begin(), targets.end());
    std::vector<std::uint8_t> mk(mask.begin(), mask.end());
    Tape::current().record(no, {nl}, [nl, no, probs, tg = std::move(tg), mk = std::move(mk), steps, vocab, denom] {
      const double g = no->grad[0] / denom;
      for (std::size_t s = 0; s < steps; ++s) {
        if (!mk[s]) continue;
        for (std::size_t v = 0; v < vocab; ++v) nl->grad[s * vocab + v] += g * (*probs)[s * vocab + v];
        nl->grad[s * vocab + static_cast<std::size_t>(tg[s])] -= g;
      }
    });
  }
  return result;
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  const auto x = a.data();
  Tensor result = make({1}, {std::accumulate(x.begin(), x.end(), 0.0)});
  if (needs_tape({&a})) {
    NodePtr na = a.node(), no = result.node();
    Tape::current().record(no, {na}, [na, no] {
      for (auto& g : na->grad) g += no->grad[0];
    });
  }
  return result;
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return affine(sum(a), 1.0 / static_cast<double>(a.numel()), 0.0);
}

Tensor weighted_sum(const Tensor& weights, const Tensor& values) {
  require_defined(weights, "weighted_sum");
  require_defined(values, "weighted_sum");
  if (weights.rank() != 2 || values.rank() != 3 || weights.dim(0) != values.dim(0) ||
      weights.dim(1) != values.dim(1)) {
    throw ShapeError("weighted_sum: weights " + to_string(weights.shape()) + " incompatible with values " +
                     to_string(values.shape()));
  }
  const std::size_t B = values.dim(0), T = values.dim(1), C = values.dim(2);
  const double* W = weights.data().data();
  const double* V = values.data().data();
  std::vector<double> out(B * C, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    double* y = out.data() + b * C;
    for (std::size_t t = 0; t < T; ++t) {
      const double w = W[b * T + t];
      if (w == 0.0) continue;
      const double* v = V + (b * T + t) * C;
      for (std::size_t c = 0; c < C; ++c) y[c] += w * v[c];
    }
  }
  Tensor result = make({B, C}, std::move(out));
  if (needs_tape({&weights, &values})) {
    NodePtr nw = weights.node(), nv = values.node(), no = result.node();
    Tape::current().record(no, {nw, nv}, [nw, nv, no, B, T, C] {
      for (std::size_t b = 0; b < B; ++b) {
        const double* g = no->grad.data() + b * C;
        for (std::size_t t = 0; t < T; ++t) {
          const std::size_t row = (b * T + t) * C;
          if (nw->requires_grad) {
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) acc += g[c] * nv->data[row + c];
            nw->grad[b * T + t] += acc;
          }
          if (nv->requires_grad) {
            const double w = nw->data[b * T + t];
            for (std::size_t c = 0; c < C; ++c) nv->grad[row + c] += w * g[c];
          }
        }
      }
    });
  }
  return result;
}

Tensor take_steps(const Tensor& x, std::span<const std::size_t> steps) {
  require_defined(x, "take_steps");
  if (x.rank() != 3 || steps.size() != x.dim(0)) {
    throw ShapeError("take_steps: need [B x T x C] input and B step indices, got " + to_string(x.shape()) + " and " +
                     std::to_string(steps.size()));
  }
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2);
  for (std::size_t b = 0; b < B; ++b) {
    if (steps[b] >= T) {
      throw IndexError("take_steps: step " + std::to_string(steps[b]) + " for row " + std::to_string(b) +
                       " outside [0, " + std::to_string(T) + ")");
    }
  }
  std::vector<double> out(B * C);
  const auto src = x.data();
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((b * T + steps[b]) * C), C,
                out.begin() + static_cast<std::ptrdiff_t>(b * C));
  }
  Tensor result = make({B, C}, std::move(out));
  if (needs_tape({&x})) {
    NodePtr nx = x.node(), no = result.node();
    std::vector<std::size_t> idx(steps.begin(), steps.end());
    Tape::current().record(no, {nx}, [nx, no, idx = std::move(idx), T, C] {
      for (std::size_t b = 0; b < idx.size(); ++b) {
        double* dst = nx->grad.data() + (b * T + idx[b]) * C;
        const double* g = no->grad.data() + b * C;
        for (std::size_t c = 0; c < C; ++c) dst[c] += g[c];
      }
    });
  }
  return result;
}

}  // namespace crnmt
