#include "relgp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace relgp {

std::string Shape::str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << "]";
  return os.str();
}

namespace {

NodePtr new_node(Shape shape, std::vector<double> data) {
  auto n = std::make_shared<Node>();
  if (shape.numel() != static_cast<int64_t>(data.size()))
    raise(ErrorKind::ShapeMismatch,
          "data length " + std::to_string(data.size()) + " vs shape " + shape.str());
  n->shape = std::move(shape);
  n->data = std::move(data);
  return n;
}

Value make_op(Shape shape, std::vector<double> data, std::vector<Value> inputs,
              std::function<void(Node&)> backward_fn) {
  NodePtr n = new_node(std::move(shape), std::move(data));
  bool needs = false;
  n->inputs.reserve(inputs.size());
  for (const Value& v : inputs) {
    n->inputs.push_back(v.node());
    needs = needs || v.node()->requires_grad;
  }
  n->requires_grad = needs;
  if (needs) n->backward_fn = std::move(backward_fn);
  return Value(n);
}

void check_same_shape(const Value& a, const Value& b, const char* op) {
  if (!(a.shape() == b.shape()))
    raise(ErrorKind::ShapeMismatch, std::string(op) + ": " + a.shape().str() +
                                        " vs " + b.shape().str());
}

void accumulate(Node& dst, const std::vector<double>& g) {
  for (size_t i = 0; i < g.size(); ++i) dst.grad[i] += g[i];
}

}  // namespace

Value constant(Shape shape, std::vector<double> data) {
  return Value(new_node(std::move(shape), std::move(data)));
}

Value constant_scalar(double v) { return constant(Shape{}, {v}); }

Value zeros(Shape shape) {
  size_t n = static_cast<size_t>(shape.numel());
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Value make_param(const std::string& name, Shape shape, std::vector<double> data,
                 bool frozen) {
  NodePtr n = new_node(std::move(shape), std::move(data));
  n->is_param = true;
  n->name = name;
  n->requires_grad = !frozen;
  return Value(n);
}

// --- elementwise -------------------------------------------------------------

Value add(const Value& a, const Value& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& n) {
    if (n.inputs[0]->requires_grad) accumulate(*n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad) accumulate(*n.inputs[1], n.grad);
  });
}

Value sub(const Value& a, const Value& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& n) {
    if (n.inputs[0]->requires_grad) accumulate(*n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) n.inputs[1]->grad[i] -= n.grad[i];
  });
}

Value mul(const Value& a, const Value& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& n) {
    Node& x = *n.inputs[0];
    Node& y = *n.inputs[1];
    if (x.requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) x.grad[i] += n.grad[i] * y.data[i];
    if (y.requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) y.grad[i] += n.grad[i] * x.data[i];
  });
}

Value add_rowvec(const Value& m, const Value& v) {
  if (m.shape().rank() != 2 || v.shape().rank() != 1 ||
      m.shape().dims[1] != v.shape().dims[0])
    raise(ErrorKind::ShapeMismatch,
          "add_rowvec: " + m.shape().str() + " vs " + v.shape().str());
  int64_t rows = m.shape().dims[0], cols = m.shape().dims[1];
  std::vector<double> out(m.data());
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) out[i * cols + j] += v.data()[j];
  return make_op(m.shape(), std::move(out), {m, v}, [rows, cols](Node& n) {
    if (n.inputs[0]->requires_grad) accumulate(*n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad) {
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j)
          n.inputs[1]->grad[j] += n.grad[i * cols + j];
    }
  });
}

Value scale(const Value& a, double c) {
  std::vector<double> out(a.data());
  for (double& x : out) x *= c;
  return make_op(a.shape(), std::move(out), {a}, [c](Node& n) {
    for (size_t i = 0; i < n.grad.size(); ++i) n.inputs[0]->grad[i] += c * n.grad[i];
  });
}

Value add_const(const Value& a, double c) {
  std::vector<double> out(a.data());
  for (double& x : out) x += c;
  return make_op(a.shape(), std::move(out), {a},
                 [](Node& n) { accumulate(*n.inputs[0], n.grad); });
}

Value sub_from_const(double c, const Value& a) {
  std::vector<double> out(a.data());
  for (double& x : out) x = c - x;
  return make_op(a.shape(), std::move(out), {a}, [](Node& n) {
    for (size_t i = 0; i < n.grad.size(); ++i) n.inputs[0]->grad[i] -= n.grad[i];
  });
}

Value relu(const Value& a) {
  std::vector<double> out(a.data());
  for (double& x : out) x = x > 0.0 ? x : 0.0;
  return make_op(a.shape(), std::move(out), {a}, [](Node& n) {
    const auto& x = n.inputs[0]->data;
    for (size_t i = 0; i < n.grad.size(); ++i)
      if (x[i] > 0.0) n.inputs[0]->grad[i] += n.grad[i];
  });
}

Value vlog(const Value& a) {
  std::vector<double> out(a.data());
  for (double& x : out) x = std::log(x);
  return make_op(a.shape(), std::move(out), {a}, [](Node& n) {
    const auto& x = n.inputs[0]->data;
    for (size_t i = 0; i < n.grad.size(); ++i) n.inputs[0]->grad[i] += n.grad[i] / x[i];
  });
}

Value vabs(const Value& a) {
  std::vector<double> out(a.data());
  for (double& x : out) x = std::fabs(x);
  return make_op(a.shape(), std::move(out), {a}, [](Node& n) {
    const auto& x = n.inputs[0]->data;
    for (size_t i = 0; i < n.grad.size(); ++i) {
      double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
      n.inputs[0]->grad[i] += s * n.grad[i];
    }
  });
}

Value pow_const(const Value& a, double p) {
  std::vector<double> out(a.data());
  for (double& x : out) x = std::pow(x, p);
  return make_op(a.shape(), std::move(out), {a}, [p](Node& n) {
    const auto& x = n.inputs[0]->data;
    for (size_t i = 0; i < n.grad.size(); ++i)
      n.inputs[0]->grad[i] += n.grad[i] * p * std::pow(x[i], p - 1.0);
  });
}

Value reshape(const Value& a, Shape shape) {
  if (shape.numel() != a.numel())
    raise(ErrorKind::ShapeMismatch, "reshape: " + a.shape().str() + " to " + shape.str());
  return make_op(std::move(shape), a.data(), {a},
                 [](Node& n) { accumulate(*n.inputs[0], n.grad); });
}

Value transpose(const Value& a) {
  if (a.shape().rank() != 2)
    raise(ErrorKind::ShapeMismatch, "transpose: " + a.shape().str());
  int64_t r = a.shape().dims[0], c = a.shape().dims[1];
  std::vector<double> out(static_cast<size_t>(r * c));
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
  return make_op(Shape{c, r}, std::move(out), {a}, [r, c](Node& n) {
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j)
        n.inputs[0]->grad[i * c + j] += n.grad[j * r + i];
  });
}

Value mul_mask(const Value& a, std::vector<double> mask) {
  if (static_cast<int64_t>(mask.size()) != a.numel())
    raise(ErrorKind::ShapeMismatch, "mul_mask: mask length mismatch");
  std::vector<double> out(a.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op(a.shape(), std::move(out), {a}, [mask = std::move(mask)](Node& n) {
    for (size_t i = 0; i < n.grad.size(); ++i)
      n.inputs[0]->grad[i] += mask[i] * n.grad[i];
  });
}

// --- matmul -------------------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2 ||
      a.shape().dims[1] != b.shape().dims[0])
    raise(ErrorKind::ShapeMismatch,
          "matmul: " + a.shape().str() + " x " + b.shape().str());
  int64_t m = a.shape().dims[0], k = a.shape().dims[1], n = b.shape().dims[1];
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t t = 0; t < k; ++t) {
      double av = pa[i * k + t];
      const double* brow = pb + t * n;
      double* crow = out.data() + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return make_op(Shape{m, n}, std::move(out), {a, b}, [m, k, n](Node& nd) {
    Node& na = *nd.inputs[0];
    Node& nb = *nd.inputs[1];
    const double* g = nd.grad.data();
    if (na.requires_grad) {
      // dA = G * B^T
      for (int64_t i = 0; i < m; ++i)
        for (int64_t t = 0; t < k; ++t) {
          double s = 0.0;
          const double* grow = g + i * n;
          const double* brow = nb.data.data() + t * n;
          for (int64_t j = 0; j < n; ++j) s += grow[j] * brow[j];
          na.grad[i * k + t] += s;
        }
    }
    if (nb.requires_grad) {
      // dB = A^T * G
      for (int64_t i = 0; i < m; ++i) {
        const double* arow = na.data.data() + i * k;
        const double* grow = g + i * n;
        for (int64_t t = 0; t < k; ++t) {
          double av = arow[t];
          double* brow = nb.grad.data() + t * n;
          for (int64_t j = 0; j < n; ++j) brow[j] += av * grow[j];
        }
      }
    }
  });
}

// --- reductions -----------------------------------------------------------------

Value sum_all(const Value& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make_op(Shape{}, {s}, {a}, [](Node& n) {
    double g = n.grad[0];
    for (double& d : n.inputs[0]->grad) d += g;
  });
}

Value mean_all(const Value& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  double inv = 1.0 / static_cast<double>(a.numel());
  return make_op(Shape{}, {s * inv}, {a}, [inv](Node& n) {
    double g = n.grad[0] * inv;
    for (double& d : n.inputs[0]->grad) d += g;
  });
}

Value mean_rows(const Value& a) {
  if (a.shape().rank() != 2)
    raise(ErrorKind::ShapeMismatch, "mean_rows: " + a.shape().str());
  int64_t r = a.shape().dims[0], c = a.shape().dims[1];
  std::vector<double> out(static_cast<size_t>(c), 0.0);
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out[j] += a.data()[i * c + j];
  double inv = 1.0 / static_cast<double>(r);
  for (double& x : out) x *= inv;
  return make_op(Shape{c}, std::move(out), {a}, [r, c, inv](Node& n) {
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j)
        n.inputs[0]->grad[i * c + j] += n.grad[j] * inv;
  });
}

// --- gather / concat --------------------------------------------------------------

namespace {
// Rank-1 values are treated as a single row.
int64_t part_rows(const Value& v) { return v.shape().rank() <= 1 ? 1 : v.shape().dims[0]; }
int64_t part_cols(const Value& v) {
  return v.shape().rank() == 0 ? 1
                               : (v.shape().rank() == 1 ? v.shape().dims[0]
                                                        : v.shape().dims[1]);
}
}  // namespace

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) raise(ErrorKind::ShapeMismatch, "concat_rows: no parts");
  int64_t cols = part_cols(parts[0]);
  int64_t rows = 0;
  for (const Value& p : parts) {
    if (part_cols(p) != cols)
      raise(ErrorKind::ShapeMismatch, "concat_rows: column mismatch");
    rows += part_rows(p);
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(rows * cols));
  for (const Value& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_op(Shape{rows, cols}, std::move(out), parts, [cols](Node& n) {
    size_t off = 0;
    for (auto& in : n.inputs) {
      size_t len = in->data.size();
      if (in->requires_grad)
        for (size_t i = 0; i < len; ++i) in->grad[i] += n.grad[off + i];
      off += len;
    }
  });
}

Value concat_cols(const Value& a, const Value& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2 ||
      a.shape().dims[0] != b.shape().dims[0])
    raise(ErrorKind::ShapeMismatch,
          "concat_cols: " + a.shape().str() + " vs " + b.shape().str());
  int64_t r = a.shape().dims[0], p = a.shape().dims[1], q = b.shape().dims[1];
  std::vector<double> out(static_cast<size_t>(r * (p + q)));
  for (int64_t i = 0; i < r; ++i) {
    std::copy_n(a.data().data() + i * p, p, out.data() + i * (p + q));
    std::copy_n(b.data().data() + i * q, q, out.data() + i * (p + q) + p);
  }
  return make_op(Shape{r, p + q}, std::move(out), {a, b}, [r, p, q](Node& n) {
    for (int64_t i = 0; i < r; ++i) {
      if (n.inputs[0]->requires_grad)
        for (int64_t j = 0; j < p; ++j)
          n.inputs[0]->grad[i * p + j] += n.grad[i * (p + q) + j];
      if (n.inputs[1]->requires_grad)
        for (int64_t j = 0; j < q; ++j)
          n.inputs[1]->grad[i * q + j] += n.grad[i * (p + q) + p + j];
    }
  });
}

Value slice_rows(const Value& a, int64_t start, int64_t len) {
  if (a.shape().rank() != 2 || start < 0 || len < 0 ||
      start + len > a.shape().dims[0])
    raise(ErrorKind::ShapeMismatch, "slice_rows: bad range");
  int64_t c = a.shape().dims[1];
  std::vector<double> out(a.data().begin() + start * c,
                          a.data().begin() + (start + len) * c);
  return make_op(Shape{len, c}, std::move(out), {a}, [start, c](Node& n) {
    for (size_t i = 0; i < n.grad.size(); ++i)
      n.inputs[0]->grad[static_cast<size_t>(start * c) + i] += n.grad[i];
  });
}

Value select_row(const Value& a, int64_t row) {
  if (a.shape().rank() != 2 || row < 0 || row >= a.shape().dims[0])
    raise(ErrorKind::ShapeMismatch, "select_row: bad row");
  int64_t c = a.shape().dims[1];
  std::vector<double> out(a.data().begin() + row * c, a.data().begin() + (row + 1) * c);
  return make_op(Shape{c}, std::move(out), {a}, [row, c](Node& n) {
    for (int64_t j = 0; j < c; ++j)
      n.inputs[0]->grad[row * c + j] += n.grad[j];
  });
}

Value embedding_lookup(const Value& table, const std::vector<int>& ids) {
  if (table.shape().rank() != 2)
    raise(ErrorKind::ShapeMismatch, "embedding_lookup: table not 2-D");
  int64_t v = table.shape().dims[0], d = table.shape().dims[1];
  for (int id : ids)
    if (id < 0 || id >= v)
      raise(ErrorKind::ShapeMismatch, "embedding_lookup: id out of range");
  std::vector<double> out(ids.size() * static_cast<size_t>(d));
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy_n(table.data().data() + static_cast<int64_t>(ids[i]) * d, d,
                out.data() + i * static_cast<size_t>(d));
  return make_op(Shape{static_cast<int64_t>(ids.size()), d}, std::move(out), {table},
                 [ids, d](Node& n) {
                   for (size_t i = 0; i < ids.size(); ++i)
                     for (int64_t j = 0; j < d; ++j)
                       n.inputs[0]->grad[static_cast<int64_t>(ids[i]) * d + j] +=
                           n.grad[i * static_cast<size_t>(d) + j];
                 });
}

Value gather1d(const Value& v, const std::vector<int64_t>& idx) {
  if (v.shape().rank() != 1) raise(ErrorKind::ShapeMismatch, "gather1d: not 1-D");
  std::vector<double> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= v.shape().dims[0])
      raise(ErrorKind::ShapeMismatch, "gather1d: index out of range");
    out[i] = v.data()[idx[i]];
  }
  return make_op(Shape{static_cast<int64_t>(idx.size())}, std::move(out), {v},
                 [idx](Node& n) {
                   for (size_t i = 0; i < idx.size(); ++i)
                     n.inputs[0]->grad[idx[i]] += n.grad[i];
                 });
}

Value gather_per_row(const Value& m, const std::vector<int64_t>& cols) {
  if (m.shape().rank() != 2 ||
      static_cast<int64_t>(cols.size()) != m.shape().dims[0])
    raise(ErrorKind::ShapeMismatch, "gather_per_row: bad arguments");
  int64_t c = m.shape().dims[1];
  std::vector<double> out(cols.size());
  for (size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] < 0 || cols[i] >= c)
      raise(ErrorKind::ShapeMismatch, "gather_per_row: column out of range");
    out[i] = m.data()[static_cast<int64_t>(i) * c + cols[i]];
  }
  return make_op(Shape{static_cast<int64_t>(cols.size())}, std::move(out), {m},
                 [cols, c](Node& n) {
                   for (size_t i = 0; i < cols.size(); ++i)
                     n.inputs[0]->grad[static_cast<int64_t>(i) * c + cols[i]] += n.grad[i];
                 });
}

Value segment_sum_rows(const Value& x, const std::vector<std::vector<int64_t>>& groups) {
  if (x.shape().rank() != 2) raise(ErrorKind::ShapeMismatch, "segment_sum_rows: not 2-D");
  int64_t rows = x.shape().dims[0], d = x.shape().dims[1];
  std::vector<double> out(groups.size() * static_cast<size_t>(d), 0.0);
  for (size_t i = 0; i < groups.size(); ++i)
    for (int64_t j : groups[i]) {
      if (j < 0 || j >= rows)
        raise(ErrorKind::ShapeMismatch, "segment_sum_rows: row out of range");
      for (int64_t t = 0; t < d; ++t)
        out[i * static_cast<size_t>(d) + t] += x.data()[j * d + t];
    }
  return make_op(Shape{static_cast<int64_t>(groups.size()), d}, std::move(out), {x},
                 [groups, d](Node& n) {
                   for (size_t i = 0; i < groups.size(); ++i)
                     for (int64_t j : groups[i])
                       for (int64_t t = 0; t < d; ++t)
                         n.inputs[0]->grad[j * d + t] +=
                             n.grad[i * static_cast<size_t>(d) + t];
                 });
}

// --- softmax / normalization -------------------------------------------------------

namespace {
// Shared softmax body over [row_begin, row_end) of each row.
void softmax_rows(const std::vector<double>& in, std::vector<double>& out, int64_t rows,
                  int64_t cols, const std::function<int64_t(int64_t)>& row_limit) {
  for (int64_t i = 0; i < rows; ++i) {
    int64_t lim = row_limit(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < lim; ++j) mx = std::max(mx, in[i * cols + j]);
    double denom = 0.0;
    for (int64_t j = 0; j < lim; ++j) {
      double e = std::exp(in[i * cols + j] - mx);
      out[i * cols + j] = e;
      denom += e;
    }
    for (int64_t j = 0; j < lim; ++j) out[i * cols + j] /= denom;
    for (int64_t j = lim; j < cols; ++j) out[i * cols + j] = 0.0;
  }
}

std::function<void(Node&)> softmax_backward(int64_t rows, int64_t cols,
                                            std::function<int64_t(int64_t)> row_limit) {
  return [rows, cols, row_limit = std::move(row_limit)](Node& n) {
    // ds_j = y_j * (g_j - sum_k g_k y_k) over the allowed prefix
    for (int64_t i = 0; i < rows; ++i) {
      int64_t lim = row_limit(i);
      double dot = 0.0;
      for (int64_t j = 0; j < lim; ++j)
        dot += n.grad[i * cols + j] * n.data[i * cols + j];
      for (int64_t j = 0; j < lim; ++j)
        n.inputs[0]->grad[i * cols + j] +=
            n.data[i * cols + j] * (n.grad[i * cols + j] - dot);
    }
  };
}
}  // namespace

Value row_softmax(const Value& a) {
  if (a.shape().rank() != 2)
    raise(ErrorKind::ShapeMismatch, "row_softmax: " + a.shape().str());
  int64_t r = a.shape().dims[0], c = a.shape().dims[1];
  std::vector<double> out(a.data().size());
  auto full = [c](int64_t) { return c; };
  softmax_rows(a.data(), out, r, c, full);
  return make_op(a.shape(), std::move(out), {a}, softmax_backward(r, c, full));
}

Value causal_row_softmax(const Value& a) {
  if (a.shape().rank() != 2 || a.shape().dims[0] != a.shape().dims[1])
    raise(ErrorKind::ShapeMismatch, "causal_row_softmax: " + a.shape().str());
  int64_t n = a.shape().dims[0];
  std::vector<double> out(a.data().size());
  auto causal = [](int64_t i) { return i + 1; };
  softmax_rows(a.data(), out, n, n, causal);
  return make_op(a.shape(), std::move(out), {a}, softmax_backward(n, n, causal));
}

Value layer_norm(const Value& x, const Value& gain, const Value& bias, double eps) {
  if (x.shape().rank() != 2 || gain.shape().rank() != 1 || bias.shape().rank() != 1 ||
      gain.shape().dims[0] != x.shape().dims[1] ||
      bias.shape().dims[0] != x.shape().dims[1])
    raise(ErrorKind::ShapeMismatch, "layer_norm: incompatible shapes");
  int64_t r = x.shape().dims[0], c = x.shape().dims[1];
  std::vector<double> out(x.data().size());
  std::vector<double> xhat(x.data().size());
  std::vector<double> inv_std(static_cast<size_t>(r));
  for (int64_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (int64_t j = 0; j < c; ++j) mean += x.data()[i * c + j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      double d = x.data()[i * c + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    double inv = 1.0 / std::sqrt(var + eps);
    inv_std[i] = inv;
    for (int64_t j = 0; j < c; ++j) {
      double h = (x.data()[i * c + j] - mean) * inv;
      xhat[i * c + j] = h;
      out[i * c + j] = gain.data()[j] * h + bias.data()[j];
    }
  }
  return make_op(
      x.shape(), std::move(out), {x, gain, bias},
      [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
        Node& nx = *n.inputs[0];
        Node& ng = *n.inputs[1];
        Node& nb = *n.inputs[2];
        for (int64_t i = 0; i < r; ++i) {
          double mean_dy = 0.0, mean_dy_xhat = 0.0;
          for (int64_t j = 0; j < c; ++j) {
            double dy = n.grad[i * c + j] * ng.data[j];
            mean_dy += dy;
            mean_dy_xhat += dy * xhat[i * c + j];
          }
          mean_dy /= static_cast<double>(c);
          mean_dy_xhat /= static_cast<double>(c);
          for (int64_t j = 0; j < c; ++j) {
            double dy = n.grad[i * c + j] * ng.data[j];
            if (nx.requires_grad)
              nx.grad[i * c + j] +=
                  inv_std[i] * (dy - mean_dy - xhat[i * c + j] * mean_dy_xhat);
            if (ng.requires_grad)
              ng.grad[j] += n.grad[i * c + j] * xhat[i * c + j];
            if (nb.requires_grad) nb.grad[j] += n.grad[i * c + j];
          }
        }
      });
}

// --- backward -----------------------------------------------------------------------

void backward(const Value& loss) {
  if (!loss.defined() || !loss.shape().is_scalar())
    raise(ErrorKind::NonScalarLoss, "backward needs a scalar loss");
  if (!std::isfinite(loss.scalar()))
    raise(ErrorKind::NonFiniteLoss, "loss is not finite");

  // Iterative post-order DFS; children visited in construction order so the
  // reverse sweep (and therefore accumulation order) is fixed.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    size_t next_child;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_child < f.node->inputs.size()) {
      Node* child = f.node->inputs[f.next_child++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  for (Node* n : topo) {
    size_t numel = static_cast<size_t>(n->shape.numel());
    if (n->is_param) {
      if (n->grad.size() != numel) n->grad.assign(numel, 0.0);
    } else {
      n->grad.assign(numel, 0.0);
    }
  }
  loss.node()->grad[0] = 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
  }
}

}  // namespace relgp
