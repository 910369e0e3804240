#pragma once

// Reverse-mode differentiable numeric core. 64-bit floats throughout;
// verifiability over speed. Graphs are built per forward pass from shared
// parameter leaves, and backward accumulates in a fixed reverse-topological
// order so gradients are bitwise reproducible.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "relgp/common.hpp"

namespace relgp {

struct Shape {
  std::vector<int64_t> dims;

  Shape() = default;
  Shape(std::initializer_list<int64_t> d) : dims(d) {}
  explicit Shape(std::vector<int64_t> d) : dims(std::move(d)) {}

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
  }
  size_t rank() const { return dims.size(); }
  bool is_scalar() const { return numel() == 1; }
  int64_t rows() const { return dims.empty() ? 1 : dims[0]; }
  int64_t cols() const { return dims.size() < 2 ? (dims.empty() ? 1 : dims[0]) : dims[1]; }
  bool operator==(const Shape& o) const { return dims == o.dims; }
  std::string str() const;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized during backward; param grads persist across calls
  bool requires_grad = false;
  bool is_param = false;
  std::string name;  // set for parameter leaves
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;

  double scalar() const { return data[0]; }
};

// Cheap handle over the underlying node.
class Value {
 public:
  Value() = default;
  explicit Value(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& mutable_data() { return node_->data; }
  const std::vector<double>& grad() const { return node_->grad; }
  double scalar() const { return node_->data[0]; }
  int64_t numel() const { return node_->shape.numel(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }
  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// --- constructors ----------------------------------------------------------

Value constant(Shape shape, std::vector<double> data);
Value constant_scalar(double v);
Value zeros(Shape shape);
Value make_param(const std::string& name, Shape shape, std::vector<double> data,
                 bool frozen);

// --- elementwise and structural ops ----------------------------------------

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value add_rowvec(const Value& m, const Value& v);  // [n,d] + [d]
Value scale(const Value& a, double c);
Value add_const(const Value& a, double c);
Value sub_from_const(double c, const Value& a);  // c - a
Value relu(const Value& a);
Value vlog(const Value& a);
Value vabs(const Value& a);
Value pow_const(const Value& a, double p);  // requires a > 0 when p non-integral
Value reshape(const Value& a, Shape shape);
Value transpose(const Value& a);  // 2-D

// Elementwise product with a constant mask; used for inverted dropout.
Value mul_mask(const Value& a, std::vector<double> mask);

// --- matrix ops -------------------------------------------------------------

Value matmul(const Value& a, const Value& b);  // [m,k] x [k,n]

// --- reductions --------------------------------------------------------------

Value sum_all(const Value& a);
Value mean_all(const Value& a);
Value mean_rows(const Value& a);  // [n,d] -> [d], column means

// --- gather / concat ----------------------------------------------------------

// Rows of `parts` stacked top to bottom. Rank-1 entries count as single rows.
Value concat_rows(const std::vector<Value>& parts);
Value concat_cols(const Value& a, const Value& b);  // [n,p] ++ [n,q] -> [n,p+q]
Value slice_rows(const Value& a, int64_t start, int64_t len);
Value select_row(const Value& a, int64_t row);  // [n,d] -> [d]
Value embedding_lookup(const Value& table, const std::vector<int>& ids);  // -> [n,d]
Value gather1d(const Value& v, const std::vector<int64_t>& idx);          // [k]
Value gather_per_row(const Value& m, const std::vector<int64_t>& cols);   // [n]

// For each output row i, sums the input rows listed in groups[i].
Value segment_sum_rows(const Value& x, const std::vector<std::vector<int64_t>>& groups);

// --- softmax / normalization ---------------------------------------------------

Value row_softmax(const Value& a);         // [n,d], softmax per row
Value causal_row_softmax(const Value& a);  // [n,n], row i normalized over cols 0..i
Value layer_norm(const Value& x, const Value& gain, const Value& bias,
                 double eps = 1e-5);  // row-wise over last dim

// --- autodiff -------------------------------------------------------------------

// Reverse accumulation from a finite scalar loss. Gradients of parameter
// leaves accumulate across calls until cleared by the owning store.
void backward(const Value& loss);

}  // namespace relgp
