#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "core/common.hpp"

namespace meev::ad {

using Shape = std::vector<int>;

int shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

// Handle into a Tape node. Cheap to copy; invalid when default constructed.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}

  bool valid() const { return tape_ != nullptr; }
  int index() const { return index_; }
  Tape* tape() const { return tape_; }

  const Shape& shape() const;
  int numel() const;
  const std::vector<double>& value() const;
  // Gradient accumulated by the last backward(); zeros if none reached it.
  const std::vector<double>& grad() const;

 private:
  Tape* tape_ = nullptr;
  int index_ = -1;
};

// Reverse-mode tape. Nodes are appended in topological order; backward()
// walks them in reverse. One tape per forward/backward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----
  Var constant(Shape shape, std::vector<double> value);
  Var constant_scalar(double v) { return constant({1}, {v}); }
  Var zeros(Shape shape);
  Var leaf(Shape shape, std::vector<double> value);  // differentiable

  // ---- elementwise / reductions ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var neg(Var a) { return scale(a, -1.0); }
  Var relu(Var a);
  Var abs(Var a);
  Var sum(Var a);                 // -> [1]
  Var mean(Var a);                // -> [1]
  Var rowsum(Var a);              // [r, c] -> [r]
  Var softmax_rows(Var a);        // [r, c], softmax per row

  // ---- structure ----
  Var reshape(Var a, Shape shape);
  Var slice_axis0(Var a, int start, int count);
  Var slice_cols(Var a, int start, int count);  // 2-d only
  Var concat_axis0(const std::vector<Var>& xs);
  Var concat_cols(const std::vector<Var>& xs);  // 2-d only
  Var detach(Var a);

  // ---- linear algebra / network layers ----
  Var matmul(Var a, Var b);                           // [m,k]x[k,n]
  Var linear(Var x, Var w, Var b);                    // [n], [out,n], [out]
  Var conv2d(Var x, Var w, Var b, int stride, int pad);
  Var avgpool2x2(Var x);
  Var maxpool2x2(Var x);
  Var instance_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  // f [c,h,w], coords [j,2] as (x, y) grid units with cell centers at
  // integer + 0.5; border-clamped
  Var bilinear_sample(Var f, Var coords);
  Var scale_by(Var x, Var s);                         // s is [1]
  Var add_broadcast_row(Var x, Var t);                // [n,k] + [k]
  Var scale_rows(Var x, Var s);                       // rows of x times s[n]

  // ---- geometry ----
  Var sinc_theta(Var s);      // sin(sqrt s)/sqrt s, elementwise
  Var versine_ratio(Var s);   // (1 - cos(sqrt s))/s, elementwise
  Var row_outer(Var v);       // [n,3] -> [n,3,3]
  Var make_affine(Var rot, Var t);        // [n,3,3],[n,3] -> [n,4,4]
  Var apply_affine_rows(Var a, Var x);    // [n,16],[n,3] -> [n,3]
  // columns (a|b|a x b) from Gram-Schmidt of each 6-vector row; degenerate
  // rows produce identity, zero gradient, and a flag
  Var rot6d_to_matrix_rows(Var r, std::vector<std::uint8_t>* degenerate);
  Var axis_angle_to_matrix_rows(Var v);   // [n,3] -> [n,3,3]

  void backward(Var loss);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // lazily allocated
    bool requires_grad = false;
    std::function<void()> backprop;
  };

  std::vector<Node> nodes_;

  Var emit(Shape shape, std::vector<double> value, bool requires_grad,
           std::function<void()> backprop);
  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  std::vector<double>& grad_buf(int i);
  bool rg(Var v) const { return node(v.index()).requires_grad; }
  const std::vector<double>& val(Var v) const { return node(v.index()).value; }

  friend class Var;
};

}  // namespace meev::ad
