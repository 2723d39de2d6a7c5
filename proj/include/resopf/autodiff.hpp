#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace resopf::ad {

/// Dense rank-2 row-major tensor of doubles. Vectors are n x 1 or 1 x n.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values);

  std::array<std::size_t, 2> shape() const { return {rows, cols}; }
  std::size_t size() const { return data.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const Tensor&) const = default;
};

std::string shape_string(const Tensor& t);

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

/// Records primitive applications in creation order, which is a topological
/// order. backward() walks it in reverse once.
class Tape {
 public:
  Var constant(Tensor value);
  Var leaf(Tensor value, bool requires_grad = true);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient after backward(); zeros for nodes that did not participate.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Seed d(out)/d(out) = 1 for a 1 x 1 output and propagate.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }

  // Used by the primitives.
  Var record(Tensor value, std::vector<Var> parents, std::function<void(Tape&, std::size_t)> back);
  Tensor& grad_ref(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&, std::size_t)> back;
  };
  mutable std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (m x n) plus a 1 x n row broadcast to every row.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
/// out[k] = a[index[k]]
Var gather_rows(Var a, std::span<const std::size_t> index);
/// out[s] = sum of a[k] with segment[k] == s
Var segment_sum(Var a, std::span<const std::size_t> segment, std::size_t num_segments);
/// Row means per segment; empty segments give zero rows.
Var mean_over_segments(Var a, std::span<const std::size_t> segment, std::size_t num_segments);
/// Softmax of an m x 1 column within each segment (max-subtracted).
Var softmax_over_segments(Var logits, std::span<const std::size_t> segment, std::size_t num_segments);
/// Multiply row k of a by the scalar s[k] (s is m x 1).
Var mul_rows(Var a, Var s);
/// Row-wise normalization with eps = 1e-5 inside the square root, then gain and bias (1 x n).
Var layer_norm(Var a, Var gain, Var bias);
Var relu(Var a);
/// [a]_+ ; same values as relu, named for constraint penalties.
Var hinge(Var a);
Var sin(Var a);
Var cos(Var a);
Var square(Var a);
Var abs(Var a);
/// 1 x 1 sum of all entries.
Var sum(Var a);
/// m x 1 sums of each row.
Var row_sum(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

inline constexpr double layer_norm_eps = 1e-5;

/// Relative error |a - n| / max(|a|, |n|, floor) between analytic and
/// central-difference gradients, maximised over coordinates.
struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

GradCheck grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps = 1e-5,
                     double floor = 1e-3);
GradCheck grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps = 1e-5,
                     double floor = 1e-3);

}  // namespace resopf::ad
