#include "resopf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/Dense>

#include "resopf/errors.hpp"

namespace resopf::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

CMap view(const Tensor& t) {
  return CMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
}
MMap view(Tensor& t) {
  return MMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ContractViolation(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                          shape_string(b));
}

void same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows || a.cols != b.cols) shape_error(op, a, b);
}

void check_segments(const char* op, const Tensor& a, std::span<const std::size_t> seg,
                    std::size_t n) {
  if (seg.size() != a.rows)
    throw ContractViolation(std::string(op) + ": " + std::to_string(seg.size()) +
                            " segment ids for shape " + shape_string(a));
  for (auto s : seg)
    if (s >= n) throw ContractViolation(std::string(op) + ": segment id out of range");
}

bool needs(Tape& t, Var v) { return t.requires_grad(v); }

template <class F>
Var unary(Var a, F&& value_fn, std::function<double(double x, double y)> deriv) {
  Tape& t = *a.tape;
  Tensor out = t.value(a);
  for (auto& x : out.data) x = value_fn(x);
  return t.record(std::move(out), {a}, [a, deriv](Tape& tp, std::size_t self) {
    if (!needs(tp, a)) return;
    const auto& g = tp.grad_ref(self);
    const auto& y = tp.value(Var{&tp, self});
    const auto& x = tp.value(a);
    auto& ga = tp.grad_ref(a.id);
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * deriv(x.data[i], y.data[i]);
  });
}

}  // namespace

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c)
    throw ContractViolation("tensor data length " + std::to_string(data.size()) + " does not match " +
                            std::to_string(r) + "x" + std::to_string(c));
}

std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows) + "x" + std::to_string(t.cols) + "]";
}

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, requires_grad, {}});
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::grad(Var v) const {
  const auto& n = nodes_[v.id];
  if (n.grad.data.size() != n.value.data.size()) {
    // Never touched by backward: report zeros of the right shape.
    nodes_[v.id].grad = Tensor(n.value.rows, n.value.cols);
  }
  return nodes_[v.id].grad;
}

Tensor& Tape::grad_ref(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.data.size() != n.value.data.size()) n.grad = Tensor(n.value.rows, n.value.cols);
  return n.grad;
}

Var Tape::record(Tensor value, std::vector<Var> parents,
                 std::function<void(Tape&, std::size_t)> back) {
  bool rg = false;
  for (const auto& p : parents) {
    if (p.tape != this) throw ContractViolation("operands recorded on different tapes");
    rg = rg || nodes_[p.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, rg, rg ? std::move(back) : nullptr});
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var out) {
  if (out.tape != this) throw ContractViolation("backward on a foreign variable");
  const auto& v = nodes_[out.id].value;
  if (v.rows != 1 || v.cols != 1)
    throw ContractViolation("backward needs a 1x1 output, got " + shape_string(v));
  for (auto& n : nodes_) n.grad = Tensor(n.value.rows, n.value.cols);
  nodes_[out.id].grad.data[0] = 1.0;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back(*this, i);
  }
}

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.cols != bv.rows) shape_error("matmul", av, bv);
  Tensor out(av.rows, bv.cols);
  view(out).noalias() = view(av) * view(bv);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (needs(tp, a)) view(tp.grad_ref(a.id)).noalias() += g * view(tp.value(b)).transpose();
    if (needs(tp, b)) view(tp.grad_ref(b.id)).noalias() += view(tp.value(a)).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  same_shape("add", t.value(a), t.value(b));
  Tensor out(t.value(a).rows, t.value(a).cols);
  view(out) = view(t.value(a)) + view(t.value(b));
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (needs(tp, a)) view(tp.grad_ref(a.id)) += g;
    if (needs(tp, b)) view(tp.grad_ref(b.id)) += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  same_shape("sub", t.value(a), t.value(b));
  Tensor out(t.value(a).rows, t.value(a).cols);
  view(out) = view(t.value(a)) - view(t.value(b));
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (needs(tp, a)) view(tp.grad_ref(a.id)) += g;
    if (needs(tp, b)) view(tp.grad_ref(b.id)) -= g;
  });
}

Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  same_shape("mul", t.value(a), t.value(b));
  Tensor out(t.value(a).rows, t.value(a).cols);
  view(out) = view(t.value(a)).cwiseProduct(view(t.value(b)));
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (needs(tp, a)) view(tp.grad_ref(a.id)) += g.cwiseProduct(view(tp.value(b)));
    if (needs(tp, b)) view(tp.grad_ref(b.id)) += g.cwiseProduct(view(tp.value(a)));
  });
}

Var add_row(Var a, Var row) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  const auto& rv = t.value(row);
  if (rv.rows != 1 || rv.cols != av.cols) shape_error("add_row", av, rv);
  Tensor out(av.rows, av.cols);
  view(out) = view(av).rowwise() + view(rv).row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (needs(tp, a)) view(tp.grad_ref(a.id)) += g;
    if (needs(tp, row)) view(tp.grad_ref(row.id)) += g.colwise().sum();
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  Tensor out(t.value(a).rows, t.value(a).cols);
  view(out) = s * view(t.value(a));
  return t.record(std::move(out), {a}, [a, s](Tape& tp, std::size_t self) {
    if (needs(tp, a)) view(tp.grad_ref(a.id)) += s * view(tp.grad_ref(self));
  });
}

Var add_scalar(Var a, double s) {
  Tape& t = *a.tape;
  Tensor out = t.value(a);
  for (auto& x : out.data) x += s;
  return t.record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
    if (needs(tp, a)) view(tp.grad_ref(a.id)) += view(tp.grad_ref(self));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat_cols: no operands");
  Tape& t = *parts[0].tape;
  const auto rows = t.value(parts[0]).rows;
  std::size_t cols = 0;
  for (auto p : parts) {
    if (t.value(p).rows != rows) shape_error("concat_cols", t.value(parts[0]), t.value(p));
    cols += t.value(p).cols;
  }
  Tensor out(rows, cols);
  std::size_t c0 = 0;
  for (auto p : parts) {
    const auto& v = t.value(p);
    view(out).middleCols(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(v.cols)) = view(v);
    c0 += v.cols;
  }
  return t.record(std::move(out), parts, [parts](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    std::size_t c = 0;
    for (auto p : parts) {
      const auto w = static_cast<Eigen::Index>(tp.value(p).cols);
      if (needs(tp, p)) view(tp.grad_ref(p.id)) += g.middleCols(static_cast<Eigen::Index>(c), w);
      c += tp.value(p).cols;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat_rows: no operands");
  Tape& t = *parts[0].tape;
  const auto cols = t.value(parts[0]).cols;
  std::size_t rows = 0;
  for (auto p : parts) {
    if (t.value(p).cols != cols) shape_error("concat_rows", t.value(parts[0]), t.value(p));
    rows += t.value(p).rows;
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (auto p : parts) {
    const auto& v = t.value(p);
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += v.data.size();
  }
  return t.record(std::move(out), parts, [parts](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_ref(self);
    std::size_t o = 0;
    for (auto p : parts) {
      const auto n = tp.value(p).data.size();
      if (needs(tp, p)) {
        auto& gp = tp.grad_ref(p.id);
        for (std::size_t i = 0; i < n; ++i) gp.data[i] += g.data[o + i];
      }
      o += n;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  if (begin + count > av.cols)
    throw ContractViolation("slice_cols: columns [" + std::to_string(begin) + ", " +
                            std::to_string(begin + count) + ") outside " + shape_string(av));
  Tensor out(av.rows, count);
  view(out) = view(av).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  return t.record(std::move(out), {a}, [a, begin, count](Tape& tp, std::size_t self) {
    if (!needs(tp, a)) return;
    view(tp.grad_ref(a.id)).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) +=
        view(tp.grad_ref(self));
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  if (begin + count > av.rows)
    throw ContractViolation("slice_rows: rows [" + std::to_string(begin) + ", " +
                            std::to_string(begin + count) + ") outside " + shape_string(av));
  Tensor out(count, av.cols);
  std::copy_n(av.data.begin() + static_cast<std::ptrdiff_t>(begin * av.cols), count * av.cols,
              out.data.begin());
  return t.record(std::move(out), {a}, [a, begin](Tape& tp, std::size_t self) {
    if (!needs(tp, a)) return;
    const auto& g = tp.grad_ref(self);
    auto& ga = tp.grad_ref(a.id);
    const auto off = begin * tp.value(a).cols;
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[off + i] += g.data[i];
  });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  for (auto i : index)
    if (i >= av.rows)
      throw ContractViolation("gather_rows: row " + std::to_string(i) + " outside " + shape_string(av));
  auto idx = std::make_shared<std::vector<std::size_t>>(index.begin(), index.end());
  Tensor out(idx->size(), av.cols);
  for (std::size_t k = 0; k < idx->size(); ++k)
    std::copy_n(av.data.begin() + static_cast<std::ptrdiff_t>((*idx)[k] * av.cols), av.cols,
                out.data.begin() + static_cast<std::ptrdiff_t>(k * av.cols));
  return t.record(std::move(out), {a}, [a, idx](Tape& tp, std::size_t self) {
    if (!needs(tp, a)) return;
    const auto& g = tp.grad_ref(self);
    auto& ga = tp.grad_ref(a.id);
    const auto c = g.cols;
    for (std::size_t k = 0; k < idx->size(); ++k)
      for (std::size_t j = 0; j < c; ++j) ga.data[(*idx)[k] * c + j] += g.data[k * c + j];
  });
}

Var segment_sum(Var a, std::span<const std::size_t> segment, std::size_t num_segments) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  check_segments("segment_sum", av, segment, num_segments);
  auto seg = std::make_shared<std::vector<std::size_t>>(segment.begin(), segment.end());
  Tensor out(num_segments, av.cols);
  const auto c = av.cols;
  for (std::size_t k = 0; k < seg->size(); ++k)
    for (std::size_t j = 0; j < c; ++j) out.data[(*seg)[k] * c + j] += av.data[k * c + j];
  return t.record(std::move(out), {a}, [a, seg](Tape& tp, std::size_t self) {
    if (!needs(tp, a)) return;
    const auto& g = tp.grad_ref(self);
    auto& ga = tp.grad_ref(a.id);
    const auto cc = g.cols;
    for (std::size_t k = 0; k < seg->size(); ++k)
      for (std::size_t j = 0; j < cc; ++j) ga.data[k * cc + j] += g.data[(*seg)[k] * cc + j];
  });
}

Var mean_over_segments(Var a, std::span<const std::size_t> segment, std::size_t num_segments) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  check_segments("mean_over_segments", av, segment, num_segments);
  auto seg = std::make_shared<std::vector<std::size_t>>(segment.begin(), segment.end());
  auto count = std::make_shared<std::vector<double>>(num_segments, 0.0);
  for (auto s : *seg) (*count)[s] += 1.0;
  Tensor out(num_segments, av.cols);
  const auto c = av.cols;
  for (std::size_t k = 0; k < seg->size(); ++k)
    for (std::size_t j = 0; j < c; ++j) out.data[(*seg)[k] * c + j] += av.data[k * c + j];
  for (std::size_t s = 0; s < num_segments; ++s)
    if ((*count)[s] > 0.0)
      for (std::size_t j = 0; j < c; ++j) out.data[s * c + j] /= (*count)[s];
  return t.record(std::move(out), {a}, [a, seg, count](Tape& tp, std::size_t self) {
    if (!needs(tp, a)) return;
    const auto& g = tp.grad_ref(self);
    auto& ga = tp.grad_ref(a.id);
    const auto cc = g.cols;
    for (std::size_t k = 0; k < seg->size(); ++k) {
      const auto s = (*seg)[k];
      for (std::size_t j = 0; j < cc; ++j) ga.data[k * cc + j] += g.data[s * cc + j] / (*count)[s];
    }
  });
}

Var softmax_over_segments(Var logits, std::span<const std::size_t> segment, std::size_t num_segments) {
  Tape& t = *logits.tape;
  const auto& lv = t.value(logits);
  if (lv.cols != 1)
    throw ContractViolation("softmax_over_segments: expected a column, got " + shape_string(lv));
  check_segments("softmax_over_segments", lv, segment, num_segments);
  auto seg = std::make_shared<std::vector<std::size_t>>(segment.begin(), segment.end());
  std::vector<double> mx(num_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < seg->size(); ++k) mx[(*seg)[k]] = std::max(mx[(*seg)[k]], lv.data[k]);
  Tensor out(lv.rows, 1);
  std::vector<double> denom(num_segments, 0.0);
  for (std::size_t k = 0; k < seg->size(); ++k) {
    out.data[k] = std::exp(lv.data[k] - mx[(*seg)[k]]);
    denom[(*seg)[k]] += out.data[k];
  }
  for (std::size_t k = 0; k < seg->size(); ++k) out.data[k] /= denom[(*seg)[k]];
  return t.record(std::move(out), {logits}, [logits, seg, num_segments](Tape& tp, std::size_t self) {
    if (!needs(tp, logits)) return;
    const auto& g = tp.grad_ref(self);
    const auto& y = tp.value(Var{&tp, self});
    std::vector<double> dot(num_segments, 0.0);
    for (std::size_t k = 0; k < seg->size(); ++k) dot[(*seg)[k]] += y.data[k] * g.data[k];
    auto& gl = tp.grad_ref(logits.id);
    for (std::size_t k = 0; k < seg->size(); ++k) gl.data[k] += y.data[k] * (g.data[k] - dot[(*seg)[k]]);
  });
}

Var mul_rows(Var a, Var s) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  const auto& sv = t.value(s);
  if (sv.cols != 1 || sv.rows != av.rows) shape_error("mul_rows", av, sv);
  Tensor out(av.rows, av.cols);
  view(out) = view(av).array().colwise() * view(sv).col(0).array();
  return t.record(std::move(out), {a, s}, [a, s](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (needs(tp, a))
      view(tp.grad_ref(a.id)).array() += g.array().colwise() * view(tp.value(s)).col(0).array();
    if (needs(tp, s))
      view(tp.grad_ref(s.id)).col(0) += g.cwiseProduct(view(tp.value(a))).rowwise().sum();
  });
}

Var layer_norm(Var a, Var gain, Var bias) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  const auto& gv = t.value(gain);
  const auto& bv = t.value(bias);
  if (gv.rows != 1 || gv.cols != av.cols) shape_error("layer_norm", av, gv);
  if (bv.rows != 1 || bv.cols != av.cols) shape_error("layer_norm", av, bv);
  const auto n = av.cols;
  auto xhat = std::make_shared<Tensor>(av.rows, n);
  auto inv_sigma = std::make_shared<std::vector<double>>(av.rows);
  Tensor out(av.rows, n);
  for (std::size_t r = 0; r < av.rows; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += av(r, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (av(r, j) - mean) * (av(r, j) - mean);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + layer_norm_eps);
    (*inv_sigma)[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      (*xhat)(r, j) = (av(r, j) - mean) * is;
      out(r, j) = gv.data[j] * (*xhat)(r, j) + bv.data[j];
    }
  }
  return t.record(std::move(out), {a, gain, bias},
                  [a, gain, bias, xhat, inv_sigma](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad_ref(self);
                    const auto rows = g.rows;
                    const auto cols = g.cols;
                    if (needs(tp, gain)) {
                      auto& gg = tp.grad_ref(gain.id);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < cols; ++j) gg.data[j] += g(r, j) * (*xhat)(r, j);
                    }
                    if (needs(tp, bias)) {
                      auto& gb = tp.grad_ref(bias.id);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < cols; ++j) gb.data[j] += g(r, j);
                    }
                    if (needs(tp, a)) {
                      const auto& gv2 = tp.value(gain);
                      auto& ga = tp.grad_ref(a.id);
                      const double inv_n = 1.0 / static_cast<double>(cols);
                      for (std::size_t r = 0; r < rows; ++r) {
                        double m1 = 0.0, m2 = 0.0;
                        for (std::size_t j = 0; j < cols; ++j) {
                          const double d = g(r, j) * gv2.data[j];
                          m1 += d;
                          m2 += d * (*xhat)(r, j);
                        }
                        m1 *= inv_n;
                        m2 *= inv_n;
                        for (std::size_t j = 0; j < cols; ++j) {
                          const double d = g(r, j) * gv2.data[j];
                          ga(r, j) += (*inv_sigma)[r] * (d - m1 - (*xhat)(r, j) * m2);
                        }
                      }
                    }
                  });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var hinge(Var a) { return relu(a); }

Var sin(Var a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos(Var a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (double x : t.value(a).data) s += x;
  return t.record(Tensor(1, 1, s), {a}, [a](Tape& tp, std::size_t self) {
    if (!needs(tp, a)) return;
    const double g = tp.grad_ref(self).data[0];
    for (auto& x : tp.grad_ref(a.id).data) x += g;
  });
}

Var row_sum(Var a) {
  Tape& t = *a.tape;
  const auto& av = t.value(a);
  Tensor out(av.rows, 1);
  view(out).col(0) = view(av).rowwise().sum();
  return t.record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
    if (!needs(tp, a)) return;
    view(tp.grad_ref(a.id)).colwise() += view(tp.grad_ref(self)).col(0);
  });
}

GradCheck grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps, double floor) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.leaf(x));
    const Var out = f(tape, vars);
    tape.backward(out);
    for (auto v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.leaf(x, false));
    return tape.value(f(tape, vars)).data.at(0);
  };
  GradCheck res;
  auto xs = inputs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t k = 0; k < xs[i].data.size(); ++k) {
      const double x0 = xs[i].data[k];
      xs[i].data[k] = x0 + eps;
      const double fp = eval(xs);
      xs[i].data[k] = x0 - eps;
      const double fm = eval(xs);
      xs[i].data[k] = x0;
      const double num = (fp - fm) / (2.0 * eps);
      const double an = analytic[i].data[k];
      const double err = std::abs(an - num) / std::max({std::abs(an), std::abs(num), floor});
      if (err > res.max_rel_error || !std::isfinite(err)) {
        res.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        res.worst_input = i;
        res.worst_index = k;
      }
    }
  }
  return res;
}

GradCheck grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps, double floor) {
  return grad_check([&f](Tape& t, const std::vector<Var>& v) { return f(t, v[0]); },
                    std::vector<Tensor>{x}, eps, floor);
}

}  // namespace resopf::ad
