#include <cmath>
#include <random>

#include "doctest.h"
#include "primitive_checks.hpp"
#include "resopf/autodiff.hpp"
#include "resopf/errors.hpp"

using namespace resopf;
using namespace resopf::ad;

using oracle::project;
using oracle::random_tensor;

TEST_CASE("every primitive matches central differences") {
  const auto checks = oracle::primitive_gradient_checks();
  CHECK(checks.size() == 25);
  for (const auto& c : checks) {
    INFO(c.name << " worst relative error " << c.worst_rel_error);
    CHECK(c.worst_rel_error < 1e-6);
  }
}

TEST_CASE("composite attention-style expression") {
  std::mt19937_64 rng(99);
  const std::vector<std::size_t> seg{0, 0, 1, 1, 1};
  const std::vector<std::size_t> src{1, 2, 0, 2, 1};
  const auto f = [&](Tape& t, const std::vector<Var>& v) {
    const Var h = v[0];
    const Var logits = row_sum(mul(gather_rows(h, seg), gather_rows(h, src)));
    const Var alpha = softmax_over_segments(logits, seg, 3);
    const Var m = segment_sum(mul_rows(gather_rows(h, src), alpha), seg, 3);
    const Var ln = layer_norm(add(h, relu(matmul(m, v[1]))), v[2], v[3]);
    return sum(square(ln));
  };
  const auto r = grad_check(f, {random_tensor(rng, 3, 4), random_tensor(rng, 4, 4, true),
                                random_tensor(rng, 1, 4), random_tensor(rng, 1, 4)});
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("documented values") {
  Tape t;
  const std::vector<std::size_t> seg{0, 0, 0};
  const auto sm = softmax_over_segments(t.constant(Tensor(3, 1)), seg, 1);
  for (double v : sm.value().data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto ln = layer_norm(t.constant(Tensor(1, 3, 1.0)), t.constant(Tensor(1, 3, 1.0)), t.constant(Tensor(1, 3)));
  for (double v : ln.value().data) CHECK(v == 0.0);

  Tape t2;
  const auto x = t2.leaf(Tensor(1, 1, 0.0));
  t2.backward(sin(x));
  CHECK(x.grad().data[0] == 1.0);
}

TEST_CASE("sum of squares is exact to roundoff") {
  std::mt19937_64 rng(5);
  const auto r = grad_check([](Tape&, Var x) { return sum(square(x)); }, random_tensor(rng, 4, 4));
  CHECK(r.max_rel_error < 1e-7);
}

TEST_CASE("dead relu region has zero gradient") {
  const auto r = grad_check([](Tape&, Var x) { return sum(relu(x)); }, Tensor(2, 2, -0.5));
  CHECK(r.max_rel_error == 0.0);
  Tape t;
  const auto x = t.leaf(Tensor(2, 2, -0.5));
  t.backward(sum(relu(x)));
  for (double g : x.grad().data) CHECK(g == 0.0);
}

TEST_CASE("segments: empty groups and linearity") {
  Tape t;
  const std::vector<std::size_t> seg{0, 0, 2};
  const auto a = t.leaf(Tensor(3, 2, {1, 2, 3, 4, 5, 6}));
  const auto m = mean_over_segments(a, seg, 3);
  CHECK(m.value() == Tensor(3, 2, {2, 3, 0, 0, 5, 6}));
  const auto s = segment_sum(a, seg, 3);
  CHECK(s.value() == Tensor(3, 2, {4, 6, 0, 0, 5, 6}));
  // Backward of a segment sum broadcasts the upstream gradient.
  const auto w = t.constant(Tensor(3, 2, {1, 10, 100, 1000, 7, 8}));
  t.backward(sum(mul(s, w)));
  CHECK(a.grad() == Tensor(3, 2, {1, 10, 1, 10, 7, 8}));
  // Softmax rows over each segment sum to one; empty segments are skipped.
  Tape t3;
  const auto p = softmax_over_segments(t3.constant(Tensor(3, 1, {5.0, -2.0, 700.0})), seg, 3);
  CHECK(p.value().data[0] + p.value().data[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.value().data[2] == 1.0);
}

TEST_CASE("non-participating leaves get zero gradients") {
  Tape t;
  const auto a = t.leaf(Tensor(2, 2, 1.0));
  const auto b = t.leaf(Tensor(2, 2, 3.0));
  t.backward(sum(a));
  CHECK(b.grad() == Tensor(2, 2));
  CHECK_FALSE(t.requires_grad(t.constant(Tensor(1, 1))));
}

TEST_CASE("shape errors name both shapes") {
  Tape t;
  const auto a = t.constant(Tensor(2, 3));
  const auto b = t.constant(Tensor(2, 3));
  try {
    matmul(a, b);
    FAIL("expected a contract violation");
  } catch (const ContractViolation& e) {
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, t.constant(Tensor(3, 2))), ContractViolation);
  CHECK_THROWS_AS(Tensor(2, 2, std::vector<double>{1.0}), ContractViolation);
  CHECK_THROWS_AS(t.backward(a), ContractViolation);
}

TEST_CASE("replay gives bit-identical gradients") {
  std::mt19937_64 rng(8);
  const auto x = random_tensor(rng, 5, 3);
  const auto w = random_tensor(rng, 3, 3);
  auto run = [&] {
    Tape t;
    const auto xv = t.leaf(x);
    const auto wv = t.leaf(w);
    t.backward(sum(square(layer_norm(matmul(xv, wv), t.constant(Tensor(1, 3, 1.0)), t.constant(Tensor(1, 3))))));
    return std::pair{xv.grad(), wv.grad()};
  };
  CHECK(run() == run());
}
