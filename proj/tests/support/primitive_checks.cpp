#include "primitive_checks.hpp"

#include <cmath>
#include <functional>

namespace oracle {

using namespace resopf::ad;

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, bool avoid_kinks) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  Tensor t(r, c);
  for (auto& x : t.data) {
    x = u(rng);
    if (avoid_kinks && std::abs(x) < 1e-2) x += x < 0 ? -0.1 : 0.1;
  }
  return t;
}

Var project(Tape& t, Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, t.constant(random_tensor(rng, y.rows(), y.cols()))));
}

namespace {

const std::vector<std::size_t> kSegments{0, 2, 0, 1, 2, 2, 0};

}  // namespace

std::vector<PrimitiveCheck> primitive_gradient_checks(int trials) {
  std::vector<PrimitiveCheck> out;
  auto check = [&](const char* name, const ScalarFn& f,
                   const std::function<std::vector<Tensor>(std::mt19937_64&)>& make) {
    std::mt19937_64 rng(1234);
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) worst = std::max(worst, grad_check(f, make(rng)).max_rel_error);
    out.push_back({name, worst});
  };

  auto one = [](std::size_t r, std::size_t c, bool kinks = false) {
    return [=](std::mt19937_64& rng) { return std::vector<Tensor>{random_tensor(rng, r, c, kinks)}; };
  };
  check("matmul", [](Tape& t, const std::vector<Var>& v) { return project(t, matmul(v[0], v[1]), 1); },
                  [](std::mt19937_64& rng) {
                    return std::vector<Tensor>{random_tensor(rng, 3, 4), random_tensor(rng, 4, 2)};
                  });
  auto pair = [](std::mt19937_64& rng) {
    return std::vector<Tensor>{random_tensor(rng, 3, 4), random_tensor(rng, 3, 4)};
  };
  check("add", [](Tape& t, const std::vector<Var>& v) { return project(t, add(v[0], v[1]), 2); }, pair);
  check("sub", [](Tape& t, const std::vector<Var>& v) { return project(t, sub(v[0], v[1]), 3); }, pair);
  check("mul", [](Tape& t, const std::vector<Var>& v) { return project(t, mul(v[0], v[1]), 4); }, pair);
  check("add_row", [](Tape& t, const std::vector<Var>& v) { return project(t, add_row(v[0], v[1]), 5); },
                  [](std::mt19937_64& rng) {
                    return std::vector<Tensor>{random_tensor(rng, 3, 4), random_tensor(rng, 1, 4)};
                  });
  check("scale", [](Tape& t, const std::vector<Var>& v) { return project(t, scale(v[0], -2.5), 6); },
                  one(3, 3));
  check("add_scalar",
                  [](Tape& t, const std::vector<Var>& v) { return project(t, add_scalar(v[0], 0.7), 7); }, one(3, 3));
  check("concat_cols",
                  [](Tape& t, const std::vector<Var>& v) { return project(t, concat_cols({v[0], v[1], v[0]}), 8); },
                  [](std::mt19937_64& rng) {
                    return std::vector<Tensor>{random_tensor(rng, 3, 2), random_tensor(rng, 3, 1)};
                  });
  check("concat_rows",
                  [](Tape& t, const std::vector<Var>& v) { return project(t, concat_rows({v[0], v[1]}), 9); },
                  [](std::mt19937_64& rng) {
                    return std::vector<Tensor>{random_tensor(rng, 2, 3), random_tensor(rng, 4, 3)};
                  });
  check("slice_cols",
                  [](Tape& t, const std::vector<Var>& v) { return project(t, slice_cols(v[0], 1, 2), 10); }, one(3, 4));
  check("slice_rows",
                  [](Tape& t, const std::vector<Var>& v) { return project(t, slice_rows(v[0], 1, 2), 11); }, one(4, 3));
  check("gather_rows",
                  [](Tape& t, const std::vector<Var>& v) {
                    const std::vector<std::size_t> idx{2, 0, 2, 1, 3};
                    return project(t, gather_rows(v[0], idx), 12);
                  },
                  one(4, 3));
  check("segment_sum",
                  [](Tape& t, const std::vector<Var>& v) { return project(t, segment_sum(v[0], kSegments, 4), 13); },
                  one(7, 2));
  check("mean_over_segments",
                  [](Tape& t, const std::vector<Var>& v) {
                    return project(t, mean_over_segments(v[0], kSegments, 4), 14);
                  },
                  one(7, 2));
  check("softmax_over_segments",
                  [](Tape& t, const std::vector<Var>& v) {
                    return project(t, softmax_over_segments(v[0], kSegments, 3), 15);
                  },
                  one(7, 1));
  check("mul_rows", [](Tape& t, const std::vector<Var>& v) { return project(t, mul_rows(v[0], v[1]), 16); },
                  [](std::mt19937_64& rng) {
                    return std::vector<Tensor>{random_tensor(rng, 4, 3), random_tensor(rng, 4, 1)};
                  });
  check("layer_norm",
                  [](Tape& t, const std::vector<Var>& v) { return project(t, layer_norm(v[0], v[1], v[2]), 17); },
                  [](std::mt19937_64& rng) {
                    return std::vector<Tensor>{random_tensor(rng, 3, 5), random_tensor(rng, 1, 5),
                                               random_tensor(rng, 1, 5)};
                  });
  check("relu", [](Tape& t, const std::vector<Var>& v) { return project(t, relu(v[0]), 18); },
                  one(3, 4, true));
  check("hinge", [](Tape& t, const std::vector<Var>& v) { return project(t, hinge(v[0]), 19); },
                  one(3, 4, true));
  check("sin", [](Tape& t, const std::vector<Var>& v) { return project(t, sin(v[0]), 20); }, one(3, 4));
  check("cos", [](Tape& t, const std::vector<Var>& v) { return project(t, cos(v[0]), 21); }, one(3, 4));
  check("square", [](Tape& t, const std::vector<Var>& v) { return project(t, square(v[0]), 22); },
                  one(3, 4));
  check("abs", [](Tape& t, const std::vector<Var>& v) { return project(t, abs(v[0]), 23); },
                  one(3, 4, true));
  check("sum", [](Tape&, const std::vector<Var>& v) { return sum(v[0]); }, one(3, 4));
  check("row_sum", [](Tape& t, const std::vector<Var>& v) { return project(t, row_sum(v[0]), 24); },
                  one(3, 4));
  return out;
}

}  // namespace oracle
