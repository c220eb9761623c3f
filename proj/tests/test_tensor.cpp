#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "support/oracles.hpp"
#include "support/reference_values.hpp"
#include "vcr/random.hpp"
#include "vcr/tensor.hpp"
#include "vcr/tensor_io.hpp"

using namespace vcr;
using vcr::test::max_abs;

TEST_CASE("tensor construction and indexing") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  t(1, 2) = 5.0;
  CHECK(t.values()[5] == 5.0);
  CHECK_THROWS_AS(Tensor(Shape{}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 1, 1, 1}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>(3)), ShapeError);
  CHECK_THROWS_AS(t.offset({0, 0, 0}), ShapeError);
}

TEST_CASE("permute") {
  SUBCASE("(2,3,4) with axes (1,0,2) gives (3,2,4)") {
    const Tensor t = test::wave({2, 3, 4}, 0.0);
    const Tensor p = permute(t, {1, 0, 2});
    CHECK(p.shape() == Shape{3, 2, 4});
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t w = 0; w < 4; ++w) CHECK(p(h, c, w) == t(c, h, w));
  }
  SUBCASE("identity is bit-identical") {
    const Tensor t = test::wave({3, 2, 5}, 1.0);
    CHECK(permute(t, {0, 1, 2}) == t);
  }
  SUBCASE("sigma (2,0,1) then (1,2,0) restores the input") {
    const Tensor t = Rng(5).uniform_tensor({3, 4, 5});
    const Tensor p = permute(t, {2, 0, 1});
    CHECK(p == test::naive_permute(t, {2, 0, 1}));
    CHECK(permute(p, {1, 2, 0}) == t);
    const std::array<std::size_t, 3> sigma{2, 0, 1};
    CHECK(inverse_permutation(sigma) == std::vector<std::size_t>{1, 2, 0});
  }
  SUBCASE("invalid axes") {
    const Tensor t({2, 2, 2});
    CHECK_THROWS_AS(permute(t, {0, 1}), ShapeError);
    CHECK_THROWS_AS(permute(t, {0, 0, 1}), ShapeError);
    CHECK_THROWS_AS(permute(t, {0, 1, 3}), ShapeError);
  }
}

TEST_CASE("permute round trip is exact on every shape with extents up to 4") {
  Rng rng(11);
  std::size_t cases = 0;
  for (std::size_t rank = 1; rank <= 4; ++rank) {
    std::vector<std::size_t> ext(rank, 1);
    while (true) {
      const Tensor t = rng.normal_tensor(Shape(ext.begin(), ext.end()));
      std::vector<std::size_t> axes(rank);
      std::iota(axes.begin(), axes.end(), 0);
      do {
        const Tensor p = permute(t, axes);
        const auto inv = inverse_permutation(axes);
        REQUIRE(permute(p, inv) == t);
        REQUIRE(p == test::naive_permute(t, axes));
        ++cases;
      } while (std::next_permutation(axes.begin(), axes.end()));
      std::size_t d = 0;
      while (d < rank && ext[d] == 4) ext[d++] = 1;
      if (d == rank) break;
      ++ext[d];
    }
  }
  CHECK(cases > 6000);
}

TEST_CASE("gb_pool") {
  SUBCASE("singleton axis") {
    const Tensor t({1, 2, 2}, {1, 2, 3, 4});
    const Tensor g = gb_pool(t);
    CHECK(g.shape() == Shape{2, 2, 2});
    CHECK(g == Tensor({2, 2, 2}, {1, 2, 3, 4, 1, 2, 3, 4}));
  }
  SUBCASE("hand computed") {
    const Tensor t({2, 2, 2}, {0, 1, 1, 0, 2, 3, 3, 2});
    CHECK(gb_pool(t) == Tensor({2, 2, 2}, {2, 3, 3, 2, 1, 2, 2, 1}));
  }
  SUBCASE("constant") {
    const Tensor g = gb_pool(Tensor({3, 2, 2}, 0.7));
    for (double v : g.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
  }
  SUBCASE("max slice dominates mean slice") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const Tensor g = gb_pool(rng.normal_tensor({4, 3, 5}));
      for (std::size_t k = 0; k < 15; ++k) CHECK(g.values()[k] >= g.values()[15 + k]);
    }
  }
  CHECK_THROWS_AS(gb_pool(Tensor({2, 2})), ShapeError);
}

TEST_CASE("conv2d") {
  SUBCASE("1x1 delta kernel is identity") {
    const Tensor x = test::wave({1, 4, 5}, 0.2);
    CHECK(conv2d(x, Tensor({1, 1, 1, 1}, 1.0)) == x);
  }
  SUBCASE("zero kernel") {
    const Tensor y = conv2d(test::wave({2, 5, 5}, 0.2), Tensor({3, 2, 3, 3}));
    CHECK(y.shape() == Shape{3, 5, 5});
    for (double v : y.values()) CHECK(v == 0.0);
  }
  SUBCASE("random 3x3 on 5x5 matches the loop oracle") {
    Rng rng(7);
    const Tensor x = rng.normal_tensor({1, 5, 5});
    const Tensor k = rng.normal_tensor({1, 1, 3, 3});
    CHECK(max_abs(conv2d(x, k), test::naive_conv2d(x, k)) < 1e-12);
  }
  SUBCASE("matches scipy correlate2d") {
    const Tensor y = conv2d(test::wave({3, 6, 5}, 0.1), test::wave({2, 3, 3, 3}, 0.2));
    CHECK(test::checksum(y) == doctest::Approx(ref::kConv2dChecksum).epsilon(1e-12));
  }
  SUBCASE("linearity") {
    Rng rng(8);
    const Tensor k = rng.normal_tensor({2, 1, 3, 3});
    for (int i = 0; i < 10; ++i) {
      const Tensor a = rng.normal_tensor({1, 8, 8}), b = rng.normal_tensor({1, 8, 8});
      const Tensor lhs = conv2d(axpby(1.7, a, -0.4, b), k);
      const Tensor rhs = axpby(1.7, conv2d(a, k), -0.4, conv2d(b, k));
      CHECK(max_abs(lhs, rhs) < 1e-10);
    }
  }
  CHECK_THROWS_AS(conv2d(Tensor({1, 4, 4}), Tensor({1, 1, 2, 2})), ConfigError);
  CHECK_THROWS_AS(conv2d(Tensor({2, 4, 4}), Tensor({1, 1, 3, 3})), ShapeError);
}

TEST_CASE("instance_norm") {
  SUBCASE("constant channel becomes zero") {
    const Tensor y = instance_norm(Tensor({1, 3, 3}, 4.2));
    for (double v : y.values()) CHECK(v == 0.0);
  }
  SUBCASE("[0, 2] maps to [-1, 1]") {
    const Tensor y = instance_norm(Tensor({1, 1, 2}, {0.0, 2.0}), 1e-15);
    CHECK(y(0, 0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(y(0, 0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("moments and affine invariance") {
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
      const Tensor t = rng.normal_tensor({3, 6, 7}, 3.0);
      const Tensor y = instance_norm(t);
      Tensor shifted = t;
      const std::size_t plane = 42;
      for (std::size_t k = 0; k < t.size(); ++k) {
        const double a = 0.5 + static_cast<double>(k / plane), b = -2.0 + static_cast<double>(k / plane);
        shifted.values()[k] = a * t.values()[k] + b;
      }
      // exact only as eps -> 0
      CHECK(max_abs(instance_norm(shifted, 1e-15), instance_norm(t, 1e-15)) < 1e-12);
      for (std::size_t c = 0; c < 3; ++c) {
        double m = 0.0, v = 0.0;
        for (std::size_t k = 0; k < plane; ++k) m += y.values()[c * plane + k];
        m /= plane;
        for (std::size_t k = 0; k < plane; ++k) v += std::pow(y.values()[c * plane + k] - m, 2);
        CHECK(std::abs(m) < 1e-6);
        CHECK(std::sqrt(v / plane) == doctest::Approx(1.0).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("sigmoid and softmax_temp") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  for (double x : {-30.0, -1.0, 2.0, 30.0}) CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0));

  const std::vector<double> constant(7, 3.3);
  for (double tau : {0.1, 1.0, 50.0})
    for (double p : softmax_temp(constant, tau)) CHECK(p == doctest::Approx(1.0 / 7.0).epsilon(1e-14));

  const std::vector<double> logs{std::log(1.0), std::log(2.0), std::log(3.0)};
  const auto p = softmax_temp(logs, 1.0);
  CHECK(std::abs(p[0] - 1.0 / 6.0) < 1e-12);
  CHECK(std::abs(p[1] - 2.0 / 6.0) < 1e-12);
  CHECK(std::abs(p[2] - 3.0 / 6.0) < 1e-12);

  const std::vector<double> huge{1e6, -1e6, 5e5};
  const auto q = softmax_temp(huge, 1.0);
  CHECK(std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0) < 1e-9);
  for (double v : q) CHECK(std::isfinite(v));

  SUBCASE("spread shrinks as tau grows") {
    Rng rng(9);
    const Tensor v = rng.normal_tensor({10});
    double prev = 2.0;
    for (double tau : {0.05, 0.1, 0.5, 1.0, 2.0, 10.0}) {
      const auto s = softmax_temp(v.values(), tau);
      const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
      CHECK(*hi - *lo < prev);
      prev = *hi - *lo;
    }
  }
  CHECK_THROWS_AS(softmax_temp(logs, 0.0), ConfigError);
  CHECK_THROWS_AS(softmax_temp(logs, -1.0), ConfigError);
}

TEST_CASE("pairwise_sum is independent of element count parity") {
  std::vector<double> v(1001, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.1).epsilon(1e-13));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("tensor file round trip") {
  const Tensor t = Rng(1).normal_tensor({2, 3, 4});
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "VCRT");
  CHECK(bytes.size() == 4 + 4 + 3 * 8 + 24 * 8);
  CHECK(read_tensor(ss) == t);

  std::stringstream bad("VCRX");
  CHECK_THROWS_AS(read_tensor(bad), IoError);
  std::stringstream truncated(bytes.substr(0, 40));
  CHECK_THROWS_AS(read_tensor(truncated), IoError);
  CHECK_THROWS_AS(load_tensor("/nonexistent/x.vcrt"), IoError);
}
