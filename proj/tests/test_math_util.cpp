#include <doctest.h>

#include <atomic>
#include <cmath>
#include <vector>

#include "pathcast/math_util.hpp"

using namespace pathcast;

TEST_CASE("normalQuantile matches tabulated values") {
  // [DERIVED] reference values from the standard normal inverse CDF.
  CHECK(normalQuantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(normalQuantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normalQuantile(0.75) == doctest::Approx(0.6744897501960817).epsilon(1e-12));
  CHECK(normalQuantile(0.001) == doctest::Approx(-3.090232306167813).epsilon(1e-12));
  CHECK(normalQuantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-9));
}

TEST_CASE("normalCdf and normalQuantile are inverse") {
  for (double u : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.99, 1 - 1e-6})
    CHECK(normalCdf(normalQuantile(u)) == doctest::Approx(u).epsilon(1e-10));
}

TEST_CASE("arsinh round-trips") {
  for (double x : {-1000.0, -1.0, 0.0, 0.5, 42.0, 1e6})
    CHECK(arsinhInverse(arsinh(x)) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("median and mad") {
  std::vector<double> v{3.0, 1.0, 4.0, 1.0, 5.0};
  CHECK(median(v) == 3.0);
  // [DERIVED] |x - 3| = {0,2,1,2,2} -> median 2.
  CHECK(mad(v) == 2.0);
}

TEST_CASE("spearman handles ties via average ranks") {
  std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y{2, 4, 6, 8, 10};
  CHECK(spearman(x, y) == doctest::Approx(1.0));
  std::vector<double> yd{10, 8, 6, 4, 2};
  CHECK(spearman(x, yd) == doctest::Approx(-1.0));
  // [DERIVED] x = {1,2,2,3}: average ranks {1, 2.5, 2.5, 4}; y = {1,2,3,4}.
  // Pearson on the ranks: cov 4.5, var_x 4.5, var_y 5 -> rho = sqrt(0.9).
  std::vector<double> xt{1, 2, 2, 3};
  std::vector<double> yt{1, 2, 3, 4};
  CHECK(spearman(xt, yt) == doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));
}

TEST_CASE("deriveSeed separates streams deterministically") {
  CHECK(deriveSeed(1, 2, 3) == deriveSeed(1, 2, 3));
  CHECK(deriveSeed(1, 2, 3) != deriveSeed(1, 2, 4));
  CHECK(deriveSeed(1, 2, 3) != deriveSeed(2, 2, 3));
}

TEST_CASE("parallelFor visits every index once") {
  std::vector<std::atomic<int>> hits(257);
  parallelFor(257, [&](int i) { hits[static_cast<std::size_t>(i)] += 1; });
  for (const auto& h : hits) CHECK(h.load() == 1);
}
