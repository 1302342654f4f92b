#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "compnet/fft.hpp"
#include "compnet/reference.hpp"
#include "compnet/tensor.hpp"

using namespace compnet;

TEST_CASE("constant field transforms to a DC impulse") {
  CTensor<float> x(1, 1, 8, 8);
  std::fill(x.re.begin(), x.re.end(), 0.25f);
  std::fill(x.im.begin(), x.im.end(), -0.5f);
  auto y = fft2d(x);
  CHECK(std::abs(y.re[0] - 64.0 * 0.25) < 1e-4);
  CHECK(std::abs(y.im[0] - 64.0 * -0.5) < 1e-4);
  for (int64_t i = 1; i < y.numel(); ++i) {
    CHECK(std::abs(y.re[i]) < 1e-4);
    CHECK(std::abs(y.im[i]) < 1e-4);
  }
}

TEST_CASE("ifft2d inverts fft2d") {
  auto x = random_tensor<float>({1, 16, 24, 24}, 3);
  auto back = ifft2d(fft2d(x));
  CHECK(max_abs_diff(x, back) < 1e-4);
}

TEST_CASE("matches naive DFT on non-power-of-two extents") {
  auto x = random_tensor<float>({2, 2, 5, 7}, 4);
  auto fast = fft2d(x);
  auto naive = reference::naive_dft2d(x, -1);
  CHECK(max_abs_diff(fast.cast<double>(), naive) < 1e-4);

  auto xi = random_tensor<float>({1, 1, 12, 9}, 5);
  CHECK(max_abs_diff(fft2d(xi).cast<double>(), reference::naive_dft2d(xi, -1)) < 1e-4);
}

TEST_CASE("linearity over complex scalars") {
  auto x = random_tensor<float>({1, 2, 6, 10}, 6);
  auto y = random_tensor<float>({1, 2, 6, 10}, 7);
  std::complex<double> alpha{0.7, -1.3}, beta{-0.2, 0.4};
  auto lhs = fft2d(add(scale(x, alpha), scale(y, beta)));
  auto rhs = add(scale(fft2d(x), alpha), scale(fft2d(y), beta));
  CHECK(max_abs_diff(lhs, rhs) < 1e-4);
}

TEST_CASE("Parseval") {
  auto x = random_tensor<float>({1, 4, 18, 12}, 8);
  auto y = fft2d(x);
  double ex = 0, ey = 0;
  for (int64_t i = 0; i < x.numel(); ++i)
    ex += double(x.re[i]) * x.re[i] + double(x.im[i]) * x.im[i];
  for (int64_t i = 0; i < y.numel(); ++i)
    ey += double(y.re[i]) * y.re[i] + double(y.im[i]) * y.im[i];
  ey /= (18.0 * 12.0);
  CHECK(std::abs(ex - ey) / ex < 1e-4);
}

TEST_CASE("rank-4 requirement") {
  auto x = random_tensor<float>({5, 7}, 9);
  CHECK_THROWS_AS(fft2d(x), ShapeError);
}
