#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles/oracles.hpp"
#include "phasegen/error.hpp"
#include "phasegen/metrics.hpp"
#include "test_support.hpp"

using namespace phasegen;
using testing_support::randn;

namespace {

ImageTensor constant(Shape3 s, double v) { return ImageTensor(s, std::vector<double>(s.size(), v)); }

ImageTensor random_image(Shape3 s, std::uint64_t seed) {
  auto d = randn(s.size(), seed, 0.2);
  for (auto& v : d) v = std::clamp(0.5 + v, 0.0, 1.0);
  return {s, d};
}

}  // namespace

TEST(Psnr, ClosedForms) {
  const Shape3 s{8, 8, 1};
  EXPECT_EQ(psnr(constant(s, 0.0), constant(s, 1.0)), 0.0);
  EXPECT_EQ(psnr(constant(s, 0.3), constant(s, 0.3)), std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(psnr(constant(s, 0.0), constant(s, 0.1)), 20.0);
  EXPECT_DOUBLE_EQ(psnr(constant(s, 0.0), constant(s, 0.5), 2.0), 10.0 * std::log10(4.0 / 0.25));
}

TEST(Psnr, SymmetricAndMonotone) {
  const auto x = random_image({10, 10, 1}, 1);
  const auto noise = randn(100, 2, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double level : {0.001, 0.01, 0.05, 0.1, 0.3}) {
    ImageTensor y = x;
    for (std::size_t i = 0; i < 100; ++i) y.data[i] += level * noise[i];
    const double p = psnr(x, y);
    EXPECT_EQ(p, psnr(y, x));
    EXPECT_LT(p, prev);
    prev = p;
  }
  EXPECT_THROW(psnr(x, constant({10, 9, 1}, 0.0)), DimensionError);
}

TEST(Ssim, IdentityAndRange) {
  const auto x = random_image({16, 16, 1}, 3);
  EXPECT_NEAR(ssim(x, x), 1.0, 1e-15);
  ImageTensor bin({16, 16, 1});
  for (std::size_t i = 0; i < bin.size(); ++i) bin.data[i] = (i * 7 % 5) < 2 ? 1.0 : 0.0;
  ImageTensor inv = bin;
  for (auto& v : inv.data) v = 1.0 - v;
  const double s = ssim(bin, inv);
  EXPECT_GE(s, -1.0);
  EXPECT_LT(s, 1.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double v = ssim(random_image({16, 16, 1}, seed), random_image({16, 16, 1}, seed + 50));
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Ssim, MatchesDirectFormula) {
  for (std::uint64_t seed = 10; seed < 14; ++seed) {
    const auto a = random_image({16, 16, 1}, seed);
    const auto b = random_image({16, 16, 1}, seed + 1);
    EXPECT_NEAR(ssim(a, b), oracle::ssim_direct(a.data, b.data, 16, 16), 1e-9);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-15);
  }
  const auto a = random_image({20, 13, 1}, 5);
  const auto b = random_image({20, 13, 1}, 6);
  EXPECT_NEAR(ssim(a, b, 2.0), oracle::ssim_direct(a.data, b.data, 20, 13, 2.0), 1e-9);
}

TEST(Ssim, RgbIsMeanOfChannels) {
  const auto a = random_image({12, 12, 3}, 1);
  const auto b = random_image({12, 12, 3}, 2);
  double sum = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> pa, pb;
    for (std::size_t i = c; i < a.size(); i += 3) {
      pa.push_back(a.data[i]);
      pb.push_back(b.data[i]);
    }
    sum += oracle::ssim_direct(pa, pb, 12, 12);
  }
  EXPECT_NEAR(ssim(a, b), sum / 3.0, 1e-9);
}

TEST(Ssim, SmallImageFallsBack) {
  const auto a = random_image({6, 9, 1}, 1);
  const auto b = random_image({6, 9, 1}, 2);
  const auto r = ssim_detailed(a, b);
  EXPECT_TRUE(r.fallback_window);
  EXPECT_GE(r.value, -1.0);
  EXPECT_LE(r.value, 1.0);
  EXPECT_FALSE(ssim_detailed(random_image({11, 11, 1}, 1), random_image({11, 11, 1}, 2)).fallback_window);
  EXPECT_NEAR(ssim_detailed(a, a).value, 1.0, 1e-15);
}

TEST(PerPixel, Definition) {
  const Shape3 s{5, 4, 2};
  EXPECT_EQ(per_pixel_error(constant(s, 0.2), constant(s, 0.2)), 0.0);
  EXPECT_NEAR(per_pixel_error(constant(s, 0.2), constant(s, 0.5)), 0.09, 1e-15);
  const auto a = random_image(s, 1);
  const auto b = random_image(s, 2);
  double sq = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += std::pow(a.data[i] - b.data[i], 2);
  EXPECT_NEAR(per_pixel_error(a, b), sq / 40.0, 1e-15);
  EXPECT_EQ(per_pixel_error(a, b), per_pixel_error(b, a));
}

TEST(Sign, Resolution) {
  const auto x = random_image({4, 4, 1}, 3);
  ImageTensor neg = x;
  for (auto& v : neg.data) v = -v;
  const auto r = resolve_sign(x, neg);
  EXPECT_EQ(r.sign, -1);
  EXPECT_EQ(per_pixel_error(x, r.image), 0.0);
  EXPECT_EQ(resolve_sign(x, x).sign, 1);
  const ImageTensor e1({1, 2, 1}, {1.0, 0.0});
  const ImageTensor e2({1, 2, 1}, {0.0, 1.0});
  EXPECT_EQ(resolve_sign(e1, e2).sign, 1);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ImageTensor a({3, 3, 1}, randn(9, s));
    const ImageTensor b({3, 3, 1}, randn(9, s + 100));
    EXPECT_LE(per_pixel_error(a, resolve_sign(a, b).image), per_pixel_error(a, b));
  }
}

TEST(Score, ReportsAllMetrics) {
  const auto x = random_image({12, 12, 1}, 1);
  ImageTensor neg = x;
  for (auto& v : neg.data) v = -v;
  const auto plain = score(x, neg);
  EXPECT_FALSE(plain.sign_resolved);
  EXPECT_GT(plain.per_pixel_mse, 0.0);
  const auto fixed = score(x, neg, 1.0, true);
  EXPECT_TRUE(fixed.sign_resolved);
  EXPECT_EQ(fixed.psnr_db, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(fixed.ssim, 1.0, 1e-15);
  EXPECT_EQ(fixed.per_pixel_mse, 0.0);
}
