#include "phasegen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "phasegen/error.hpp"

namespace phasegen {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr std::size_t kFallbackMax = 7;

std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  std::vector<double> taps(size);
  const double center = static_cast<double>(size - 1) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Separable "valid" filtering of one channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * plane[y * w + x + t];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * rows[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, std::size_t h, std::size_t w,
                  const std::vector<double>& taps, double c1, double c2) {
  const std::size_t n = a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w, taps);
  const auto mu_b = filter_valid(b, h, w, taps);
  const auto e_aa = filter_valid(aa, h, w, taps);
  const auto e_bb = filter_valid(bb, h, w, taps);
  const auto e_ab = filter_valid(ab, h, w, taps);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace

double per_pixel_error(const ImageTensor& x, const ImageTensor& x_hat) {
  require_same_shape(x, x_hat, "per_pixel_error");
  if (x.data.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - x_hat.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(x.data.size());
}

double psnr(const ImageTensor& x, const ImageTensor& x_hat, double peak) {
  if (!(peak > 0.0)) throw ConfigError("PSNR peak must be positive");
  const double mse = per_pixel_error(x, x_hat);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

SsimResult ssim_detailed(const ImageTensor& x, const ImageTensor& x_hat, double peak) {
  require_same_shape(x, x_hat, "ssim");
  if (!(peak > 0.0)) throw ConfigError("SSIM peak must be positive");
  const std::size_t h = x.shape.h;
  const std::size_t w = x.shape.w;
  const std::size_t c = x.shape.c;
  if (h == 0 || w == 0 || c == 0) throw DimensionError("ssim: empty image");
  SsimResult res;
  std::vector<double> taps;
  if (h >= kWindow && w >= kWindow) {
    taps = gaussian_taps(kWindow, kSigma);
  } else {
    res.fallback_window = true;
    const std::size_t side = std::min({h, w, kFallbackMax});
    taps.assign(side, 1.0 / static_cast<double>(side));
  }
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  std::vector<double> a(h * w), b(h * w);
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h * w; ++i) {
      a[i] = x.data[i * c + ch];
      b[i] = x_hat.data[i * c + ch];
    }
    total += ssim_plane(a, b, h, w, taps, c1, c2);
  }
  res.value = total / static_cast<double>(c);
  return res;
}

double ssim(const ImageTensor& x, const ImageTensor& x_hat, double peak) {
  return ssim_detailed(x, x_hat, peak).value;
}

SignResolution resolve_sign(const ImageTensor& x_ref, const ImageTensor& x_hat) {
  require_same_shape(x_ref, x_hat, "resolve_sign");
  double plus = 0.0;
  double minus = 0.0;
  for (std::size_t i = 0; i < x_ref.data.size(); ++i) {
    const double dp = x_ref.data[i] - x_hat.data[i];
    const double dm = x_ref.data[i] + x_hat.data[i];
    plus += dp * dp;
    minus += dm * dm;
  }
  SignResolution r{x_hat, 1};
  if (minus < plus) {
    r.sign = -1;
    for (auto& v : r.image.data) v = -v;
  }
  return r;
}

ScoreReport score(const ImageTensor& x, const ImageTensor& x_hat, double peak, bool resolve_global_sign) {
  ScoreReport rep;
  const ImageTensor* candidate = &x_hat;
  SignResolution resolved;
  if (resolve_global_sign) {
    resolved = resolve_sign(x, x_hat);
    rep.sign_resolved = resolved.sign < 0;
    candidate = &resolved.image;
  }
  rep.per_pixel_mse = per_pixel_error(x, *candidate);
  rep.psnr_db = psnr(x, *candidate, peak);
  const auto s = ssim_detailed(x, *candidate, peak);
  rep.ssim = s.value;
  rep.ssim_fallback = s.fallback_window;
  return rep;
}

}  // namespace phasegen
