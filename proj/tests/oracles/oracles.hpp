#pragma once

// Independent reference computations used by the test suite. Nothing here
// calls into the library's kernels; models and operators are only read.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "phasegen/generator.hpp"
#include "phasegen/measure.hpp"

namespace oracle {

using phasegen::Activation;
using phasegen::Layer;
using phasegen::LayerKind;
using phasegen::Shape3;
using cplx = std::complex<double>;

struct Tensor {
  Shape3 shape;
  std::vector<double> v;
  double& at(std::size_t y, std::size_t x, std::size_t c) { return v[(y * shape.w + x) * shape.c + c]; }
  [[nodiscard]] double at(std::size_t y, std::size_t x, std::size_t c) const {
    return v[(y * shape.w + x) * shape.c + c];
  }
};

inline double w4(const Layer& l, std::size_t ky, std::size_t kx, std::size_t ci, std::size_t co) {
  const std::size_t cin = l.in_channels;
  const std::size_t cout = l.out_channels;
  return static_cast<double>(l.weights[((ky * l.kernel + kx) * cin + ci) * cout + co]);
}

// Explicitly zero-padded "same" convolution.
inline Tensor conv2d(const Layer& l, const Tensor& in) {
  const std::size_t k = l.kernel;
  const std::size_t s = l.stride;
  const std::size_t oh = (in.shape.h + s - 1) / s;
  const std::size_t ow = (in.shape.w + s - 1) / s;
  const auto total = [&](std::size_t n, std::size_t o) {
    const long t = static_cast<long>((o - 1) * s + k) - static_cast<long>(n);
    return static_cast<std::size_t>(t > 0 ? t : 0);
  };
  const std::size_t th = total(in.shape.h, oh);
  const std::size_t tw = total(in.shape.w, ow);
  Tensor padded{{in.shape.h + th, in.shape.w + tw, in.shape.c}, {}};
  padded.v.assign(padded.shape.size(), 0.0);
  for (std::size_t y = 0; y < in.shape.h; ++y)
    for (std::size_t x = 0; x < in.shape.w; ++x)
      for (std::size_t c = 0; c < in.shape.c; ++c) padded.at(y + th / 2, x + tw / 2, c) = in.at(y, x, c);
  Tensor out{{oh, ow, l.out_channels}, std::vector<double>(oh * ow * l.out_channels)};
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox)
      for (std::size_t co = 0; co < l.out_channels; ++co) {
        double acc = l.bias[co];
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx)
            for (std::size_t ci = 0; ci < in.shape.c; ++ci)
              acc += padded.at(oy * s + ky, ox * s + kx, ci) * w4(l, ky, kx, ci, co);
        out.at(oy, ox, co) = acc;
      }
  return out;
}

// Transposed convolution as: dilate the input by the stride, pad k-1 on both
// sides, correlate with the spatially flipped kernel, then crop.
inline Tensor conv2d_transpose(const Layer& l, const Tensor& in) {
  const std::size_t k = l.kernel;
  const std::size_t s = l.stride;
  const std::size_t oh = in.shape.h * s;
  const std::size_t ow = in.shape.w * s;
  const std::size_t crop = (k > s ? k - s : 0) / 2;
  const std::size_t dh = (in.shape.h - 1) * s + 1 + 2 * (k - 1);
  const std::size_t dw = (in.shape.w - 1) * s + 1 + 2 * (k - 1);
  Tensor dil{{dh, dw, in.shape.c}, std::vector<double>(dh * dw * in.shape.c, 0.0)};
  for (std::size_t y = 0; y < in.shape.h; ++y)
    for (std::size_t x = 0; x < in.shape.w; ++x)
      for (std::size_t c = 0; c < in.shape.c; ++c) dil.at(k - 1 + y * s, k - 1 + x * s, c) = in.at(y, x, c);
  Tensor out{{oh, ow, l.out_channels}, std::vector<double>(oh * ow * l.out_channels)};
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox)
      for (std::size_t co = 0; co < l.out_channels; ++co) {
        double acc = l.bias[co];
        for (std::size_t ty = 0; ty < k; ++ty)
          for (std::size_t tx = 0; tx < k; ++tx) {
            const std::size_t py = oy + crop + ty;
            const std::size_t px = ox + crop + tx;
            if (py >= dh || px >= dw) continue;
            for (std::size_t ci = 0; ci < in.shape.c; ++ci)
              acc += dil.at(py, px, ci) * w4(l, k - 1 - ty, k - 1 - tx, ci, co);
          }
        out.at(oy, ox, co) = acc;
      }
  return out;
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::elu: return x > 0 ? x : std::expm1(x);
  }
  return x;
}

/// Straight-line double-precision evaluation of a sequential model.
inline std::vector<double> reference_forward(const phasegen::GeneratorModel& model, const std::vector<double>& z) {
  Tensor t{{1, 1, z.size()}, z};
  for (const Layer& l : model.layers()) {
    switch (l.kind) {
      case LayerKind::dense: {
        Tensor o{{1, 1, l.out}, std::vector<double>(l.out)};
        for (std::size_t j = 0; j < l.out; ++j) {
          double acc = l.bias[j];
          for (std::size_t i = 0; i < l.in; ++i) acc += t.v[i] * static_cast<double>(l.weights[i * l.out + j]);
          o.v[j] = acc;
        }
        t = o;
        break;
      }
      case LayerKind::reshape:
        t.shape = l.target;
        break;
      case LayerKind::upsample2x: {
        Tensor o{{t.shape.h * 2, t.shape.w * 2, t.shape.c}, {}};
        o.v.resize(o.shape.size());
        for (std::size_t y = 0; y < o.shape.h; ++y)
          for (std::size_t x = 0; x < o.shape.w; ++x)
            for (std::size_t c = 0; c < o.shape.c; ++c) o.at(y, x, c) = t.at(y / 2, x / 2, c);
        t = o;
        break;
      }
      case LayerKind::conv2d:
        t = conv2d(l, t);
        break;
      case LayerKind::conv2d_transpose:
        t = conv2d_transpose(l, t);
        break;
      case LayerKind::batchnorm:
        for (std::size_t i = 0; i < t.v.size(); ++i) {
          const std::size_t c = i % t.shape.c;
          t.v[i] = static_cast<double>(l.gamma[c]) * (t.v[i] - static_cast<double>(l.mean[c])) /
                       std::sqrt(static_cast<double>(l.variance[c]) + static_cast<double>(l.epsilon)) +
                   static_cast<double>(l.beta[c]);
        }
        break;
      case LayerKind::activation:
        for (auto& v : t.v) v = activate(l.activation, v);
        break;
    }
  }
  return t.v;
}

/// Dense m x n matrix of a CDP operator built from the DFT definition.
inline std::vector<std::vector<cplx>> dense_cdp(const phasegen::CdpOperator& op) {
  const std::size_t h = op.height;
  const std::size_t w = op.width;
  const std::size_t c = op.channels;
  const std::size_t n = h * w * c;
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
  std::vector<std::vector<cplx>> rows;
  for (std::size_t i = 0; i < op.masks.size(); ++i) {
    for (auto q : op.selections[i]) {
      const std::size_t u = q / c / w;
      const std::size_t v = (q / c) % w;
      const std::size_t ch = q % c;
      std::vector<cplx> row(n, 0.0);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double ang = -2.0 * std::numbers::pi *
                             (static_cast<double>(u * y) / static_cast<double>(h) +
                              static_cast<double>(v * x) / static_cast<double>(w));
          const std::size_t j = (y * w + x) * c + ch;
          row[j] = norm * std::polar(1.0, ang) * op.masks[i][j];
        }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// SSIM evaluated window by window from the textbook formula with a 2-D
/// Gaussian weight computed directly (no separable filtering).
inline double ssim_direct(const std::vector<double>& a, const std::vector<double>& b, std::size_t h, std::size_t w,
                          double peak = 1.0) {
  const int k = 11;
  const double sigma = 1.5;
  std::vector<double> wgt(k * k);
  double sum = 0.0;
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) {
      const double dy = y - 5;
      const double dx = x - 5;
      wgt[y * k + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      sum += wgt[y * k + x];
    }
  for (auto& v : wgt) v /= sum;
  const double c1 = std::pow(0.01 * peak, 2);
  const double c2 = std::pow(0.03 * peak, 2);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t oy = 0; oy + k <= h; ++oy)
    for (std::size_t ox = 0; ox + k <= w; ++ox) {
      double ma = 0, mb = 0;
      for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x) {
          const std::size_t i = (oy + y) * w + ox + x;
          ma += wgt[y * k + x] * a[i];
          mb += wgt[y * k + x] * b[i];
        }
      double va = 0, vb = 0, cov = 0;
      for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x) {
          const std::size_t i = (oy + y) * w + ox + x;
          va += wgt[y * k + x] * (a[i] - ma) * (a[i] - ma);
          vb += wgt[y * k + x] * (b[i] - mb) * (b[i] - mb);
          cov += wgt[y * k + x] * (a[i] - ma) * (b[i] - mb);
        }
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

/// Central difference of f along each coordinate.
inline std::vector<double> central_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> z, double h) {
  std::vector<double> g(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double z0 = z[i];
    z[i] = z0 + h;
    const double fp = f(z);
    z[i] = z0 - h;
    const double fm = f(z);
    z[i] = z0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace oracle
