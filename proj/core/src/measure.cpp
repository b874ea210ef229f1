#include "phasegen/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fft.hpp"
#include "phasegen/error.hpp"
#include "phasegen/rng.hpp"

namespace phasegen {

std::string to_string(OperatorFamily f) {
  switch (f) {
    case OperatorFamily::gaussian: return "gaussian";
    case OperatorFamily::cdp: return "cdp";
    case OperatorFamily::transmission_matrix: return "tm";
  }
  return "unknown";
}

OperatorFamily parse_operator_family(const std::string& s) {
  if (s == "gaussian") return OperatorFamily::gaussian;
  if (s == "cdp") return OperatorFamily::cdp;
  if (s == "tm") return OperatorFamily::transmission_matrix;
  throw ConfigError("unknown operator family '" + s + "' (expected gaussian, cdp or tm)");
}

std::string to_string(NoiseMode m) { return m == NoiseMode::relative ? "relative" : "absolute"; }

NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "relative") return NoiseMode::relative;
  if (s == "absolute") return NoiseMode::absolute;
  throw ConfigError("unknown noise mode '" + s + "' (expected relative or absolute)");
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using MutVec = Eigen::Map<Eigen::VectorXd>;

void dense_apply(const DenseComplexMatrix& a, std::span<const double> x, std::span<cplx> out) {
  const ConstVec xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd re = a.re * xv;
  const Eigen::VectorXd im = a.im * xv;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {re[static_cast<Eigen::Index>(i)], im[static_cast<Eigen::Index>(i)]};
  }
}

void split(std::span<const cplx> v, Eigen::VectorXd& re, Eigen::VectorXd& im) {
  re.resize(static_cast<Eigen::Index>(v.size()));
  im.resize(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    re[static_cast<Eigen::Index>(i)] = v[i].real();
    im[static_cast<Eigen::Index>(i)] = v[i].imag();
  }
}

// A^H v = (Re^T - i Im^T)(vr + i vi)
void dense_adjoint(const DenseComplexMatrix& a, std::span<const cplx> v, std::span<cplx> out) {
  Eigen::VectorXd vr, vi;
  split(v, vr, vi);
  const Eigen::VectorXd re = a.re.transpose() * vr + a.im.transpose() * vi;
  const Eigen::VectorXd im = a.re.transpose() * vi - a.im.transpose() * vr;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = {re[static_cast<Eigen::Index>(j)], im[static_cast<Eigen::Index>(j)]};
  }
}

void dense_adjoint_real(const DenseComplexMatrix& a, std::span<const cplx> v, std::span<double> out) {
  Eigen::VectorXd vr, vi;
  split(v, vr, vi);
  MutVec o(out.data(), static_cast<Eigen::Index>(out.size()));
  o.noalias() = a.re.transpose() * vr;
  o.noalias() += a.im.transpose() * vi;
}

std::vector<cplx>& scratch(std::size_t n) {
  thread_local std::vector<cplx> buf;
  buf.resize(n);
  return buf;
}

void cdp_apply(const CdpOperator& op, std::span<const double> x, std::span<cplx> out) {
  const std::size_t n = x.size();
  auto& buf = scratch(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < op.masks.size(); ++i) {
    const auto& mask = op.masks[i];
    for (std::size_t j = 0; j < n; ++j) buf[j] = mask[j] * x[j];
    op.fft->forward(buf.data());
    for (auto idx : op.selections[i]) out[k++] = buf[idx];
  }
}

template <class Accumulate>
void cdp_adjoint_impl(const CdpOperator& op, std::span<const cplx> v, std::size_t n, Accumulate&& acc) {
  auto& buf = scratch(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < op.masks.size(); ++i) {
    std::fill(buf.begin(), buf.end(), cplx{});
    for (auto idx : op.selections[i]) buf[idx] = v[k++];
    op.fft->inverse(buf.data());
    const auto& mask = op.masks[i];
    for (std::size_t j = 0; j < n; ++j) acc(j, std::conj(mask[j]) * buf[j]);
  }
}

DenseComplexMatrix rotate(const DenseComplexMatrix& a, double phase) {
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  return {c * a.re - s * a.im, s * a.re + c * a.im};
}

}  // namespace

MeasurementOperator::MeasurementOperator(Variant v) : v_(std::move(v)) {
  std::visit(Overloaded{
                 [&](const GaussianOperator& g) {
                   m_ = g.matrix.rows();
                   n_ = g.matrix.cols();
                   if (g.matrix.im.rows() != g.matrix.re.rows() || g.matrix.im.cols() != g.matrix.re.cols()) {
                     throw DimensionError("real and imaginary parts differ in shape");
                   }
                 },
                 [&](const CdpOperator& c) {
                   n_ = c.height * c.width * c.channels;
                   if (c.masks.size() != c.selections.size() || c.masks.empty()) {
                     throw ConfigError("CDP operator needs one selection list per mask");
                   }
                   if (!c.fft || c.fft->size() != n_) throw ConfigError("CDP operator FFT does not match grid");
                   m_ = 0;
                   for (std::size_t i = 0; i < c.masks.size(); ++i) {
                     if (c.masks[i].size() != n_) throw DimensionError("CDP mask size does not match grid");
                     std::vector<bool> seen(n_, false);
                     for (auto idx : c.selections[i]) {
                       if (idx >= n_ || seen[idx]) throw ConfigError("CDP selection indices must be distinct and in range");
                       seen[idx] = true;
                     }
                     m_ += c.selections[i].size();
                   }
                 },
                 [&](const TransmissionOperator& t) {
                   m_ = t.matrix.rows();
                   n_ = t.matrix.cols();
                   if (t.matrix.im.rows() != t.matrix.re.rows() || t.matrix.im.cols() != t.matrix.re.cols()) {
                     throw DimensionError("real and imaginary parts differ in shape");
                   }
                 },
             },
             v_);
}

OperatorFamily MeasurementOperator::family() const {
  return static_cast<OperatorFamily>(v_.index());
}

void MeasurementOperator::apply(std::span<const double> x, std::span<cplx> out) const {
  if (x.size() != n_) {
    throw DimensionError("operator expects a signal of length " + std::to_string(n_) + ", got " +
                         std::to_string(x.size()));
  }
  if (out.size() != m_) throw DimensionError("output buffer has wrong length");
  std::visit(Overloaded{
                 [&](const GaussianOperator& g) { dense_apply(g.matrix, x, out); },
                 [&](const CdpOperator& c) { cdp_apply(c, x, out); },
                 [&](const TransmissionOperator& t) { dense_apply(t.matrix, x, out); },
             },
             v_);
}

std::vector<cplx> MeasurementOperator::apply(std::span<const double> x) const {
  std::vector<cplx> out(m_);
  apply(x, out);
  return out;
}

void MeasurementOperator::apply_adjoint(std::span<const cplx> v, std::span<cplx> out) const {
  if (v.size() != m_) {
    throw DimensionError("adjoint expects a vector of length " + std::to_string(m_) + ", got " +
                         std::to_string(v.size()));
  }
  if (out.size() != n_) throw DimensionError("output buffer has wrong length");
  std::visit(Overloaded{
                 [&](const GaussianOperator& g) { dense_adjoint(g.matrix, v, out); },
                 [&](const CdpOperator& c) {
                   std::fill(out.begin(), out.end(), cplx{});
                   cdp_adjoint_impl(c, v, n_, [&](std::size_t j, cplx z) { out[j] += z; });
                 },
                 [&](const TransmissionOperator& t) { dense_adjoint(t.matrix, v, out); },
             },
             v_);
}

std::vector<cplx> MeasurementOperator::apply_adjoint(std::span<const cplx> v) const {
  std::vector<cplx> out(n_);
  apply_adjoint(v, out);
  return out;
}

void MeasurementOperator::apply_adjoint_real(std::span<const cplx> v, std::span<double> out) const {
  if (v.size() != m_) {
    throw DimensionError("adjoint expects a vector of length " + std::to_string(m_) + ", got " +
                         std::to_string(v.size()));
  }
  if (out.size() != n_) throw DimensionError("output buffer has wrong length");
  std::visit(Overloaded{
                 [&](const GaussianOperator& g) { dense_adjoint_real(g.matrix, v, out); },
                 [&](const CdpOperator& c) {
                   std::fill(out.begin(), out.end(), 0.0);
                   cdp_adjoint_impl(c, v, n_, [&](std::size_t j, cplx z) { out[j] += z.real(); });
                 },
                 [&](const TransmissionOperator& t) { dense_adjoint_real(t.matrix, v, out); },
             },
             v_);
}

MeasurementOperator MeasurementOperator::rotated(double phase) const {
  return std::visit(Overloaded{
                        [&](const GaussianOperator& g) {
                          return MeasurementOperator(GaussianOperator{rotate(g.matrix, phase)});
                        },
                        [&](const CdpOperator& c) {
                          CdpOperator r = c;
                          const cplx u = std::polar(1.0, phase);
                          for (auto& mask : r.masks) {
                            for (auto& d : mask) d *= u;
                          }
                          return MeasurementOperator(std::move(r));
                        },
                        [&](const TransmissionOperator& t) {
                          TransmissionOperator r = t;
                          r.matrix = rotate(t.matrix, phase);
                          return MeasurementOperator(std::move(r));
                        },
                    },
                    v_);
}

MeasurementOperator make_gaussian(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0) throw ConfigError("Gaussian operator needs m >= 1 and n >= 1");
  Rng rng(mix_seed(seed, {0x6a055}));
  std::normal_distribution<double> d(0.0, std::sqrt(1.0 / (2.0 * static_cast<double>(m))));
  DenseComplexMatrix a{Eigen::MatrixXd(m, n), Eigen::MatrixXd(m, n)};
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j) {
      a.re(i, j) = d(rng);
      a.im(i, j) = d(rng);
    }
  }
  return MeasurementOperator(GaussianOperator{std::move(a)});
}

MeasurementOperator make_cdp(std::size_t height, std::size_t width, std::size_t num_masks,
                             std::size_t samples_per_mask, std::uint64_t seed, std::size_t channels) {
  if (height == 0 || width == 0 || channels == 0) throw ConfigError("CDP grid dimensions must be positive");
  if (num_masks == 0) throw ConfigError("CDP needs at least one mask");
  const std::size_t n = height * width * channels;
  if (samples_per_mask == 0 || samples_per_mask > n) {
    throw ConfigError("CDP samples per mask must be in [1, " + std::to_string(n) + "], got " +
                      std::to_string(samples_per_mask));
  }
  Rng rng(mix_seed(seed, {0xcd9}));
  std::uniform_real_distribution<double> theta(0.0, 2.0 * std::numbers::pi);
  CdpOperator op;
  op.height = height;
  op.width = width;
  op.channels = channels;
  std::vector<std::uint32_t> pool(n);
  for (std::size_t i = 0; i < num_masks; ++i) {
    std::vector<cplx> mask(n);
    for (auto& d : mask) d = std::polar(1.0, theta(rng));
    op.masks.push_back(std::move(mask));
    // Partial Fisher-Yates: the first samples_per_mask slots are a uniform draw without replacement.
    std::iota(pool.begin(), pool.end(), 0U);
    for (std::size_t s = 0; s < samples_per_mask; ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, n - 1);
      std::swap(pool[s], pool[pick(rng)]);
    }
    std::vector<std::uint32_t> sel(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(samples_per_mask));
    std::sort(sel.begin(), sel.end());
    op.selections.push_back(std::move(sel));
  }
  op.fft = std::make_shared<const detail::Fft2d>(height, width, channels);
  return MeasurementOperator(std::move(op));
}

MeasurementOperator make_dense_tm(DenseComplexMatrix matrix, std::vector<std::size_t> source_rows,
                                  std::vector<double> residuals) {
  return MeasurementOperator(TransmissionOperator{std::move(matrix), std::move(source_rows), std::move(residuals)});
}

MeasurementVector measure_magnitude(const MeasurementOperator& op, const ImageTensor& x, double noise_percent,
                                    NoiseMode mode, std::uint64_t seed) {
  if (!(noise_percent >= 0.0) || !std::isfinite(noise_percent)) {
    throw ConfigError("noise percent must be a finite value >= 0");
  }
  const auto u = op.apply(x.data);
  MeasurementVector mv;
  mv.noise_percent = noise_percent;
  mv.noise_mode = mode;
  mv.seed = seed;
  mv.y.resize(u.size());
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mv.y[i] = std::abs(u[i]);
    sum_sq += mv.y[i] * mv.y[i];
  }
  const double frac = noise_percent / 100.0;
  mv.noise_sigma = mode == NoiseMode::absolute ? frac : frac * std::sqrt(sum_sq / static_cast<double>(u.size()));
  if (mv.noise_sigma > 0.0) {
    Rng rng(mix_seed(seed, {0x7015e}));
    std::normal_distribution<double> d(0.0, mv.noise_sigma);
    for (auto& v : mv.y) v += d(rng);
  }
  return mv;
}

}  // namespace phasegen
