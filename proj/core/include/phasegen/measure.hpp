#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "phasegen/types.hpp"

namespace phasegen {

using cplx = std::complex<double>;

/// Dense complex matrix stored as separate real and imaginary parts, so that
/// products with real vectors cost two real mat-vecs.
struct DenseComplexMatrix {
  Eigen::MatrixXd re;
  Eigen::MatrixXd im;

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(re.rows()); }
  [[nodiscard]] std::size_t cols() const { return static_cast<std::size_t>(re.cols()); }
  [[nodiscard]] cplx operator()(std::size_t i, std::size_t j) const {
    return {re(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
            im(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))};
  }
};

struct GaussianOperator {
  DenseComplexMatrix matrix;
};

namespace detail {
class Fft2d;
}

/// Coded diffraction patterns: for each mask i, J_i F D_i x, concatenated.
///
/// The grid is h x w x channels (HWC). Each mask holds one unit-modulus entry
/// per grid value; the unitary 2-D DFT (scale 1/sqrt(h*w)) is applied to each
/// channel plane; selection indices address the flattened HWC grid.
struct CdpOperator {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<std::vector<cplx>> masks;
  std::vector<std::vector<std::uint32_t>> selections;
  std::shared_ptr<const detail::Fft2d> fft;
};

struct TransmissionOperator {
  DenseComplexMatrix matrix;
  std::vector<std::size_t> source_rows;  // row indices in the TM file
  std::vector<double> residuals;         // residual of each selected row
};

enum class OperatorFamily : std::uint8_t { gaussian, cdp, transmission_matrix };

std::string to_string(OperatorFamily f);
OperatorFamily parse_operator_family(const std::string& s);

/// Immutable linear measurement operator A: R^n -> C^m with adjoint.
class MeasurementOperator {
 public:
  using Variant = std::variant<GaussianOperator, CdpOperator, TransmissionOperator>;

  explicit MeasurementOperator(Variant v);

  [[nodiscard]] OperatorFamily family() const;
  [[nodiscard]] std::size_t rows() const { return m_; }
  [[nodiscard]] std::size_t cols() const { return n_; }
  [[nodiscard]] const Variant& variant() const { return v_; }

  /// A x. Throws DimensionError if x.size() != cols().
  [[nodiscard]] std::vector<cplx> apply(std::span<const double> x) const;
  void apply(std::span<const double> x, std::span<cplx> out) const;

  /// A^H v. Throws DimensionError if v.size() != rows().
  [[nodiscard]] std::vector<cplx> apply_adjoint(std::span<const cplx> v) const;
  void apply_adjoint(std::span<const cplx> v, std::span<cplx> out) const;

  /// Re(A^H v), the only part needed when the signal is real.
  void apply_adjoint_real(std::span<const cplx> v, std::span<double> out) const;

  /// exp(i*phase) * A. Magnitude measurements are unchanged by this.
  [[nodiscard]] MeasurementOperator rotated(double phase) const;

 private:
  Variant v_;
  std::size_t m_ = 0;
  std::size_t n_ = 0;
};

/// Complex Gaussian matrix with Re, Im ~ N(0, 1/(2m)) i.i.d., so E|A x|^2 = |x|^2.
MeasurementOperator make_gaussian(std::size_t m, std::size_t n, std::uint64_t seed);

/// Masks with entries exp(i*theta), theta ~ U[0, 2pi); `samples_per_mask`
/// distinct indices drawn uniformly without replacement per mask.
MeasurementOperator make_cdp(std::size_t height, std::size_t width, std::size_t num_masks,
                             std::size_t samples_per_mask, std::uint64_t seed, std::size_t channels = 1);

/// Dense operator from explicit rows (e.g. a filtered TM).
MeasurementOperator make_dense_tm(DenseComplexMatrix matrix, std::vector<std::size_t> source_rows,
                                  std::vector<double> residuals);

enum class NoiseMode : std::uint8_t { relative, absolute };

std::string to_string(NoiseMode m);
NoiseMode parse_noise_mode(const std::string& s);

struct MeasurementVector {
  std::vector<double> y;  // may contain small negative values after noise, stored unclamped
  double noise_percent = 0.0;
  NoiseMode noise_mode = NoiseMode::relative;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// y = |A x| + n, n ~ N(0, sigma^2) i.i.d.
///   absolute: sigma = percent / 100
///   relative: sigma = percent / 100 * RMS(|A x|)
MeasurementVector measure_magnitude(const MeasurementOperator& op, const ImageTensor& x, double noise_percent,
                                    NoiseMode mode, std::uint64_t seed);

}  // namespace phasegen
