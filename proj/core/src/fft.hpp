#pragma once

#include <complex>
#include <cstddef>

#include <fftw3.h>

namespace phasegen::detail {

/// Unitary 2-D DFT over an h x w x channels HWC grid, applied per channel.
/// Plans are created once; execution is thread-safe.
class Fft2d {
 public:
  Fft2d(std::size_t height, std::size_t width, std::size_t channels);
  ~Fft2d();
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  /// In place: data <- F data, with F unitary.
  void forward(std::complex<double>* data) const;
  /// In place: data <- F^H data.
  void inverse(std::complex<double>* data) const;

  [[nodiscard]] std::size_t size() const { return size_; }

 private:
  fftw_plan forward_plan_ = nullptr;
  fftw_plan inverse_plan_ = nullptr;
  std::size_t size_;
  double scale_;
};

}  // namespace phasegen::detail
