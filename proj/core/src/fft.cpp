#include "fft.hpp"

#include <cmath>
#include <mutex>
#include <vector>

#include "phasegen/error.hpp"

namespace phasegen::detail {

namespace {
// The FFTW planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft2d::Fft2d(std::size_t height, std::size_t width, std::size_t channels)
    : size_(height * width * channels), scale_(1.0 / std::sqrt(static_cast<double>(height * width))) {
  if (height == 0 || width == 0 || channels == 0) throw ConfigError("FFT grid dimensions must be positive");
  std::vector<std::complex<double>> scratch(size_);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  const int dims[2] = {static_cast<int>(height), static_cast<int>(width)};
  const int howmany = static_cast<int>(channels);
  const int stride = static_cast<int>(channels);
  std::lock_guard lock(planner_mutex());
  forward_plan_ = fftw_plan_many_dft(2, dims, howmany, buf, nullptr, stride, 1, buf, nullptr, stride, 1,
                                     FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  inverse_plan_ = fftw_plan_many_dft(2, dims, howmany, buf, nullptr, stride, 1, buf, nullptr, stride, 1,
                                     FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (forward_plan_ == nullptr || inverse_plan_ == nullptr) throw Error("FFTW planning failed");
}

Fft2d::~Fft2d() {
  std::lock_guard lock(planner_mutex());
  if (forward_plan_ != nullptr) fftw_destroy_plan(forward_plan_);
  if (inverse_plan_ != nullptr) fftw_destroy_plan(inverse_plan_);
}

void Fft2d::forward(std::complex<double>* data) const {
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(forward_plan_, buf, buf);
  for (std::size_t i = 0; i < size_; ++i) data[i] *= scale_;
}

void Fft2d::inverse(std::complex<double>* data) const {
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(inverse_plan_, buf, buf);
  for (std::size_t i = 0; i < size_; ++i) data[i] *= scale_;
}

}  // namespace phasegen::detail
