#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace phasegen {

/// Evaluation precision for generator kernels.
enum class Precision : std::uint8_t { f32, f64 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

/// Height x width x channels; data is laid out row-major HWC.
struct Shape3 {
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t c = 1;

  [[nodiscard]] constexpr std::size_t size() const { return h * w * c; }
  friend constexpr bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

/// Latent input of a generator.
using LatentVector = std::vector<double>;

/// An image (or any generator activation) with its shape.
struct ImageTensor {
  Shape3 shape;
  std::vector<double> data;

  ImageTensor() = default;
  explicit ImageTensor(Shape3 s) : shape(s), data(s.size(), 0.0) {}
  ImageTensor(Shape3 s, std::vector<double> d);

  [[nodiscard]] std::size_t size() const { return data.size(); }
  double& at(std::size_t y, std::size_t x, std::size_t ch) { return data[(y * shape.w + x) * shape.c + ch]; }
  [[nodiscard]] double at(std::size_t y, std::size_t x, std::size_t ch) const {
    return data[(y * shape.w + x) * shape.c + ch];
  }
};

/// Throws DimensionError if the two images do not share a shape.
void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what);

/// True when every entry is finite.
bool all_finite(const std::vector<double>& v);

}  // namespace phasegen
