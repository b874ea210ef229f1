#include "phasegen/types.hpp"

#include <algorithm>
#include <cmath>

#include "phasegen/error.hpp"

namespace phasegen {

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + s + "' (expected f32 or f64)");
}

std::string to_string(const Shape3& s) {
  return std::to_string(s.h) + "x" + std::to_string(s.w) + "x" + std::to_string(s.c);
}

ImageTensor::ImageTensor(Shape3 s, std::vector<double> d) : shape(s), data(std::move(d)) {
  if (data.size() != shape.size()) {
    throw DimensionError("image data has " + std::to_string(data.size()) + " values, shape " + to_string(shape) +
                         " needs " + std::to_string(shape.size()));
  }
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (a.shape != b.shape || a.data.size() != b.data.size()) {
    throw DimensionError(std::string(what) + ": shape " + to_string(a.shape) + " vs " + to_string(b.shape));
  }
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace phasegen
