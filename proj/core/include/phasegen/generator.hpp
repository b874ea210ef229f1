#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phasegen/types.hpp"

namespace phasegen {

/// Layer kind codes; the numeric values are the PRGW on-disk codes.
enum class LayerKind : std::uint8_t {
  dense = 0,
  reshape = 1,
  upsample2x = 2,
  conv2d = 3,
  conv2d_transpose = 4,
  batchnorm = 5,
  activation = 6,
};

/// Activation codes; the numeric values are the PRGW on-disk codes.
enum class Activation : std::uint8_t {
  identity = 0,
  relu = 1,
  tanh = 2,
  sigmoid = 3,
  elu = 4,
};

std::string to_string(LayerKind k);
std::string to_string(Activation a);

/// One stage of a sequential generator.
///
/// Parameters are held in single precision, which is also the on-disk
/// precision. Array layouts are row-major:
///   - dense: `weights[in][out]`, `bias[out]`
///   - conv2d / conv2d_transpose: `weights[k][k][in_channels][out_channels]`, `bias[out_channels]`
///   - batchnorm: `gamma`, `beta`, `mean`, `variance` of length `channels`, plus `epsilon`
///
/// Convolutions use "same" zero padding. For conv2d with stride s the output is
/// ceil(H/s) x ceil(W/s); the total padding per axis is
/// max((out-1)*s + k - in, 0) with floor(total/2) placed before. conv2d_transpose
/// with stride s produces sH x sW and places floor(max(k-s,0)/2) padding before,
/// so that it is the exact adjoint of the matching strided conv2d.
struct Layer {
  LayerKind kind = LayerKind::activation;
  Activation activation = Activation::identity;

  std::size_t in = 0;   // dense
  std::size_t out = 0;  // dense
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  Shape3 target;        // reshape
  std::size_t channels = 0;  // batchnorm

  std::vector<float> weights;
  std::vector<float> bias;
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> mean;
  std::vector<float> variance;
  float epsilon = 1e-3f;

  static Layer make_dense(std::size_t in, std::size_t out, std::vector<float> w, std::vector<float> b);
  static Layer make_reshape(Shape3 target);
  static Layer make_upsample2x();
  static Layer make_conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                           std::size_t stride, std::vector<float> w, std::vector<float> b);
  static Layer make_conv2d_transpose(std::size_t in_channels, std::size_t out_channels,
                                     std::size_t kernel, std::size_t stride, std::vector<float> w,
                                     std::vector<float> b);
  static Layer make_batchnorm(std::vector<float> gamma, std::vector<float> beta, std::vector<float> mean,
                              std::vector<float> variance, float epsilon);
  static Layer make_activation(Activation a);
};

namespace detail {
template <class T>
struct LayerParams {
  std::vector<T> weights;
  std::vector<T> bias;   // batchnorm: beta
  std::vector<T> mean;   // batchnorm
  std::vector<T> scale;  // batchnorm: gamma / sqrt(variance + epsilon)
};
}  // namespace detail

/// An immutable, validated sequential generator G: R^k -> R^(h*w*c).
class GeneratorModel {
 public:
  /// Validates shapes, parameter lengths and finiteness.
  /// Throws ModelValidationError on any inconsistency.
  GeneratorModel(std::size_t input_dim, std::vector<Layer> layers);

  [[nodiscard]] std::size_t input_dim() const { return input_dim_; }
  [[nodiscard]] Shape3 output_shape() const { return shapes_.back(); }
  [[nodiscard]] std::size_t output_size() const { return shapes_.back().size(); }
  [[nodiscard]] std::span<const Layer> layers() const { return layers_; }
  /// Shape entering layer i; index layers().size() gives the output shape.
  [[nodiscard]] Shape3 shape_before(std::size_t i) const { return shapes_[i]; }

  template <class T>
  [[nodiscard]] const detail::LayerParams<T>& params(std::size_t i) const;

 private:
  std::size_t input_dim_;
  std::vector<Layer> layers_;
  std::vector<Shape3> shapes_;
  std::vector<detail::LayerParams<float>> params32_;
  std::vector<detail::LayerParams<double>> params64_;
};

/// Forward/backward evaluation with reusable activation storage.
///
/// One evaluator per thread; the model itself is shared read-only.
template <class T>
class GeneratorEvaluator {
 public:
  explicit GeneratorEvaluator(const GeneratorModel& model);

  /// Runs the model and records every intermediate activation.
  std::span<const T> forward(std::span<const T> z);

  /// J^T * cotangent at the point of the last forward() call.
  std::span<const T> backward(std::span<const T> cotangent);

  [[nodiscard]] const GeneratorModel& model() const { return *model_; }

 private:
  const GeneratorModel* model_;
  std::vector<std::vector<T>> acts_;
  std::vector<T> grad_in_;
  std::vector<T> grad_out_;
  bool has_forward_ = false;
};

extern template class GeneratorEvaluator<float>;
extern template class GeneratorEvaluator<double>;

/// G(z). Throws DimensionError if z has the wrong length.
ImageTensor forward(const GeneratorModel& model, const LatentVector& z, Precision p = Precision::f32);

/// J(z)^T * cotangent. Throws DimensionError on length or shape mismatch.
LatentVector vjp(const GeneratorModel& model, const LatentVector& z, const ImageTensor& cotangent,
                 Precision p = Precision::f32);

enum class SyntheticArch : std::uint8_t { mlp, dcgan };

std::string to_string(SyntheticArch a);
SyntheticArch parse_synthetic_arch(const std::string& s);

/// Parameters of a seeded pseudo-random generator.
///
/// `mlp`:   dense(k->hidden), batchnorm, tanh, dense(hidden->n), sigmoid, reshape(h,w,c)
/// `dcgan`: dense(k->(h/4)(w/4)*hidden), batchnorm, relu, reshape, upsample2x,
///          conv2d 3x3, batchnorm, elu, conv2d_transpose 4x4 stride 2, sigmoid
///          (requires h and w divisible by 4)
struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t latent_dim = 10;
  Shape3 output{16, 16, 1};
  SyntheticArch arch = SyntheticArch::mlp;
  std::size_t hidden = 64;
};

GeneratorModel make_synthetic_generator(const SyntheticSpec& spec);

/// The grayscale 28x28 architecture (latent 40) with seeded random weights:
/// dense 1024, BN, ReLU, dense 6272, BN, ReLU, reshape 7x7x128, upsample,
/// conv 64 5x5, BN, ReLU, upsample, conv 1 5x5, BN, tanh.
GeneratorModel make_mnist_dcgan_generator(std::uint64_t seed);

}  // namespace phasegen
