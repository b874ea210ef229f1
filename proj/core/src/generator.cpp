#include "phasegen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "phasegen/error.hpp"
#include "phasegen/rng.hpp"

namespace phasegen {

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::reshape: return "reshape";
    case LayerKind::upsample2x: return "upsample2x";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv2d_transpose: return "conv2d_transpose";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::activation: return "activation";
  }
  return "unknown";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::elu: return "elu";
  }
  return "unknown";
}

Layer Layer::make_dense(std::size_t in, std::size_t out, std::vector<float> w, std::vector<float> b) {
  Layer l;
  l.kind = LayerKind::dense;
  l.in = in;
  l.out = out;
  l.weights = std::move(w);
  l.bias = std::move(b);
  return l;
}

Layer Layer::make_reshape(Shape3 target) {
  Layer l;
  l.kind = LayerKind::reshape;
  l.target = target;
  return l;
}

Layer Layer::make_upsample2x() {
  Layer l;
  l.kind = LayerKind::upsample2x;
  return l;
}

Layer Layer::make_conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                         std::size_t stride, std::vector<float> w, std::vector<float> b) {
  Layer l;
  l.kind = LayerKind::conv2d;
  l.in_channels = in_channels;
  l.out_channels = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  l.weights = std::move(w);
  l.bias = std::move(b);
  return l;
}

Layer Layer::make_conv2d_transpose(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                   std::size_t stride, std::vector<float> w, std::vector<float> b) {
  Layer l = make_conv2d(in_channels, out_channels, kernel, stride, std::move(w), std::move(b));
  l.kind = LayerKind::conv2d_transpose;
  return l;
}

Layer Layer::make_batchnorm(std::vector<float> gamma, std::vector<float> beta, std::vector<float> mean,
                            std::vector<float> variance, float epsilon) {
  Layer l;
  l.kind = LayerKind::batchnorm;
  l.channels = gamma.size();
  l.gamma = std::move(gamma);
  l.beta = std::move(beta);
  l.mean = std::move(mean);
  l.variance = std::move(variance);
  l.epsilon = epsilon;
  return l;
}

Layer Layer::make_activation(Activation a) {
  Layer l;
  l.kind = LayerKind::activation;
  l.activation = a;
  return l;
}

namespace {

[[noreturn]] void invalid(std::size_t index, const Layer& layer, const std::string& msg) {
  throw ModelValidationError("layer " + std::to_string(index) + " (" + to_string(layer.kind) + "): " + msg);
}

void expect_len(std::size_t index, const Layer& layer, const char* name, std::size_t got, std::size_t want) {
  if (got != want) {
    invalid(index, layer,
            std::string(name) + " has " + std::to_string(got) + " entries, expected " + std::to_string(want));
  }
}

void expect_finite(std::size_t index, const Layer& layer, const char* name, const std::vector<float>& v) {
  if (!std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); })) {
    invalid(index, layer, std::string(name) + " contains a non-finite value");
  }
}

std::size_t conv_pad_before(std::size_t in, std::size_t out, std::size_t k, std::size_t s) {
  const std::ptrdiff_t total =
      std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>((out - 1) * s + k) - static_cast<std::ptrdiff_t>(in), 0);
  return static_cast<std::size_t>(total / 2);
}

std::size_t convt_pad_before(std::size_t k, std::size_t s) { return (k > s ? k - s : 0) / 2; }

Shape3 propagate(std::size_t index, const Layer& l, Shape3 in) {
  switch (l.kind) {
    case LayerKind::dense:
      if (l.in != in.size()) {
        invalid(index, l, "input size " + std::to_string(l.in) + " does not match incoming " + to_string(in));
      }
      if (l.out == 0) invalid(index, l, "output size must be positive");
      expect_len(index, l, "weights", l.weights.size(), l.in * l.out);
      expect_len(index, l, "bias", l.bias.size(), l.out);
      return {1, 1, l.out};
    case LayerKind::reshape:
      if (l.target.size() != in.size()) {
        invalid(index, l, "cannot reshape " + to_string(in) + " to " + to_string(l.target));
      }
      return l.target;
    case LayerKind::upsample2x:
      return {in.h * 2, in.w * 2, in.c};
    case LayerKind::conv2d:
    case LayerKind::conv2d_transpose: {
      if (l.kernel < 1) invalid(index, l, "kernel size must be >= 1");
      if (l.stride < 1) invalid(index, l, "stride must be >= 1");
      if (l.out_channels == 0) invalid(index, l, "filter count must be positive");
      if (l.in_channels != in.c) {
        invalid(index, l,
                "declares " + std::to_string(l.in_channels) + " input channels but receives " + to_string(in));
      }
      expect_len(index, l, "kernel array", l.weights.size(), l.kernel * l.kernel * l.in_channels * l.out_channels);
      expect_len(index, l, "bias", l.bias.size(), l.out_channels);
      if (l.kind == LayerKind::conv2d) {
        return {(in.h + l.stride - 1) / l.stride, (in.w + l.stride - 1) / l.stride, l.out_channels};
      }
      return {in.h * l.stride, in.w * l.stride, l.out_channels};
    }
    case LayerKind::batchnorm:
      if (l.channels != in.c) {
        invalid(index, l, "has " + std::to_string(l.channels) + " channels but receives " + to_string(in));
      }
      expect_len(index, l, "gamma", l.gamma.size(), l.channels);
      expect_len(index, l, "beta", l.beta.size(), l.channels);
      expect_len(index, l, "mean", l.mean.size(), l.channels);
      expect_len(index, l, "variance", l.variance.size(), l.channels);
      if (!std::isfinite(l.epsilon) || l.epsilon < 0.0f) invalid(index, l, "epsilon must be finite and >= 0");
      for (std::size_t c = 0; c < l.channels; ++c) {
        if (l.variance[c] < 0.0f) invalid(index, l, "running variance is negative");
        if (l.variance[c] + l.epsilon <= 0.0f) invalid(index, l, "variance + epsilon must be positive");
      }
      return in;
    case LayerKind::activation:
      if (static_cast<unsigned>(l.activation) > static_cast<unsigned>(Activation::elu)) {
        invalid(index, l, "unknown activation code");
      }
      return in;
  }
  invalid(index, l, "unknown layer kind");
}

template <class T>
detail::LayerParams<T> convert_params(const Layer& l) {
  detail::LayerParams<T> p;
  p.weights.assign(l.weights.begin(), l.weights.end());
  if (l.kind == LayerKind::batchnorm) {
    p.bias.assign(l.beta.begin(), l.beta.end());
    p.mean.assign(l.mean.begin(), l.mean.end());
    p.scale.resize(l.channels);
    for (std::size_t c = 0; c < l.channels; ++c) {
      p.scale[c] = static_cast<T>(l.gamma[c]) /
                   std::sqrt(static_cast<T>(l.variance[c]) + static_cast<T>(l.epsilon));
    }
  } else {
    p.bias.assign(l.bias.begin(), l.bias.end());
  }
  return p;
}

}  // namespace

GeneratorModel::GeneratorModel(std::size_t input_dim, std::vector<Layer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
  if (input_dim_ == 0) throw ModelValidationError("latent dimension must be positive");
  shapes_.reserve(layers_.size() + 1);
  shapes_.push_back({1, 1, input_dim_});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    shapes_.push_back(propagate(i, l, shapes_.back()));
    expect_finite(i, l, "weights", l.weights);
    expect_finite(i, l, "bias", l.bias);
    expect_finite(i, l, "gamma", l.gamma);
    expect_finite(i, l, "beta", l.beta);
    expect_finite(i, l, "mean", l.mean);
    expect_finite(i, l, "variance", l.variance);
    params32_.push_back(convert_params<float>(l));
    params64_.push_back(convert_params<double>(l));
  }
}

template <>
const detail::LayerParams<float>& GeneratorModel::params<float>(std::size_t i) const {
  return params32_[i];
}

template <>
const detail::LayerParams<double>& GeneratorModel::params<double>(std::size_t i) const {
  return params64_[i];
}

namespace {

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
void apply_activation(Activation a, std::span<const T> in, std::span<T> out) {
  const std::size_t n = in.size();
  switch (a) {
    case Activation::identity:
      std::copy(in.begin(), in.end(), out.begin());
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid(in[i]);
      break;
    case Activation::elu:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : std::expm1(in[i]);
      break;
  }
}

// Subgradient at exactly 0 is 0 for relu and elu.
template <class T>
void activation_backward(Activation a, std::span<const T> in, std::span<const T> out, std::span<const T> g,
                         std::span<T> gin) {
  const std::size_t n = in.size();
  switch (a) {
    case Activation::identity:
      std::copy(g.begin(), g.end(), gin.begin());
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) gin[i] = in[i] > T(0) ? g[i] : T(0);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < n; ++i) gin[i] = g[i] * (T(1) - out[i] * out[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < n; ++i) gin[i] = g[i] * out[i] * (T(1) - out[i]);
      break;
    case Activation::elu:
      for (std::size_t i = 0; i < n; ++i) {
        gin[i] = in[i] > T(0) ? g[i] : (in[i] < T(0) ? g[i] * (out[i] + T(1)) : T(0));
      }
      break;
  }
}

template <class T>
void dense_forward(const Layer& l, const detail::LayerParams<T>& p, std::span<const T> in, std::span<T> out) {
  std::copy(p.bias.begin(), p.bias.end(), out.begin());
  for (std::size_t i = 0; i < l.in; ++i) {
    const T xi = in[i];
    if (xi == T(0)) continue;
    const T* row = p.weights.data() + i * l.out;
    for (std::size_t j = 0; j < l.out; ++j) out[j] += xi * row[j];
  }
}

template <class T>
void dense_backward(const Layer& l, const detail::LayerParams<T>& p, std::span<const T> g, std::span<T> gin) {
  for (std::size_t i = 0; i < l.in; ++i) {
    const T* row = p.weights.data() + i * l.out;
    T acc = T(0);
    for (std::size_t j = 0; j < l.out; ++j) acc += row[j] * g[j];
    gin[i] = acc;
  }
}

template <class T>
void upsample_forward(Shape3 s, std::span<const T> in, std::span<T> out) {
  const std::size_t ow = s.w * 2;
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      const T* src = in.data() + (y * s.w + x) * s.c;
      for (std::size_t dy = 0; dy < 2; ++dy) {
        for (std::size_t dx = 0; dx < 2; ++dx) {
          T* dst = out.data() + ((2 * y + dy) * ow + 2 * x + dx) * s.c;
          std::copy(src, src + s.c, dst);
        }
      }
    }
  }
}

template <class T>
void upsample_backward(Shape3 s, std::span<const T> g, std::span<T> gin) {
  const std::size_t ow = s.w * 2;
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      T* dst = gin.data() + (y * s.w + x) * s.c;
      for (std::size_t c = 0; c < s.c; ++c) {
        dst[c] = g[((2 * y) * ow + 2 * x) * s.c + c] + g[((2 * y) * ow + 2 * x + 1) * s.c + c] +
                 g[((2 * y + 1) * ow + 2 * x) * s.c + c] + g[((2 * y + 1) * ow + 2 * x + 1) * s.c + c];
      }
    }
  }
}

// Shared index walk for conv2d and conv2d_transpose. `visit(in_index, out_index, kernel_row)`
// is called for every (input pixel, output pixel, kernel tap) triple; kernel_row points at
// weights[ky][kx][0][0].
template <class Visit>
void conv_walk(const Layer& l, Shape3 in, Shape3 out, Visit&& visit) {
  const std::size_t k = l.kernel;
  const std::size_t s = l.stride;
  if (l.kind == LayerKind::conv2d) {
    const auto pt = static_cast<std::ptrdiff_t>(conv_pad_before(in.h, out.h, k, s));
    const auto pl = static_cast<std::ptrdiff_t>(conv_pad_before(in.w, out.w, k, s));
    for (std::size_t oy = 0; oy < out.h; ++oy) {
      for (std::size_t ox = 0; ox < out.w; ++ox) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) - pt;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) - pl;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
            visit((static_cast<std::size_t>(iy) * in.w + static_cast<std::size_t>(ix)) * in.c,
                  (oy * out.w + ox) * out.c, (ky * k + kx) * in.c * out.c);
          }
        }
      }
    }
  } else {
    const auto pt = static_cast<std::ptrdiff_t>(convt_pad_before(k, s));
    for (std::size_t iy = 0; iy < in.h; ++iy) {
      for (std::size_t ix = 0; ix < in.w; ++ix) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * s + ky) - pt;
          if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(out.h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * s + kx) - pt;
            if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(out.w)) continue;
            visit((iy * in.w + ix) * in.c,
                  (static_cast<std::size_t>(oy) * out.w + static_cast<std::size_t>(ox)) * out.c,
                  (ky * k + kx) * in.c * out.c);
          }
        }
      }
    }
  }
}

template <class T>
void conv_forward(const Layer& l, const detail::LayerParams<T>& p, Shape3 in_shape, Shape3 out_shape,
                  std::span<const T> in, std::span<T> out) {
  const std::size_t cin = in_shape.c;
  const std::size_t cout = out_shape.c;
  for (std::size_t i = 0; i < out_shape.h * out_shape.w; ++i) {
    std::copy(p.bias.begin(), p.bias.end(), out.begin() + static_cast<std::ptrdiff_t>(i * cout));
  }
  const T* w = p.weights.data();
  conv_walk(l, in_shape, out_shape, [&](std::size_t ii, std::size_t oi, std::size_t ki) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T x = in[ii + ci];
      const T* wr = w + ki + ci * cout;
      T* o = out.data() + oi;
      for (std::size_t co = 0; co < cout; ++co) o[co] += x * wr[co];
    }
  });
}

template <class T>
void conv_backward(const Layer& l, const detail::LayerParams<T>& p, Shape3 in_shape, Shape3 out_shape,
                   std::span<const T> g, std::span<T> gin) {
  const std::size_t cin = in_shape.c;
  const std::size_t cout = out_shape.c;
  std::fill(gin.begin(), gin.end(), T(0));
  const T* w = p.weights.data();
  conv_walk(l, in_shape, out_shape, [&](std::size_t ii, std::size_t oi, std::size_t ki) {
    const T* go = g.data() + oi;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* wr = w + ki + ci * cout;
      T acc = T(0);
      for (std::size_t co = 0; co < cout; ++co) acc += go[co] * wr[co];
      gin[ii + ci] += acc;
    }
  });
}

template <class T>
void batchnorm_forward(const detail::LayerParams<T>& p, std::size_t channels, std::span<const T> in,
                       std::span<T> out) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t c = i % channels;
    out[i] = p.scale[c] * (in[i] - p.mean[c]) + p.bias[c];
  }
}

template <class T>
void batchnorm_backward(const detail::LayerParams<T>& p, std::size_t channels, std::span<const T> g,
                        std::span<T> gin) {
  for (std::size_t i = 0; i < g.size(); ++i) gin[i] = g[i] * p.scale[i % channels];
}

}  // namespace

template <class T>
GeneratorEvaluator<T>::GeneratorEvaluator(const GeneratorModel& model) : model_(&model) {
  const auto n = model.layers().size();
  acts_.resize(n + 1);
  std::size_t widest = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    acts_[i].resize(model.shape_before(i).size());
    widest = std::max(widest, acts_[i].size());
  }
  grad_in_.resize(widest);
  grad_out_.resize(widest);
}

template <class T>
std::span<const T> GeneratorEvaluator<T>::forward(std::span<const T> z) {
  const GeneratorModel& m = *model_;
  if (z.size() != m.input_dim()) {
    throw DimensionError("latent vector has length " + std::to_string(z.size()) + ", generator expects " +
                         std::to_string(m.input_dim()));
  }
  std::copy(z.begin(), z.end(), acts_[0].begin());
  const auto layers = m.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    const auto& p = m.template params<T>(i);
    std::span<const T> in(acts_[i]);
    std::span<T> out(acts_[i + 1]);
    switch (l.kind) {
      case LayerKind::dense: dense_forward(l, p, in, out); break;
      case LayerKind::reshape: std::copy(in.begin(), in.end(), out.begin()); break;
      case LayerKind::upsample2x: upsample_forward(m.shape_before(i), in, out); break;
      case LayerKind::conv2d:
      case LayerKind::conv2d_transpose:
        conv_forward(l, p, m.shape_before(i), m.shape_before(i + 1), in, out);
        break;
      case LayerKind::batchnorm: batchnorm_forward(p, l.channels, in, out); break;
      case LayerKind::activation: apply_activation(l.activation, in, out); break;
    }
  }
  has_forward_ = true;
  return acts_.back();
}

template <class T>
std::span<const T> GeneratorEvaluator<T>::backward(std::span<const T> cotangent) {
  const GeneratorModel& m = *model_;
  if (!has_forward_) throw Error("GeneratorEvaluator::backward called before forward");
  if (cotangent.size() != m.output_size()) {
    throw DimensionError("cotangent has length " + std::to_string(cotangent.size()) + ", generator output is " +
                         to_string(m.output_shape()));
  }
  std::copy(cotangent.begin(), cotangent.end(), grad_out_.begin());
  const auto layers = m.layers();
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Layer& l = layers[i];
    const auto& p = m.template params<T>(i);
    const std::size_t n_in = acts_[i].size();
    const std::size_t n_out = acts_[i + 1].size();
    std::span<const T> g(grad_out_.data(), n_out);
    std::span<T> gin(grad_in_.data(), n_in);
    switch (l.kind) {
      case LayerKind::dense: dense_backward(l, p, g, gin); break;
      case LayerKind::reshape: std::copy(g.begin(), g.end(), gin.begin()); break;
      case LayerKind::upsample2x: upsample_backward(m.shape_before(i), g, gin); break;
      case LayerKind::conv2d:
      case LayerKind::conv2d_transpose:
        conv_backward(l, p, m.shape_before(i), m.shape_before(i + 1), g, gin);
        break;
      case LayerKind::batchnorm: batchnorm_backward(p, l.channels, g, gin); break;
      case LayerKind::activation:
        activation_backward<T>(l.activation, acts_[i], acts_[i + 1], g, gin);
        break;
    }
    std::swap(grad_in_, grad_out_);
  }
  return {grad_out_.data(), m.input_dim()};
}

template class GeneratorEvaluator<float>;
template class GeneratorEvaluator<double>;

namespace {

template <class T>
ImageTensor forward_as(const GeneratorModel& model, const LatentVector& z) {
  GeneratorEvaluator<T> ev(model);
  std::vector<T> zt(z.begin(), z.end());
  auto out = ev.forward(zt);
  return ImageTensor(model.output_shape(), std::vector<double>(out.begin(), out.end()));
}

template <class T>
LatentVector vjp_as(const GeneratorModel& model, const LatentVector& z, const ImageTensor& cotangent) {
  GeneratorEvaluator<T> ev(model);
  std::vector<T> zt(z.begin(), z.end());
  ev.forward(zt);
  std::vector<T> ct(cotangent.data.begin(), cotangent.data.end());
  auto g = ev.backward(ct);
  return LatentVector(g.begin(), g.end());
}

}  // namespace

ImageTensor forward(const GeneratorModel& model, const LatentVector& z, Precision p) {
  if (z.size() != model.input_dim()) {
    throw DimensionError("latent vector has length " + std::to_string(z.size()) + ", generator expects " +
                         std::to_string(model.input_dim()));
  }
  return p == Precision::f64 ? forward_as<double>(model, z) : forward_as<float>(model, z);
}

LatentVector vjp(const GeneratorModel& model, const LatentVector& z, const ImageTensor& cotangent, Precision p) {
  if (z.size() != model.input_dim()) {
    throw DimensionError("latent vector has length " + std::to_string(z.size()) + ", generator expects " +
                         std::to_string(model.input_dim()));
  }
  if (cotangent.shape != model.output_shape() || cotangent.data.size() != model.output_size()) {
    throw DimensionError("cotangent shape " + to_string(cotangent.shape) + " does not match generator output " +
                         to_string(model.output_shape()));
  }
  return p == Precision::f64 ? vjp_as<double>(model, z, cotangent) : vjp_as<float>(model, z, cotangent);
}

// ---------------------------------------------------------------------------
// Synthetic generators

std::string to_string(SyntheticArch a) { return a == SyntheticArch::mlp ? "mlp" : "dcgan"; }

SyntheticArch parse_synthetic_arch(const std::string& s) {
  if (s == "mlp") return SyntheticArch::mlp;
  if (s == "dcgan") return SyntheticArch::dcgan;
  throw ConfigError("unknown synthetic architecture '" + s + "' (expected mlp or dcgan)");
}

namespace {

class WeightDraw {
 public:
  explicit WeightDraw(std::uint64_t seed) : rng_(seed) {}

  std::vector<float> normal(std::size_t n, double sd) {
    std::normal_distribution<double> d(0.0, sd);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(d(rng_));
    return v;
  }

  std::vector<float> uniform(std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(d(rng_));
    return v;
  }

  Layer dense(std::size_t in, std::size_t out, double gain) {
    auto w = normal(in * out, gain / std::sqrt(static_cast<double>(in)));
    return Layer::make_dense(in, out, std::move(w), normal(out, 0.1));
  }

  Layer conv(LayerKind kind, std::size_t cin, std::size_t cout, std::size_t k, std::size_t s, double gain) {
    auto w = normal(k * k * cin * cout, gain / std::sqrt(static_cast<double>(k * k * cin)));
    auto b = normal(cout, 0.1);
    return kind == LayerKind::conv2d ? Layer::make_conv2d(cin, cout, k, s, std::move(w), std::move(b))
                                     : Layer::make_conv2d_transpose(cin, cout, k, s, std::move(w), std::move(b));
  }

  // Near-identity inference statistics.
  Layer batchnorm(std::size_t c) {
    return Layer::make_batchnorm(uniform(c, 0.8, 1.2), normal(c, 0.1), normal(c, 0.1), uniform(c, 0.8, 1.2),
                                 1e-3f);
  }

 private:
  Rng rng_;
};

}  // namespace

GeneratorModel make_synthetic_generator(const SyntheticSpec& spec) {
  if (spec.latent_dim == 0 || spec.output.size() == 0 || spec.hidden == 0) {
    throw ConfigError("synthetic generator dimensions must be positive");
  }
  WeightDraw draw(mix_seed(spec.seed, {0x5e7e7a7e}));
  std::vector<Layer> layers;
  const std::size_t k = spec.latent_dim;
  const Shape3 out = spec.output;
  if (spec.arch == SyntheticArch::mlp) {
    layers.push_back(draw.dense(k, spec.hidden, 1.0));
    layers.push_back(draw.batchnorm(spec.hidden));
    layers.push_back(Layer::make_activation(Activation::tanh));
    // Output gain spreads the pre-sigmoid values so pixels cover most of (0, 1).
    layers.push_back(draw.dense(spec.hidden, out.size(), 3.0));
    layers.push_back(Layer::make_activation(Activation::sigmoid));
    layers.push_back(Layer::make_reshape(out));
  } else {
    if (out.h % 4 != 0 || out.w % 4 != 0) {
      throw ConfigError("dcgan synthetic generator needs height and width divisible by 4");
    }
    const std::size_t ch = spec.hidden;
    const Shape3 seed_shape{out.h / 4, out.w / 4, ch};
    layers.push_back(draw.dense(k, seed_shape.size(), 1.0));
    layers.push_back(draw.batchnorm(seed_shape.size()));
    layers.push_back(Layer::make_activation(Activation::relu));
    layers.push_back(Layer::make_reshape(seed_shape));
    layers.push_back(Layer::make_upsample2x());
    const std::size_t mid = std::max<std::size_t>(ch / 2, 1);
    layers.push_back(draw.conv(LayerKind::conv2d, ch, mid, 3, 1, 1.4));
    layers.push_back(draw.batchnorm(mid));
    layers.push_back(Layer::make_activation(Activation::elu));
    layers.push_back(draw.conv(LayerKind::conv2d_transpose, mid, out.c, 4, 2, 2.0));
    layers.push_back(Layer::make_activation(Activation::sigmoid));
  }
  return GeneratorModel(k, std::move(layers));
}

GeneratorModel make_mnist_dcgan_generator(std::uint64_t seed) {
  WeightDraw draw(mix_seed(seed, {0x3a1e28}));
  std::vector<Layer> layers;
  layers.push_back(draw.dense(40, 1024, 1.4));
  layers.push_back(draw.batchnorm(1024));
  layers.push_back(Layer::make_activation(Activation::relu));
  layers.push_back(draw.dense(1024, 6272, 1.4));
  layers.push_back(draw.batchnorm(6272));
  layers.push_back(Layer::make_activation(Activation::relu));
  layers.push_back(Layer::make_reshape({7, 7, 128}));
  layers.push_back(Layer::make_upsample2x());
  layers.push_back(draw.conv(LayerKind::conv2d, 128, 64, 5, 1, 1.4));
  layers.push_back(draw.batchnorm(64));
  layers.push_back(Layer::make_activation(Activation::relu));
  layers.push_back(Layer::make_upsample2x());
  layers.push_back(draw.conv(LayerKind::conv2d, 64, 1, 5, 1, 1.0));
  layers.push_back(draw.batchnorm(1));
  layers.push_back(Layer::make_activation(Activation::tanh));
  return GeneratorModel(40, std::move(layers));
}

}  // namespace phasegen
