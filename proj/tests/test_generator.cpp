#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <thread>

#include "oracles/oracles.hpp"
#include "phasegen/error.hpp"
#include "phasegen/generator.hpp"
#include "phasegen/rng.hpp"
#include "phasegen/solver.hpp"
#include "test_support.hpp"

using namespace phasegen;
using testing_support::randn;
using testing_support::randn_f;

namespace {

double inner(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double fd_vjp_error(const GeneratorModel& model, const LatentVector& z, const ImageTensor& v) {
  const auto g = vjp(model, z, v, Precision::f64);
  const auto fd = oracle::central_gradient(
      [&](const std::vector<double>& zz) { return inner(forward(model, zz, Precision::f64).data, v.data); }, z, 1e-5);
  return oracle::rel_error(g, fd);
}

GeneratorModel single_layer_model(std::size_t k, Layer body, Shape3 in_shape) {
  std::vector<Layer> layers;
  if (in_shape.size() != k || in_shape.h != 1 || in_shape.w != 1) layers.push_back(Layer::make_reshape(in_shape));
  layers.push_back(std::move(body));
  return GeneratorModel(k, std::move(layers));
}

}  // namespace

TEST(Generator, IdentityDenseReturnsLatent) {
  GeneratorModel model(2, {Layer::make_dense(2, 2, {1, 0, 0, 1}, {0, 0})});
  const auto x = forward(model, {0.3, -0.7}, Precision::f64);
  EXPECT_EQ(x.shape, (Shape3{1, 1, 2}));
  EXPECT_DOUBLE_EQ(x.data[0], 0.3);
  EXPECT_DOUBLE_EQ(x.data[1], -0.7);
}

TEST(Generator, ZeroWeightsGiveBias) {
  GeneratorModel model(3, {Layer::make_dense(3, 4, std::vector<float>(12, 0.0f), {1.5f, -2.f, 0.25f, 3.f}),
                           Layer::make_reshape({2, 2, 1})});
  const auto x = forward(model, {9.0, -4.0, 2.0}, Precision::f64);
  EXPECT_EQ(x.shape, (Shape3{2, 2, 1}));
  EXPECT_EQ(x.data, (std::vector<double>{1.5, -2.0, 0.25, 3.0}));
}

TEST(Generator, DeclaredShapesAreForced) {
  GeneratorModel model(2, {Layer::make_dense(2, 4, randn_f(8, 1), randn_f(4, 2)),
                           Layer::make_activation(Activation::tanh), Layer::make_reshape({2, 2, 1})});
  EXPECT_EQ(model.input_dim(), 2U);
  EXPECT_EQ(model.output_shape(), (Shape3{2, 2, 1}));
}

TEST(Generator, TableOneArchitectureShape) {
  const auto model = make_mnist_dcgan_generator(3);
  EXPECT_EQ(model.input_dim(), 40U);
  EXPECT_EQ(model.output_shape(), (Shape3{28, 28, 1}));
  const auto x = forward(model, draw_latent(40, LatentPrior::uniform, 5));
  for (double v : x.data) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Generator, ValidationRejectsBadModels) {
  // Kernel array of the wrong length.
  EXPECT_THROW(GeneratorModel(4, {Layer::make_reshape({2, 2, 1}),
                                  Layer::make_conv2d(1, 2, 3, 1, std::vector<float>(17, 0.1f), {0, 0})}),
               ModelValidationError);
  // Incompatible chain.
  EXPECT_THROW(GeneratorModel(3, {Layer::make_dense(2, 2, {1, 0, 0, 1}, {0, 0})}), ModelValidationError);
  EXPECT_THROW(GeneratorModel(4, {Layer::make_reshape({3, 1, 1})}), ModelValidationError);
  // Non-finite weight.
  EXPECT_THROW(GeneratorModel(2, {Layer::make_dense(2, 1, {1.0f, NAN}, {0})}), ModelValidationError);
  // Negative running variance.
  EXPECT_THROW(GeneratorModel(2, {Layer::make_batchnorm({1, 1}, {0, 0}, {0, 0}, {1, -0.5f}, 1e-3f)}),
               ModelValidationError);
  // Stride 0.
  EXPECT_THROW(GeneratorModel(4, {Layer::make_reshape({2, 2, 1}),
                                  Layer::make_conv2d(1, 1, 1, 0, {1.0f}, {0.0f})}),
               ModelValidationError);
}

TEST(Generator, ForwardRejectsWrongLatentLength) {
  const auto model = testing_support::small_mlp(4, {4, 4, 1});
  EXPECT_THROW(forward(model, {1.0, 2.0}), DimensionError);
  EXPECT_THROW(vjp(model, {1.0, 2.0}, ImageTensor({4, 4, 1})), DimensionError);
  EXPECT_THROW(vjp(model, {1, 2, 3, 4}, ImageTensor({4, 4, 2})), DimensionError);
}

TEST(Generator, SyntheticModelMatchesReferenceEvaluation) {
  SyntheticSpec spec;  // seed 7, k = 10, 16x16x1
  const auto model = make_synthetic_generator(spec);
  const auto z = draw_latent(10, LatentPrior::standard_normal, 11);
  const auto x = forward(model, z, Precision::f64);
  const auto ref = oracle::reference_forward(model, z);
  EXPECT_LT(oracle::rel_error(x.data, ref), 1e-12);
}

TEST(Generator, ConvolutionalModelsMatchReferenceEvaluation) {
  SyntheticSpec spec;
  spec.arch = SyntheticArch::dcgan;
  spec.output = {16, 12, 3};
  spec.hidden = 8;
  const auto model = make_synthetic_generator(spec);
  EXPECT_EQ(model.output_shape(), (Shape3{16, 12, 3}));
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto z = draw_latent(10, LatentPrior::standard_normal, s);
    EXPECT_LT(oracle::rel_error(forward(model, z, Precision::f64).data, oracle::reference_forward(model, z)), 1e-12);
  }
  const auto mnist = make_mnist_dcgan_generator(1);
  const auto z = draw_latent(40, LatentPrior::uniform, 2);
  EXPECT_LT(oracle::rel_error(forward(mnist, z, Precision::f64).data, oracle::reference_forward(mnist, z)), 1e-12);
}

TEST(Generator, StridedAndOddKernelConvolutionsMatchReference) {
  // conv2d stride 2 with odd input size; transpose with k < s and k = s + 3.
  const std::vector<std::tuple<LayerKind, std::size_t, std::size_t, Shape3>> cases = {
      {LayerKind::conv2d, 3, 2, {5, 7, 2}},           {LayerKind::conv2d, 4, 1, {4, 5, 2}},
      {LayerKind::conv2d_transpose, 1, 2, {3, 2, 2}}, {LayerKind::conv2d_transpose, 5, 2, {3, 3, 2}},
      {LayerKind::conv2d_transpose, 3, 1, {4, 3, 2}}, {LayerKind::conv2d, 5, 3, {7, 8, 2}},
  };
  std::uint64_t seed = 100;
  for (const auto& [kind, k, s, in] : cases) {
    auto w = randn_f(k * k * in.c * 3, seed++);
    auto b = randn_f(3, seed++);
    Layer l = kind == LayerKind::conv2d ? Layer::make_conv2d(in.c, 3, k, s, w, b)
                                        : Layer::make_conv2d_transpose(in.c, 3, k, s, w, b);
    const auto model = single_layer_model(in.size(), l, in);
    const auto z = randn(in.size(), seed++);
    EXPECT_LT(oracle::rel_error(forward(model, z, Precision::f64).data, oracle::reference_forward(model, z)), 1e-12)
        << to_string(kind) << " k=" << k << " s=" << s;
    const ImageTensor v(model.output_shape(), randn(model.output_size(), seed++));
    EXPECT_LT(fd_vjp_error(model, z, v), 1e-6) << to_string(kind) << " k=" << k << " s=" << s;
  }
}

TEST(Generator, ConvShapes) {
  const Shape3 in{5, 7, 1};
  const auto model = single_layer_model(
      in.size(), Layer::make_conv2d(1, 2, 3, 2, randn_f(18, 1), randn_f(2, 2)), in);
  EXPECT_EQ(model.output_shape(), (Shape3{3, 4, 2}));
  const Shape3 in2{3, 4, 2};
  const auto up = single_layer_model(
      in2.size(), Layer::make_conv2d_transpose(2, 1, 4, 2, randn_f(32, 3), randn_f(1, 4)), in2);
  EXPECT_EQ(up.output_shape(), (Shape3{6, 8, 1}));
}

TEST(Generator, VjpMatchesFiniteDifferences) {
  for (auto arch : {SyntheticArch::mlp, SyntheticArch::dcgan}) {
    SyntheticSpec spec;
    spec.arch = arch;
    spec.hidden = 8;
    spec.output = {8, 8, 2};
    const auto model = make_synthetic_generator(spec);
    for (std::uint64_t s = 0; s < 4; ++s) {
      const auto z = randn(10, 40 + s);
      const ImageTensor v(model.output_shape(), randn(model.output_size(), 80 + s));
      EXPECT_LT(fd_vjp_error(model, z, v), 1e-6) << to_string(arch) << " draw " << s;
    }
  }
}

TEST(Generator, EveryLayerKindPassesFiniteDifferences) {
  const Shape3 s{2, 3, 2};
  const std::size_t n = s.size();
  std::vector<std::pair<std::string, GeneratorModel>> models;
  models.emplace_back("dense", GeneratorModel(n, {Layer::make_dense(n, 5, randn_f(n * 5, 1), randn_f(5, 2))}));
  models.emplace_back("upsample", single_layer_model(n, Layer::make_upsample2x(), s));
  models.emplace_back("batchnorm",
                      single_layer_model(n,
                                         Layer::make_batchnorm({1.2f, 0.7f}, {0.1f, -0.2f}, {0.3f, -0.1f},
                                                               {0.9f, 1.4f}, 1e-3f),
                                         s));
  for (auto a : {Activation::identity, Activation::relu, Activation::tanh, Activation::sigmoid, Activation::elu}) {
    models.emplace_back(to_string(a), GeneratorModel(n, {Layer::make_activation(a)}));
  }
  for (const auto& [name, model] : models) {
    const auto z = randn(n, 9);
    const ImageTensor v(model.output_shape(), randn(model.output_size(), 10));
    EXPECT_LT(fd_vjp_error(model, z, v), 1e-6) << name;
  }
}

TEST(Generator, LinearModelVjpIsTranspose) {
  const auto w = randn_f(3 * 6, 21);
  GeneratorModel model(3, {Layer::make_dense(3, 6, w, randn_f(6, 22))});
  const auto v = randn(6, 23);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto g = vjp(model, randn(3, 30 + s), ImageTensor({1, 1, 6}, v), Precision::f64);
    for (std::size_t i = 0; i < 3; ++i) {
      double expect = 0.0;
      for (std::size_t j = 0; j < 6; ++j) expect += static_cast<double>(w[i * 6 + j]) * v[j];
      EXPECT_NEAR(g[i], expect, 1e-13);
    }
  }
}

TEST(Generator, ZeroCotangentGivesZeroGradient) {
  const auto model = testing_support::small_mlp(5, {4, 4, 1});
  const auto g = vjp(model, randn(5, 1), ImageTensor({4, 4, 1}), Precision::f64);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Generator, VjpIsLinearInCotangent) {
  SyntheticSpec spec;
  spec.arch = SyntheticArch::dcgan;
  spec.hidden = 4;
  spec.output = {8, 8, 1};
  const auto model = make_synthetic_generator(spec);
  const auto z = randn(10, 3);
  const ImageTensor v1({8, 8, 1}, randn(64, 4));
  const ImageTensor v2({8, 8, 1}, randn(64, 5));
  ImageTensor combo({8, 8, 1});
  for (std::size_t i = 0; i < 64; ++i) combo.data[i] = 2.5 * v1.data[i] - 0.75 * v2.data[i];
  const auto g1 = vjp(model, z, v1, Precision::f64);
  const auto g2 = vjp(model, z, v2, Precision::f64);
  const auto gc = vjp(model, z, combo, Precision::f64);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(gc[i], 2.5 * g1[i] - 0.75 * g2[i], 1e-12);
}

TEST(Generator, BatchNormMatchesDirectArithmetic) {
  const Layer bn = Layer::make_batchnorm({1.5f, 0.5f}, {0.25f, -1.0f}, {0.1f, 2.0f}, {4.0f, 0.25f}, 1e-3f);
  GeneratorModel model(4, {Layer::make_reshape({1, 2, 2}), bn});
  const LatentVector z{1.0, 3.0, -2.0, 0.5};
  const auto x = forward(model, z, Precision::f64);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t c = i % 2;
    const double expect = double(bn.gamma[c]) * (z[i] - double(bn.mean[c])) /
                              std::sqrt(double(bn.variance[c]) + double(bn.epsilon)) +
                          double(bn.beta[c]);
    EXPECT_NEAR(x.data[i], expect, 1e-14);
  }
}

TEST(Generator, UpsampleReplicatesEachPixel) {
  GeneratorModel model(6, {Layer::make_reshape({1, 3, 2}), Layer::make_upsample2x()});
  const LatentVector z{1, 2, 3, 4, 5, 6};
  const auto x = forward(model, z, Precision::f64);
  ASSERT_EQ(x.shape, (Shape3{2, 6, 2}));
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t px = 0; px < 6; ++px)
      for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(x.at(y, px, c), z[(px / 2) * 2 + c]);
}

TEST(Generator, SubgradientAtZeroIsZero) {
  for (auto a : {Activation::relu, Activation::elu}) {
    GeneratorModel model(3, {Layer::make_activation(a)});
    const auto g = vjp(model, {0.0, 1.0, -1.0}, ImageTensor({1, 1, 3}, {1.0, 1.0, 1.0}), Precision::f64);
    EXPECT_EQ(g[0], 0.0) << to_string(a);
    EXPECT_EQ(g[1], 1.0) << to_string(a);
    EXPECT_EQ(g[2], a == Activation::relu ? 0.0 : std::exp(-1.0)) << to_string(a);
  }
}

TEST(Generator, DeterministicAndThreadSafe) {
  SyntheticSpec spec;
  spec.arch = SyntheticArch::dcgan;
  spec.hidden = 8;
  const auto model = make_synthetic_generator(spec);
  const auto z = randn(10, 77);
  const auto ref = forward(model, z);
  std::vector<ImageTensor> outs(4);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < outs.size(); ++t) {
    pool.emplace_back([&, t] {
      for (int r = 0; r < 5; ++r) outs[t] = forward(model, z);
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& o : outs) EXPECT_EQ(o.data, ref.data);
}

TEST(Generator, SinglePrecisionTracksDouble) {
  const auto model = make_synthetic_generator({});
  const auto z = randn(10, 5);
  const auto a = forward(model, z, Precision::f32);
  const auto b = forward(model, z, Precision::f64);
  EXPECT_LT(oracle::rel_error(a.data, b.data), 1e-5);
}

TEST(Generator, SyntheticIsSeeded) {
  SyntheticSpec a;
  SyntheticSpec b;
  b.seed = 8;
  const auto z = randn(10, 1);
  EXPECT_EQ(forward(make_synthetic_generator(a), z).data, forward(make_synthetic_generator(a), z).data);
  EXPECT_NE(forward(make_synthetic_generator(a), z).data, forward(make_synthetic_generator(b), z).data);
  SyntheticSpec bad;
  bad.arch = SyntheticArch::dcgan;
  bad.output = {10, 8, 1};
  EXPECT_THROW(make_synthetic_generator(bad), ConfigError);
}

TEST(Generator, BackwardBeforeForwardThrows) {
  const auto model = make_synthetic_generator({});
  GeneratorEvaluator<double> ev(model);
  std::vector<double> cot(model.output_size(), 1.0);
  EXPECT_THROW(ev.backward(cot), Error);
}
