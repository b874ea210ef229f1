#include "phasegen/prgw.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"
#include "phasegen/error.hpp"

namespace phasegen {

namespace {

using namespace detail;

constexpr char kMagic[4] = {'P', 'R', 'G', 'W'};
constexpr std::uint8_t kVersion = 1;

// Guards against absurd allocations from corrupt metadata.
constexpr std::size_t kMaxArray = std::size_t{1} << 31;

std::size_t array_len(std::size_t a, std::size_t b, std::size_t c = 1, std::size_t d = 1) {
  const long double n = static_cast<long double>(a) * b * c * d;
  if (n > static_cast<long double>(kMaxArray)) throw FormatError("layer parameter array is implausibly large");
  return a * b * c * d;
}

Layer read_layer(std::istream& in, std::size_t index) {
  const std::string where = "layer " + std::to_string(index);
  const auto kind = read_u8(in, "layer kind");
  const auto param = read_u8(in, "layer parameter code");
  if (kind > static_cast<std::uint8_t>(LayerKind::activation)) {
    throw FormatError(where + ": unknown layer kind code " + std::to_string(kind));
  }
  switch (static_cast<LayerKind>(kind)) {
    case LayerKind::dense: {
      const std::size_t n_in = read_u32(in, "dense in");
      const std::size_t n_out = read_u32(in, "dense out");
      auto w = read_f32_array(in, array_len(n_in, n_out), "dense weights");
      auto b = read_f32_array(in, n_out, "dense bias");
      return Layer::make_dense(n_in, n_out, std::move(w), std::move(b));
    }
    case LayerKind::reshape: {
      Shape3 s;
      s.h = read_u32(in, "reshape h");
      s.w = read_u32(in, "reshape w");
      s.c = read_u32(in, "reshape c");
      return Layer::make_reshape(s);
    }
    case LayerKind::upsample2x:
      return Layer::make_upsample2x();
    case LayerKind::conv2d:
    case LayerKind::conv2d_transpose: {
      if (param != 0) throw FormatError(where + ": unsupported padding mode " + std::to_string(param));
      const std::size_t cin = read_u32(in, "conv in_channels");
      const std::size_t cout = read_u32(in, "conv out_channels");
      const std::size_t k = read_u32(in, "conv kernel");
      const std::size_t s = read_u32(in, "conv stride");
      auto w = read_f32_array(in, array_len(k, k, cin, cout), "conv kernels");
      auto b = read_f32_array(in, cout, "conv bias");
      return kind == static_cast<std::uint8_t>(LayerKind::conv2d)
                 ? Layer::make_conv2d(cin, cout, k, s, std::move(w), std::move(b))
                 : Layer::make_conv2d_transpose(cin, cout, k, s, std::move(w), std::move(b));
    }
    case LayerKind::batchnorm: {
      const std::size_t c = read_u32(in, "batchnorm channels");
      if (c > kMaxArray) throw FormatError(where + ": implausible channel count");
      auto gamma = read_f32_array(in, c, "batchnorm gamma");
      auto beta = read_f32_array(in, c, "batchnorm beta");
      auto mean = read_f32_array(in, c, "batchnorm mean");
      auto var = read_f32_array(in, c, "batchnorm variance");
      const float eps = read_f32(in, "batchnorm epsilon");
      return Layer::make_batchnorm(std::move(gamma), std::move(beta), std::move(mean), std::move(var), eps);
    }
    case LayerKind::activation:
      if (param > static_cast<std::uint8_t>(Activation::elu)) {
        throw FormatError(where + ": unknown activation code " + std::to_string(param));
      }
      return Layer::make_activation(static_cast<Activation>(param));
  }
  throw FormatError(where + ": unknown layer kind");
}

std::size_t infer_input_dim(const std::vector<Layer>& layers) {
  if (layers.empty()) throw ModelValidationError("generator has no layers");
  const Layer& first = layers.front();
  switch (first.kind) {
    case LayerKind::dense: return first.in;
    case LayerKind::reshape: return first.target.size();
    case LayerKind::batchnorm: return first.channels;
    default:
      throw ModelValidationError("cannot infer the latent dimension from a leading " + to_string(first.kind) +
                                 " layer");
  }
}

}  // namespace

GeneratorModel read_generator(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a PRGW file (bad magic)");
  const auto version = read_u8(in, "version");
  if (version != kVersion) throw FormatError("unsupported PRGW version " + std::to_string(version));
  const std::size_t count = read_u32(in, "layer count");
  if (count > 4096) throw FormatError("implausible layer count " + std::to_string(count));
  std::vector<Layer> layers;
  layers.reserve(count);
  for (std::size_t i = 0; i < count; ++i) layers.push_back(read_layer(in, i));
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after last layer");
  const std::size_t k = infer_input_dim(layers);
  return GeneratorModel(k, std::move(layers));
}

GeneratorModel load_generator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open generator file " + path.string());
  return read_generator(in);
}

void write_generator(const GeneratorModel& model, std::ostream& out) {
  out.write(kMagic, 4);
  write_u8(out, kVersion);
  write_u32(out, checked_u32(model.layers().size(), "layer count"));
  for (const Layer& l : model.layers()) {
    write_u8(out, static_cast<std::uint8_t>(l.kind));
    write_u8(out, l.kind == LayerKind::activation ? static_cast<std::uint8_t>(l.activation) : 0);
    switch (l.kind) {
      case LayerKind::dense:
        write_u32(out, checked_u32(l.in, "dense in"));
        write_u32(out, checked_u32(l.out, "dense out"));
        write_f32_array(out, l.weights);
        write_f32_array(out, l.bias);
        break;
      case LayerKind::reshape:
        write_u32(out, checked_u32(l.target.h, "h"));
        write_u32(out, checked_u32(l.target.w, "w"));
        write_u32(out, checked_u32(l.target.c, "c"));
        break;
      case LayerKind::upsample2x:
      case LayerKind::activation:
        break;
      case LayerKind::conv2d:
      case LayerKind::conv2d_transpose:
        write_u32(out, checked_u32(l.in_channels, "in_channels"));
        write_u32(out, checked_u32(l.out_channels, "out_channels"));
        write_u32(out, checked_u32(l.kernel, "kernel"));
        write_u32(out, checked_u32(l.stride, "stride"));
        write_f32_array(out, l.weights);
        write_f32_array(out, l.bias);
        break;
      case LayerKind::batchnorm:
        write_u32(out, checked_u32(l.channels, "channels"));
        write_f32_array(out, l.gamma);
        write_f32_array(out, l.beta);
        write_f32_array(out, l.mean);
        write_f32_array(out, l.variance);
        write_f32(out, l.epsilon);
        break;
    }
  }
}

void save_generator(const GeneratorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write generator file " + path.string());
  write_generator(model, out);
  if (!out) throw DataError("error while writing " + path.string());
}

void write_manifest(const GeneratorModel& model, std::ostream& out) {
  std::size_t total_params = 0;
  out << "latent_dim " << model.input_dim() << "\n";
  out << std::left << std::setw(4) << "#" << std::setw(18) << "kind" << std::setw(34) << "detail" << std::setw(14)
      << "output" << "params\n";
  const auto layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    std::string detail;
    switch (l.kind) {
      case LayerKind::dense:
        detail = std::to_string(l.in) + " -> " + std::to_string(l.out);
        break;
      case LayerKind::reshape:
        detail = "to " + to_string(l.target);
        break;
      case LayerKind::upsample2x:
        detail = "nearest";
        break;
      case LayerKind::conv2d:
      case LayerKind::conv2d_transpose:
        detail = std::to_string(l.in_channels) + " -> " + std::to_string(l.out_channels) + " k" +
                 std::to_string(l.kernel) + " s" + std::to_string(l.stride) + " same";
        break;
      case LayerKind::batchnorm: {
        std::ostringstream eps;
        eps << l.epsilon;
        detail = std::to_string(l.channels) + " ch eps " + eps.str();
        break;
      }
      case LayerKind::activation:
        detail = to_string(l.activation);
        break;
    }
    const std::size_t params = l.weights.size() + l.bias.size() + l.gamma.size() + l.beta.size() + l.mean.size() +
                               l.variance.size() + (l.kind == LayerKind::batchnorm ? 1 : 0);
    total_params += params;
    out << std::setw(4) << i << std::setw(18) << to_string(l.kind) << std::setw(34) << detail << std::setw(14)
        << to_string(model.shape_before(i + 1)) << params << "\n";
  }
  out << "output " << to_string(model.output_shape()) << "  total_params " << total_params << "\n";
}

}  // namespace phasegen
