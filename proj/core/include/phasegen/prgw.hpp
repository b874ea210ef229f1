#pragma once

#include <filesystem>
#include <iosfwd>

#include "phasegen/generator.hpp"

namespace phasegen {

/// Reads a PRGW weights file.
///
/// Layout (little-endian):
///
///     "PRGW" u8 version=1  u32 layer_count
///     per layer: u8 kind  u8 param  <u32 metadata>  <f32 arrays>
///
///     kind               param        u32 metadata                         f32 arrays
///     0 dense            0            in, out                              W[in][out], b[out]
///     1 reshape          0            h, w, c                              -
///     2 upsample2x       0            -                                    -
///     3 conv2d           0 (same)     in_ch, out_ch, kernel, stride        K[k][k][in_ch][out_ch], b[out_ch]
///     4 conv2d_transpose 0 (same)     in_ch, out_ch, kernel, stride        K[k][k][in_ch][out_ch], b[out_ch]
///     5 batchnorm        0            channels                             gamma, beta, mean, variance, eps
///     6 activation       act code     -                                    -
///
/// The latent dimension is taken from the first layer (dense `in`, reshape
/// `h*w*c`, or batchnorm `channels`).
///
/// Throws FormatError for bad magic/version/truncation/unknown codes and
/// ModelValidationError for inconsistent shapes or non-finite weights.
GeneratorModel load_generator(const std::filesystem::path& path);
GeneratorModel read_generator(std::istream& in);

void save_generator(const GeneratorModel& model, const std::filesystem::path& path);
void write_generator(const GeneratorModel& model, std::ostream& out);

/// Plain-text layer table.
void write_manifest(const GeneratorModel& model, std::ostream& out);

}  // namespace phasegen
