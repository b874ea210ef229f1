#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "phasegen/types.hpp"

namespace phasegen {

/// Decodes PNG (8/16-bit gray, gray+alpha, RGB, RGBA, palette) or binary/ASCII
/// PGM/PPM. Values are scaled to [0, 1] by the format's maximum; alpha is
/// dropped. Throws FormatError or DataError.
ImageTensor read_image(const std::filesystem::path& path);

/// 8-bit PNG; values are clamped to [0, 1] and rounded. 1 channel -> gray, 3 -> RGB.
void write_png(const ImageTensor& img, const std::filesystem::path& path);

/// Raw little-endian f32 dump in planar (channel, row, column) order.
void write_raw_f32(const ImageTensor& img, const std::filesystem::path& path);

/// Rec. 601 luma for 3-channel input, identity for 1 channel.
ImageTensor to_grayscale(const ImageTensor& img);
/// Replicates a single channel into three.
ImageTensor to_rgb(const ImageTensor& img);

/// Centers `img` in a zero canvas of size h x w; the offset is floor((H - h)/2).
/// Throws DimensionError if the image is larger than the canvas.
ImageTensor zero_pad_center(const ImageTensor& img, std::size_t height, std::size_t width);

/// Bilinear resampling with half-pixel centers (edge samples are clamped).
ImageTensor resize_bilinear(const ImageTensor& img, std::size_t height, std::size_t width);

/// Tiles images into one canvas: `rows` x `cols` cells of equal shape with a
/// `gap`-pixel border filled with `background`. Missing cells stay background.
ImageTensor tile_grid(const std::vector<std::vector<ImageTensor>>& rows, std::size_t gap = 2,
                      double background = 1.0);

struct IngestSpec {
  std::filesystem::path directory;
  std::size_t count = 0;  // 0 = all
  Shape3 target;
  bool zero_pad = true;  // pad when the image fits, otherwise resize
};

struct IngestResult {
  std::vector<ImageTensor> images;
  std::vector<std::string> names;
  std::vector<std::string> warnings;  // skipped files
};

/// Loads images in lexicographic filename order, converts channels to the
/// target, then zero-pads (if enabled and the image fits) or resizes.
/// Unreadable files are skipped with a warning; no usable file -> DataError.
IngestResult ingest_images(const IngestSpec& spec);

/// The shape conversion step of ingest_images for one already-decoded image.
ImageTensor fit_to_shape(const ImageTensor& img, Shape3 target, bool zero_pad);

}  // namespace phasegen
