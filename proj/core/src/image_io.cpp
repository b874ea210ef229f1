#include "phasegen/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "binary_io.hpp"
#include "phasegen/error.hpp"

namespace phasegen {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err != nullptr) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct PngLayout {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::size_t depth = 0;
  std::size_t rowbytes = 0;
};

// Kept free of non-trivial locals because libpng reports errors via longjmp.
bool decode_png(std::FILE* f, PngLayout* layout, std::vector<unsigned char>* pixels,
                std::vector<png_bytep>* rows, std::string* err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (png_get_bit_depth(png, info) == 16) png_set_swap(png);
  png_read_update_info(png, info);
  layout->width = png_get_image_width(png, info);
  layout->height = png_get_image_height(png, info);
  layout->channels = png_get_channels(png, info);
  layout->depth = png_get_bit_depth(png, info);
  layout->rowbytes = png_get_rowbytes(png, info);
  pixels->resize(layout->rowbytes * layout->height);
  rows->resize(layout->height);
  for (std::size_t y = 0; y < layout->height; ++y) (*rows)[y] = pixels->data() + y * layout->rowbytes;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

ImageTensor read_png(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw DataError("cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path.string() + " is not a PNG file");
  }
  std::string err;
  PngLayout lay;
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  if (!decode_png(f.get(), &lay, &pixels, &rows, &err)) throw FormatError(path.string() + ": " + err);

  const std::size_t color_channels = (lay.channels == 2 || lay.channels == 4) ? lay.channels - 1 : lay.channels;
  ImageTensor img(Shape3{lay.height, lay.width, color_channels});
  const double maxval = lay.depth == 16 ? 65535.0 : 255.0;
  for (std::size_t y = 0; y < lay.height; ++y) {
    for (std::size_t x = 0; x < lay.width; ++x) {
      for (std::size_t c = 0; c < color_channels; ++c) {
        const std::size_t idx = x * lay.channels + c;
        double v = 0;
        if (lay.depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + 2 * idx, 2);
          v = s;
        } else {
          v = rows[y][idx];
        }
        img.at(y, x, c) = v / maxval;
      }
    }
  }
  return img;
}

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch = 0;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw FormatError("truncated PNM header");
  return tok;
}

std::size_t pnm_number(std::istream& in) {
  const std::string tok = pnm_token(in);
  if (!std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw FormatError("bad PNM header value '" + tok + "'");
  }
  return std::stoul(tok);
}

ImageTensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string magic = pnm_token(in);
  std::size_t channels = 0;
  bool binary = false;
  if (magic == "P2") channels = 1;
  else if (magic == "P5") channels = 1, binary = true;
  else if (magic == "P3") channels = 3;
  else if (magic == "P6") channels = 3, binary = true;
  else throw FormatError(path.string() + ": unsupported PNM type '" + magic + "'");
  const std::size_t w = pnm_number(in);
  const std::size_t h = pnm_number(in);
  const std::size_t maxval = pnm_number(in);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw FormatError(path.string() + ": bad PNM header");
  ImageTensor img(Shape3{h, w, channels});
  const std::size_t n = h * w * channels;
  if (binary) {
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bytes);
    detail::read_exact(in, raw.data(), raw.size(), "PNM pixels");
    for (std::size_t i = 0; i < n; ++i) {
      const double v = bytes == 2 ? static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
      img.data[i] = v / static_cast<double>(maxval);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      img.data[i] = static_cast<double>(pnm_number(in)) / static_cast<double>(maxval);
    }
  }
  for (double v : img.data) {
    if (v > 1.0) throw FormatError(path.string() + ": sample exceeds maxval");
  }
  return img;
}

std::uint8_t to_byte(double v) {
  if (!std::isfinite(v)) v = 0.0;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Kept free of non-trivial locals because libpng reports errors via longjmp.
bool encode_png(std::FILE* f, Shape3 shape, const unsigned char* bytes, std::string* err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(shape.w), static_cast<png_uint_32>(shape.h), 8,
               shape.c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < shape.h; ++y) {
    png_write_row(png, bytes + y * shape.w * shape.c);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

ImageTensor read_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  throw FormatError(path.string() + ": unsupported image extension");
}

void write_png(const ImageTensor& img, const std::filesystem::path& path) {
  const std::size_t c = img.shape.c;
  if (c != 1 && c != 3) throw DimensionError("PNG output needs 1 or 3 channels, got " + std::to_string(c));
  std::vector<unsigned char> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw DataError("cannot write " + path.string());
  std::string err;
  if (!encode_png(f.get(), img.shape, bytes.data(), &err)) throw DataError(path.string() + ": " + err);
}

void write_raw_f32(const ImageTensor& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  std::vector<float> planar(img.data.size());
  std::size_t k = 0;
  for (std::size_t c = 0; c < img.shape.c; ++c) {
    for (std::size_t y = 0; y < img.shape.h; ++y) {
      for (std::size_t x = 0; x < img.shape.w; ++x) planar[k++] = static_cast<float>(img.at(y, x, c));
    }
  }
  detail::write_f32_array(out, planar);
  if (!out) throw DataError("error while writing " + path.string());
}

ImageTensor to_grayscale(const ImageTensor& img) {
  if (img.shape.c == 1) return img;
  if (img.shape.c != 3) throw DimensionError("grayscale conversion needs 1 or 3 channels");
  ImageTensor out(Shape3{img.shape.h, img.shape.w, 1});
  for (std::size_t i = 0; i < img.shape.h * img.shape.w; ++i) {
    out.data[i] = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
  }
  return out;
}

ImageTensor to_rgb(const ImageTensor& img) {
  if (img.shape.c == 3) return img;
  if (img.shape.c != 1) throw DimensionError("RGB conversion needs 1 or 3 channels");
  ImageTensor out(Shape3{img.shape.h, img.shape.w, 3});
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = img.data[i];
  }
  return out;
}

ImageTensor zero_pad_center(const ImageTensor& img, std::size_t height, std::size_t width) {
  if (img.shape.h > height || img.shape.w > width) {
    throw DimensionError("cannot zero-pad " + to_string(img.shape) + " into " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  ImageTensor out(Shape3{height, width, img.shape.c});
  const std::size_t oy = (height - img.shape.h) / 2;
  const std::size_t ox = (width - img.shape.w) / 2;
  for (std::size_t y = 0; y < img.shape.h; ++y) {
    for (std::size_t x = 0; x < img.shape.w; ++x) {
      for (std::size_t c = 0; c < img.shape.c; ++c) out.at(y + oy, x + ox, c) = img.at(y, x, c);
    }
  }
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& img, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw DimensionError("resize target must be non-empty");
  if (img.shape.h == height && img.shape.w == width) return img;
  ImageTensor out(Shape3{height, width, img.shape.c});
  const double sy = static_cast<double>(img.shape.h) / static_cast<double>(height);
  const double sx = static_cast<double>(img.shape.w) / static_cast<double>(width);
  const auto max_y = static_cast<double>(img.shape.h - 1);
  const auto max_x = static_cast<double>(img.shape.w - 1);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.shape.h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.shape.w - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.shape.c; ++c) {
        const double top = img.at(y0, x0, c) * (1 - tx) + img.at(y0, x1, c) * tx;
        const double bot = img.at(y1, x0, c) * (1 - tx) + img.at(y1, x1, c) * tx;
        out.at(y, x, c) = top * (1 - ty) + bot * ty;
      }
    }
  }
  return out;
}

ImageTensor tile_grid(const std::vector<std::vector<ImageTensor>>& rows, std::size_t gap, double background) {
  Shape3 cell{0, 0, 0};
  std::size_t cols = 0;
  for (const auto& r : rows) {
    cols = std::max(cols, r.size());
    for (const auto& im : r) {
      if (cell.c == 0) cell = im.shape;
      if (im.shape != cell) throw DimensionError("tile_grid: all cells must share a shape");
    }
  }
  if (rows.empty() || cols == 0 || cell.c == 0) throw DimensionError("tile_grid: nothing to tile");
  const std::size_t h = rows.size() * cell.h + (rows.size() + 1) * gap;
  const std::size_t w = cols * cell.w + (cols + 1) * gap;
  ImageTensor out(Shape3{h, w, cell.c});
  std::fill(out.data.begin(), out.data.end(), background);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t q = 0; q < rows[r].size(); ++q) {
      const std::size_t oy = gap + r * (cell.h + gap);
      const std::size_t ox = gap + q * (cell.w + gap);
      for (std::size_t y = 0; y < cell.h; ++y) {
        for (std::size_t x = 0; x < cell.w; ++x) {
          for (std::size_t c = 0; c < cell.c; ++c) out.at(oy + y, ox + x, c) = rows[r][q].at(y, x, c);
        }
      }
    }
  }
  return out;
}

ImageTensor fit_to_shape(const ImageTensor& img, Shape3 target, bool zero_pad) {
  ImageTensor conv = target.c == 1 ? to_grayscale(img) : (target.c == 3 ? to_rgb(img) : img);
  if (conv.shape.c != target.c) {
    throw DimensionError("cannot convert " + std::to_string(img.shape.c) + " channels to " +
                         std::to_string(target.c));
  }
  if (conv.shape.h == target.h && conv.shape.w == target.w) return conv;
  if (zero_pad && conv.shape.h <= target.h && conv.shape.w <= target.w) {
    return zero_pad_center(conv, target.h, target.w);
  }
  return resize_bilinear(conv, target.h, target.w);
}

IngestResult ingest_images(const IngestSpec& spec) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(spec.directory, ec)) throw DataError("image directory not found: " + spec.directory.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(spec.directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower_ext(entry.path());
    if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  IngestResult res;
  for (const auto& f : files) {
    if (spec.count != 0 && res.images.size() >= spec.count) break;
    try {
      res.images.push_back(fit_to_shape(read_image(f), spec.target, spec.zero_pad));
      res.names.push_back(f.filename().string());
    } catch (const Error& e) {
      res.warnings.push_back("skipped " + f.filename().string() + ": " + e.what());
    }
  }
  if (res.images.empty()) throw DataError("no usable images in " + spec.directory.string());
  return res;
}

}  // namespace phasegen
