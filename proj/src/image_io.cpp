#include "agesynth/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "agesynth/errors.hpp"

namespace agesynth {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

// libpng reports errors through longjmp; every libpng call below sits in
// the frame that owns the setjmp so no C++ object is skipped over.
Decoded decode(const std::string& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open image '" + path + "'");
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8)) {
    throw DataError("'" + path + "' is not a PNG file");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  Decoded d;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  png_read_update_info(png, info);
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.channels = png_get_channels(png, info);
  d.pixels.resize(static_cast<std::size_t>(d.width) * d.height * d.channels);
  rows.resize(d.height);
  for (int y = 0; y < d.height; ++y) {
    rows[y] = d.pixels.data() + static_cast<std::size_t>(y) * d.width * d.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

void encode(const std::string& path, int width, int height, int channels,
            const std::vector<std::uint8_t>& pixels) {
  File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot write image '" + path + "'");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing PNG '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(pixels.data() +
                                    static_cast<std::size_t>(y) * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

std::uint8_t denormalize_pixel(double v) {
  const double scaled = std::round((v + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

Tensor read_png(const std::string& path) {
  const Decoded d = decode(path);
  Tensor out(Shape{1, d.height, d.width, 3});
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      const std::uint8_t* p =
          d.pixels.data() + (static_cast<std::size_t>(y) * d.width + x) * d.channels;
      for (int c = 0; c < 3; ++c) {
        // Gray (+alpha) replicates the single intensity channel.
        const std::uint8_t v = d.channels >= 3 ? p[c] : p[0];
        out.at(0, y, x, c) = normalize_pixel(v);
      }
    }
  return out;
}

void write_png(const std::string& path, const Tensor& images, int index) {
  const Shape s = images.shape();
  if (s.c != 3 || index < 0 || index >= s.n) {
    throw ShapeError("write_png expects [N, H, W, 3] and a valid row, got " +
                     s.str());
  }
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(s.h) * s.w * 3);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x)
      for (int c = 0; c < 3; ++c) {
        pixels[(static_cast<std::size_t>(y) * s.w + x) * 3 + c] =
            denormalize_pixel(images.at(index, y, x, c));
      }
  encode(path, s.w, s.h, 3, pixels);
}

LabelImage read_label_png(const std::string& path) {
  const Decoded d = decode(path);
  if (d.channels != 1) {
    throw DataError("label map '" + path + "' must be single-channel");
  }
  return LabelImage{d.width, d.height, d.pixels};
}

void write_label_png(const std::string& path, const LabelImage& image) {
  encode(path, image.width, image.height, 1, image.labels);
}

Tensor tile_grid(const std::vector<Tensor>& images, int columns) {
  if (images.empty() || columns < 1) {
    throw ArgumentError("tile_grid needs images and columns >= 1");
  }
  const Shape s = images.front().shape();
  int count = 0;
  for (const auto& t : images) {
    if (t.shape().h != s.h || t.shape().w != s.w || t.shape().c != s.c) {
      throw ShapeError("tile_grid: mixed image sizes");
    }
    count += t.shape().n;
  }
  const int rows = (count + columns - 1) / columns;
  Tensor grid(Shape{1, rows * s.h, columns * s.w, s.c}, -1.0);
  int k = 0;
  for (const auto& t : images) {
    for (int n = 0; n < t.shape().n; ++n, ++k) {
      const int oy = (k / columns) * s.h;
      const int ox = (k % columns) * s.w;
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
          for (int c = 0; c < s.c; ++c) {
            grid.at(0, oy + y, ox + x, c) = t.at(n, y, x, c);
          }
    }
  }
  return grid;
}

}  // namespace agesynth
