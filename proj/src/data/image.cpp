#include "fscil/data/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace fscil::data {

Image make_image(int height, int width, int channels, std::uint8_t fill) {
  if (height < 1 || width < 1 || channels < 1) throw std::invalid_argument("make_image: empty image");
  Image img{height, width, channels, {}};
  img.pixels.assign(static_cast<std::size_t>(height) * width * channels, fill);
  return img;
}

Tensor3 to_tensor(const Image& image) {
  Tensor3 t({image.height, image.width, image.channels});
  auto out = t.data();
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    out[i] = image.pixels[i] / 127.5 - 1.0;
  }
  return t;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

int color_type_for(int channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 2: return PNG_COLOR_TYPE_GRAY_ALPHA;
    case 3: return PNG_COLOR_TYPE_RGB;
    case 4: return PNG_COLOR_TYPE_RGBA;
    default: throw std::invalid_argument("write_png: unsupported channel count");
  }
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("read_png: cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("read_png: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: decode failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  png_read_update_info(png, info);

  Image img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const int color = color_type_for(image.channels);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("write_png: cannot open " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("write_png: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: encode failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() +
                                             static_cast<std::size_t>(y) * image.width *
                                                 image.channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace fscil::data
