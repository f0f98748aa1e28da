// Copyright 2026 The marsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Thin libpng wrappers. Output carries no timestamps, so identical pixels give
// identical files.

#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace marsim::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

inline void png_error_fn(png_structp, png_const_charp msg) { throw IoError(std::string("libpng: ") + msg); }
inline void png_warning_fn(png_structp, png_const_charp) {}

/// `rows` holds height rows of packed samples, 16-bit samples big-endian.
inline void write_png(const std::string& path, int width, int height, int bit_depth, int color_type,
                      const std::vector<std::uint8_t>& packed, std::size_t row_bytes) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  if (!png) throw IoError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!info) throw IoError("libpng: cannot create info struct");
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(packed.data() + static_cast<std::size_t>(y) * row_bytes));
  png_write_end(png, nullptr);
}

}  // namespace detail

inline void write_png_gray8(const std::string& path, int w, int h, const std::vector<std::uint8_t>& pixels) {
  detail::write_png(path, w, h, 8, PNG_COLOR_TYPE_GRAY, pixels, static_cast<std::size_t>(w));
}

inline void write_png_rgb8(const std::string& path, int w, int h, const std::vector<std::uint8_t>& rgb) {
  detail::write_png(path, w, h, 8, PNG_COLOR_TYPE_RGB, rgb, static_cast<std::size_t>(w) * 3);
}

/// `samples` holds `channels` interleaved 16-bit values per pixel (1 or 3).
inline void write_png_16(const std::string& path, int w, int h, int channels, const std::vector<std::uint16_t>& samples) {
  std::vector<std::uint8_t> packed(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    packed[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
    packed[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xff);
  }
  detail::write_png(path, w, h, 16, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, packed,
                    static_cast<std::size_t>(w) * channels * 2);
}

struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;  // interleaved, widened to 16 bits
};

inline PngImage read_png(const std::string& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open '" + path + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_fn, detail::png_warning_fn);
  if (!png) throw IoError("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  if (!info) throw IoError("libpng: cannot create info struct");
  png_init_io(png, file.get());
  png_read_info(png, info);
  PngImage img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.bit_depth = png_get_bit_depth(png, info);
  img.channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> row(row_bytes);
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    if (img.bit_depth == 16) {
      for (std::size_t i = 0; i + 1 < row_bytes; i += 2)
        img.samples.push_back(static_cast<std::uint16_t>((row[i] << 8) | row[i + 1]));
    } else {
      for (auto b : row) img.samples.push_back(b);
    }
  }
  return img;
}

}  // namespace marsim::io
