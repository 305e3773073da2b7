// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pairforge/io.hpp"

namespace pairforge {

std::uint8_t to_byte(float v) {
  const double scaled = std::round((static_cast<double>(v) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

float from_byte(std::uint8_t b) { return static_cast<float>(b / 127.5 - 1.0); }

std::string encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.shape[0] != 3) {
    throw ShapeError("PPM needs a [3 x H x W] image, got " + shape_to_string(image.shape));
  }
  const std::size_t h = image.shape[1], w = image.shape[2], plane = h * w;
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + 3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      out[header + 3 * p + c] = static_cast<char>(to_byte(image.data[c * plane + p]));
    }
  }
  return out;
}

Tensor decode_ppm(const std::string& bytes) {
  // Header tokens: magic, width, height, maxval, separated by whitespace.
  std::size_t pos = 0;
  auto next_token = [&](const char* what) {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError(std::string("PPM header is missing the ") + what, start);
    return bytes.substr(start, pos - start);
  };
  if (next_token("magic") != "P6") throw ParseError("not a binary PPM (P6)", 0);
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token("width"));
    h = std::stoul(next_token("height"));
    maxval = std::stoul(next_token("maxval"));
  } catch (const std::logic_error&) {
    throw ParseError("malformed PPM header", pos);
  }
  if (maxval != 255 || w == 0 || h == 0) throw ParseError("unsupported PPM dimensions or maxval", pos);
  ++pos;  // single whitespace byte after maxval
  const std::size_t plane = w * h;
  if (bytes.size() < pos || bytes.size() - pos != 3 * plane) throw ParseError("PPM pixel data size mismatch", pos);
  Tensor image({3, h, w});
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      image.data[c * plane + p] = from_byte(static_cast<std::uint8_t>(bytes[pos + 3 * p + c]));
    }
  }
  return image;
}

void write_image_ppm(const std::filesystem::path& path, const Tensor& image) {
  write_file_atomic(path, encode_ppm(image));
}

Tensor read_image_ppm(const std::filesystem::path& path) {
  try {
    return decode_ppm(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

Tensor tile_images(const std::vector<std::vector<Tensor>>& rows, std::size_t gap) {
  std::size_t cols = 0, th = 0, tw = 0;
  for (const auto& row : rows) {
    cols = std::max(cols, row.size());
    for (const auto& t : row) {
      if (t.rank() != 3 || t.shape[0] != 3) throw ShapeError("tile_images expects [3 x H x W] tiles");
      if (th == 0) {
        th = t.shape[1];
        tw = t.shape[2];
      } else if (t.shape[1] != th || t.shape[2] != tw) {
        throw ShapeError("tile_images needs equally sized tiles");
      }
    }
  }
  if (cols == 0) throw ShapeError("tile_images needs at least one tile");
  const std::size_t H = rows.size() * th + (rows.size() - 1) * gap;
  const std::size_t W = cols * tw + (cols - 1) * gap;
  Tensor out({3, H, W});
  std::fill(out.data.begin(), out.data.end(), -1.0f);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const Tensor& t = rows[r][c];
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t y = 0; y < th; ++y)
          for (std::size_t x = 0; x < tw; ++x) {
            out.data[(ch * H + r * (th + gap) + y) * W + c * (tw + gap) + x] = t.data[(ch * th + y) * tw + x];
          }
    }
  }
  return out;
}

}  // namespace pairforge
