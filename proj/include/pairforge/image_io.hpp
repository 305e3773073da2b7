// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary PPM (P6) for [3 x H x W] images in [-1, 1]:
// byte = round((v + 1) * 127.5) clamped to [0, 255].

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pairforge/tensor.hpp"

namespace pairforge {

std::uint8_t to_byte(float v);
float from_byte(std::uint8_t b);

std::string encode_ppm(const Tensor& image);
Tensor decode_ppm(const std::string& bytes);

void write_image_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_image_ppm(const std::filesystem::path& path);

/// Tiles equally sized images into a grid with `gap` pixels of black between
/// cells; rows may be ragged (missing cells stay black).
Tensor tile_images(const std::vector<std::vector<Tensor>>& rows, std::size_t gap = 2);

}  // namespace pairforge
