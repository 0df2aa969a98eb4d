// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Images as functions from pixel coordinates to intensities.
//
// Pixel (row, col) of an H x W image maps to
//   x = (2 row / (H - 1) - 1, 2 col / (W - 1) - 1),   a 1-pixel extent maps to -1
//   y = intensity / 255 - 0.5                          one column per channel
// Flat pixel indices are row-major: index = row * W + col.

#pragma once

#include "anp/episode.hpp"
#include "anp/rng.hpp"
#include "anp/tensor.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace anp {

class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImageDataset {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;  // [count, height, width, channels]
  std::string split = "train";

  std::size_t pixels_per_image() const { return height * width; }
  std::uint8_t at(std::size_t image, std::size_t row, std::size_t col, std::size_t channel = 0) const {
    return pixels[((image * height + row) * width + col) * channels + channel];
  }
};

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Parses an unsigned-byte image file [count, rows, cols]. Errors name the
/// expected and found magic, or the byte offset where the data ran out.
ImageDataset parse_idx(std::span<const std::uint8_t> bytes);
ImageDataset load_idx(const std::string& path);

/// Single-channel datasets only.
std::vector<std::uint8_t> encode_idx(const ImageDataset& dataset);
void write_idx(const std::string& path, const ImageDataset& dataset);

double pixel_coordinate(std::size_t index, std::size_t extent);

/// x [k, 2] and y [k, channels] for the listed flat pixel indices of one image.
std::pair<Tensor, Tensor> image_to_regression(const ImageDataset& dataset, std::size_t image,
                                              std::span<const std::size_t> pixel_indices);

/// Inverse mapping: flat pixel indices and 8-bit intensities (row-major over
/// channels). Throws when a coordinate is off the grid.
std::pair<std::vector<std::size_t>, std::vector<std::uint8_t>> regression_to_pixels(
    const Tensor& x, const Tensor& y, std::size_t height, std::size_t width);

/// Every pixel coordinate of an H x W grid, row-major, [H W, 2].
Tensor make_grid(std::size_t height, std::size_t width);

/// Axis-aligned rectangles and filled circles on a dark background.
ImageDataset synthetic_shapes(std::size_t count, std::size_t height, std::size_t width, Rng& rng);

struct PixelEpisodeSpec {
  std::size_t min_context = 3;
  std::size_t max_points = 200;
  bool top_half = false;  // contexts = rows < H/2, targets = every pixel

  void validate(const ImageDataset& dataset) const;
};

/// Image drawn uniformly, m distinct pixels drawn without replacement, the
/// first n of them are the contexts.
Episode sample_pixel_episode(const ImageDataset& dataset, const PixelEpisodeSpec& spec, Rng& rng);

/// Same, for a chosen image.
Episode pixel_episode(const ImageDataset& dataset, std::size_t image, const PixelEpisodeSpec& spec, Rng& rng);

}  // namespace anp
