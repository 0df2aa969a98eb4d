// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/image.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

namespace anp {

namespace {

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (bytes.size() < offset + 4) {
    throw IdxError("idx: truncated header at byte offset " + std::to_string(bytes.size()) + " (need " +
                   std::to_string(offset + 4) + ")");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

ImageDataset parse_idx(std::span<const std::uint8_t> bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxImageMagic) {
    std::string what = "idx: expected image magic " + hex32(kIdxImageMagic) + ", found " + hex32(magic);
    if (magic == kIdxLabelMagic) what += " (label file)";
    throw IdxError(what);
  }
  ImageDataset ds;
  ds.count = read_be32(bytes, 4);
  ds.height = read_be32(bytes, 8);
  ds.width = read_be32(bytes, 12);
  ds.channels = 1;
  const std::size_t need = ds.count * ds.height * ds.width;
  if (bytes.size() < 16 + need) {
    throw IdxError("idx: truncated pixel data at byte offset " + std::to_string(bytes.size()) + " (expected " +
                   std::to_string(16 + need) + " bytes)");
  }
  ds.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return ds;
}

ImageDataset load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("idx: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

std::vector<std::uint8_t> encode_idx(const ImageDataset& dataset) {
  if (dataset.channels != 1) throw IdxError("idx: only single-channel images can be written");
  if (dataset.pixels.size() != dataset.count * dataset.height * dataset.width) {
    throw IdxError("idx: pixel buffer does not match dataset dimensions");
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + dataset.pixels.size());
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(dataset.count));
  put_be32(out, static_cast<std::uint32_t>(dataset.height));
  put_be32(out, static_cast<std::uint32_t>(dataset.width));
  out.insert(out.end(), dataset.pixels.begin(), dataset.pixels.end());
  return out;
}

void write_idx(const std::string& path, const ImageDataset& dataset) {
  const auto bytes = encode_idx(dataset);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError("idx: cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

double pixel_coordinate(std::size_t index, std::size_t extent) {
  if (extent <= 1) return -1.0;
  return 2.0 * static_cast<double>(index) / static_cast<double>(extent - 1) - 1.0;
}

std::pair<Tensor, Tensor> image_to_regression(const ImageDataset& dataset, std::size_t image,
                                              std::span<const std::size_t> pixel_indices) {
  if (image >= dataset.count) {
    throw std::out_of_range("image index " + std::to_string(image) + " out of range");
  }
  const std::size_t k = pixel_indices.size();
  const std::size_t ch = dataset.channels;
  Tensor x(Shape{k, 2});
  Tensor y(Shape{k, ch});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t p = pixel_indices[i];
    if (p >= dataset.pixels_per_image()) {
      throw std::out_of_range("pixel index " + std::to_string(p) + " out of range");
    }
    const std::size_t row = p / dataset.width;
    const std::size_t col = p % dataset.width;
    x(i, 0) = pixel_coordinate(row, dataset.height);
    x(i, 1) = pixel_coordinate(col, dataset.width);
    for (std::size_t c = 0; c < ch; ++c) y(i, c) = dataset.at(image, row, col, c) / 255.0 - 0.5;
  }
  return {std::move(x), std::move(y)};
}

namespace {

std::size_t coordinate_index(double v, std::size_t extent) {
  const double pos = extent <= 1 ? 0.0 : (v + 1.0) * 0.5 * static_cast<double>(extent - 1);
  const double r = std::round(pos);
  if (!(r >= 0.0) || r > static_cast<double>(extent - 1) || std::abs(pos - r) > 1e-9) {
    throw std::out_of_range("coordinate " + std::to_string(v) + " is not on the pixel grid");
  }
  return static_cast<std::size_t>(r);
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::uint8_t>> regression_to_pixels(
    const Tensor& x, const Tensor& y, std::size_t height, std::size_t width) {
  if (x.rank() != 2 || x.dim(1) != 2 || y.rank() != 2 || y.dim(0) != x.dim(0)) {
    throw ShapeError("regression_to_pixels: expected x [k, 2] and y [k, c]");
  }
  std::vector<std::size_t> idx(x.dim(0));
  std::vector<std::uint8_t> values(y.size());
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    idx[i] = coordinate_index(x(i, 0), height) * width + coordinate_index(x(i, 1), width);
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = std::round((y[i] + 0.5) * 255.0);
    if (v < 0.0 || v > 255.0) throw std::out_of_range("intensity out of range");
    values[i] = static_cast<std::uint8_t>(v);
  }
  return {std::move(idx), std::move(values)};
}

Tensor make_grid(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw std::invalid_argument("make_grid: extents must be positive");
  Tensor g(Shape{height * width, 2});
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      g(r * width + c, 0) = pixel_coordinate(r, height);
      g(r * width + c, 1) = pixel_coordinate(c, width);
    }
  }
  return g;
}

ImageDataset synthetic_shapes(std::size_t count, std::size_t height, std::size_t width, Rng& rng) {
  if (height < 2 || width < 2) throw std::invalid_argument("synthetic_shapes: need at least 2x2 images");
  ImageDataset ds;
  ds.count = count;
  ds.height = height;
  ds.width = width;
  ds.channels = 1;
  ds.pixels.assign(count * height * width, 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint8_t* img = ds.pixels.data() + i * height * width;
    const auto background = static_cast<std::uint8_t>(rng.uniform_int(0, 48));
    std::fill(img, img + height * width, background);
    const std::size_t shapes = rng.uniform_int(1, 2);
    for (std::size_t s = 0; s < shapes; ++s) {
      const auto ink = static_cast<std::uint8_t>(rng.uniform_int(128, 255));
      if (rng.uniform() < 0.5) {
        const std::size_t r0 = rng.uniform_int(0, height - 2);
        const std::size_t c0 = rng.uniform_int(0, width - 2);
        const std::size_t r1 = rng.uniform_int(r0 + 1, height - 1);
        const std::size_t c1 = rng.uniform_int(c0 + 1, width - 1);
        for (std::size_t r = r0; r <= r1; ++r)
          for (std::size_t c = c0; c <= c1; ++c) img[r * width + c] = ink;
      } else {
        const double cr = rng.uniform(0.0, static_cast<double>(height - 1));
        const double cc = rng.uniform(0.0, static_cast<double>(width - 1));
        const double rad = rng.uniform(1.2, 0.45 * static_cast<double>(std::min(height, width)));
        for (std::size_t r = 0; r < height; ++r) {
          for (std::size_t c = 0; c < width; ++c) {
            const double dr = static_cast<double>(r) - cr;
            const double dc = static_cast<double>(c) - cc;
            if (dr * dr + dc * dc <= rad * rad) img[r * width + c] = ink;
          }
        }
      }
    }
  }
  return ds;
}

void PixelEpisodeSpec::validate(const ImageDataset& dataset) const {
  if (dataset.count == 0) throw std::invalid_argument("pixel episodes: empty dataset");
  if (top_half) {
    if (dataset.height < 2) throw std::invalid_argument("pixel episodes: top-half mode needs height >= 2");
    return;
  }
  if (min_context < 1 || min_context > max_points) {
    throw std::invalid_argument("pixel episodes: need 1 <= min_context <= max_points");
  }
  if (max_points > dataset.pixels_per_image()) {
    throw std::invalid_argument("pixel episodes: max_points " + std::to_string(max_points) +
                                " exceeds the " + std::to_string(dataset.pixels_per_image()) +
                                " pixels per image");
  }
}

Episode pixel_episode(const ImageDataset& dataset, std::size_t image, const PixelEpisodeSpec& spec, Rng& rng) {
  spec.validate(dataset);
  const std::size_t total = dataset.pixels_per_image();
  std::vector<std::size_t> targets;
  std::vector<std::size_t> contexts;
  if (spec.top_half) {
    targets.resize(total);
    for (std::size_t p = 0; p < total; ++p) targets[p] = p;
    const std::size_t n = (dataset.height / 2) * dataset.width;
    for (std::size_t p = 0; p < n; ++p) contexts.push_back(p);
  } else {
    const std::size_t n = rng.uniform_int(spec.min_context, spec.max_points);
    const std::size_t m = n + rng.uniform_int(0, spec.max_points - n);
    targets = rng.sample_without_replacement(total, m);
    for (std::size_t i = 0; i < n; ++i) contexts.push_back(i);
  }
  auto [x, y] = image_to_regression(dataset, image, targets);
  return make_episode(std::move(x), std::move(y), std::move(contexts));
}

Episode sample_pixel_episode(const ImageDataset& dataset, const PixelEpisodeSpec& spec, Rng& rng) {
  spec.validate(dataset);
  const std::size_t image = rng.uniform_int(0, dataset.count - 1);
  return pixel_episode(dataset, image, spec, rng);
}

}  // namespace anp
