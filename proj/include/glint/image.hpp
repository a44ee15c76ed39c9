#pragma once

#include <filesystem>
#include <vector>

#include "glint/math.hpp"

namespace glint {

/// Interleaved float image, row 0 at the top.
struct Image {
  int width = 0, height = 0, channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

  std::size_t pixel_count() const { return std::size_t(width) * height; }
  double& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }
  Vec3 rgb(std::size_t pixel) const { return {data[3 * pixel], data[3 * pixel + 1], data[3 * pixel + 2]}; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

double linear_to_srgb(double v);
double srgb_to_linear(double v);

/// 8-bit formats store sRGB; the in-memory image is linear.
void write_ppm(const std::filesystem::path& path, const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);
/// Linear float map, 1 or 3 channels.
void write_pfm(const std::filesystem::path& path, const Image& img);

Image read_ppm(const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);
Image read_pfm(const std::filesystem::path& path);

/// Dispatches on extension (.ppm, .png, .pfm); throws LoadError otherwise.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

}  // namespace glint
