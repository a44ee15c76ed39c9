#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "glint/image.hpp"
#include "glint/model.hpp"

namespace glint {

/// 10 log10(1 / MSE), capped at 99 dB. UsageError on a shape mismatch.
double metric_psnr(const Image& a, const Image& b);
/// Same 11x11, sigma 1.5 window as the training loss.
double metric_ssim(const Image& a, const Image& b);

/// Mean angle in degrees between two normal maps over pixels where `mask` is
/// set and both normals are non-zero; NaN when no pixel qualifies.
double mean_angular_error(const Image& a, const Image& b, std::span<const std::uint8_t> mask);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ull);

template <typename T>
std::uint64_t checksum(std::span<const T> values, std::uint64_t hash = 0xcbf29ce484222325ull) {
  return fnv1a(values.data(), values.size_bytes(), hash);
}

struct ModelChecksums {
  std::uint64_t gaussian_net = 0;
  std::uint64_t reflection_net = 0;
  std::uint64_t env = 0;
  std::uint64_t frozen_attributes = 0;  // every attribute except sh_dc, specular_tint, raw_roughness
  std::uint64_t free_attributes = 0;    // sh_dc, specular_tint, raw_roughness
  std::size_t count = 0;
};

ModelChecksums model_checksums(const Model& m);

}  // namespace glint
