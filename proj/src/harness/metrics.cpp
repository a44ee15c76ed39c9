#include "glint/metrics.hpp"

#include <cmath>
#include <limits>

#include "glint/error.hpp"
#include "glint/loss.hpp"

namespace glint {

double metric_psnr(const Image& a, const Image& b) { return psnr(a, b); }

double metric_ssim(const Image& a, const Image& b) { return ssim(a, b); }

double mean_angular_error(const Image& a, const Image& b, std::span<const std::uint8_t> mask) {
  if (!a.same_shape(b) || a.channels != 3) throw UsageError("normal maps must be 3-channel images of one size");
  if (mask.size() != a.pixel_count()) throw UsageError("mask size does not match the normal maps");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    if (!mask[p]) continue;
    const Vec3 u = a.rgb(p), v = b.rgb(p);
    const double nu = norm(u), nv = norm(v);
    if (nu == 0 || nv == 0) continue;
    sum += std::acos(std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0));
    ++n;
  }
  return n ? sum / double(n) * 180 / kPi : std::numeric_limits<double>::quiet_NaN();
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

ModelChecksums model_checksums(const Model& m) {
  ModelChecksums c;
  c.gaussian_net = checksum(m.gaussian_net.parameters());
  c.reflection_net = checksum(m.reflection_net.parameters());
  c.env = checksum(std::span<const double>(m.env.raw()));
  std::uint64_t frozen = 0xcbf29ce484222325ull, free = frozen;
  m.gaussians.for_each_attribute([&](std::string_view name, int, const std::vector<double>& a) {
    const bool is_free = name == "sh_dc" || name == "specular_tint" || name == "raw_roughness";
    std::uint64_t& h = is_free ? free : frozen;
    h = checksum(std::span<const double>(a), h);
  });
  c.frozen_attributes = frozen;
  c.free_attributes = free;
  c.count = m.gaussians.size();
  return c;
}

}  // namespace glint
