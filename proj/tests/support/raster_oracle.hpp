#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "glint/raster.hpp"
#include "support/testing.hpp"

namespace glint::testing {

/// Random splats with screen covariance eigenvalues in [0.5, 9] px^2.
inline std::vector<Splat2D> random_splats(std::mt19937_64& rng, int count, int width, int height) {
  std::vector<Splat2D> out;
  for (int i = 0; i < count; ++i) {
    const double l1 = uniform(rng, 0.5, 9), l2 = uniform(rng, 0.5, 9), th = uniform(rng, 0, kPi);
    const double c = std::cos(th), s = std::sin(th);
    ProjectedGaussian p;
    p.culled = false;
    p.cov = {c * c * l1 + s * s * l2, c * s * (l1 - l2), s * s * l1 + c * c * l2};
    const double det = p.cov.det();
    p.conic = {p.cov.yy / det, -p.cov.xy / det, p.cov.xx / det};
    p.mean = {uniform(rng, -2, width + 1), uniform(rng, -2, height + 1)};
    p.depth = uniform(rng, 1, 5);
    const Vec3 color{uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)};
    out.push_back(make_splat(p, uniform(rng, 0.05, 0.95), color, random_unit(rng), std::uint32_t(i)));
  }
  return out;
}

struct OraclePixel {
  Vec3 color, normal;
  double depth = 0, alpha = 0;
  // (splat, alpha clipped at the top) for every contribution, front to back.
  std::vector<std::pair<std::uint32_t, bool>> trace;
};

/// Painter's algorithm at one pixel over every splat, no tiling.
inline OraclePixel blend_pixel(const std::vector<Splat2D>& splats, int x, int y, const Vec3& bg) {
  std::vector<std::uint32_t> order(splats.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return splats[a].depth != splats[b].depth ? splats[a].depth < splats[b].depth
                                              : splats[a].index < splats[b].index;
  });
  OraclePixel px;
  double T = 1, z = 0;
  Vec3 c, n;
  for (std::uint32_t i : order) {
    if (T < kMinTransmittance) break;
    const Splat2D& s = splats[i];
    const double dx = x - s.mean.x, dy = y - s.mean.y;
    const double power = 0.5 * (s.conic.xx * dx * dx + s.conic.yy * dy * dy) + s.conic.xy * dx * dy;
    if (power < 0 || power > kCutoffPower) continue;
    const double raw = s.opacity * std::exp(-power);
    const double a = std::min(kMaxAlpha, raw);
    if (a < kMinAlpha) continue;
    c += s.color * (a * T);
    n += s.normal * (a * T);
    z += s.depth * (a * T);
    T *= 1 - a;
    px.trace.push_back({i, raw > kMaxAlpha});
  }
  px.color = c + bg * T;
  px.alpha = 1 - T;
  px.depth = px.alpha > 0 ? z / px.alpha : 0;
  px.normal = norm(n) > 1e-12 ? n / norm(n) : Vec3{};
  return px;
}

}  // namespace glint::testing
