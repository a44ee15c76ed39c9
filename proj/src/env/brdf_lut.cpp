#include <algorithm>
#include <cmath>
#include <random>

#include "glint/environment.hpp"

namespace glint {

namespace {

constexpr double kMinAlpha = 1e-4;
constexpr double kMinCos = 1e-4;

double smith_ggx_correlated(double nov, double nol, double a) {
  const double a2 = a * a;
  const double gv = nol * std::sqrt(nov * nov * (1 - a2) + a2);
  const double gl = nov * std::sqrt(nol * nol * (1 - a2) + a2);
  return 0.5 / (gv + gl);
}

}  // namespace

std::pair<double, double> integrate_env_brdf(double cos_theta, double roughness, int samples,
                                             std::uint64_t seed) {
  const double nov = std::max(cos_theta, kMinCos);
  const double alpha = std::max(roughness * roughness, kMinAlpha);
  const double a2 = alpha * alpha;
  const Vec3 v{std::sqrt(1 - nov * nov), 0, nov};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  const double shift_x = u(rng), shift_y = u(rng);

  double f1 = 0, f2 = 0;
  for (int i = 0; i < samples; ++i) {
    Vec2 xi = hammersley(std::uint32_t(i), std::uint32_t(samples));
    xi.x = std::fmod(xi.x + shift_x, 1.0);
    xi.y = std::fmod(xi.y + shift_y, 1.0);
    const double phi = 2 * kPi * xi.x;
    const double cos_h = std::sqrt((1 - xi.y) / (1 + (a2 - 1) * xi.y));
    const double sin_h = std::sqrt(std::max(0.0, 1 - cos_h * cos_h));
    const Vec3 h{sin_h * std::cos(phi), sin_h * std::sin(phi), cos_h};
    const double voh = std::max(dot(v, h), 0.0);
    const Vec3 l = h * (2 * voh) - v;
    const double nol = l.z;
    if (nol <= 0 || cos_h <= 0) continue;
    const double vis = smith_ggx_correlated(nov, nol, alpha);
    const double g_vis = 4 * vis * nol * voh / cos_h;
    const double fc = std::pow(1 - voh, 5);
    f1 += (1 - fc) * g_vis;
    f2 += fc * g_vis;
  }
  return {f1 / samples, f2 / samples};
}

EnvBrdfLut::EnvBrdfLut(std::uint64_t seed, int samples) : table_(2 * kSize * kSize) {
  for (int j = 0; j < kSize; ++j)
    for (int i = 0; i < kSize; ++i) {
      const auto [a, b] = integrate_env_brdf(double(i) / (kSize - 1), double(j) / (kSize - 1), samples, seed);
      table_[2 * (j * kSize + i)] = a;
      table_[2 * (j * kSize + i) + 1] = b;
    }
}

EnvBrdfLut::Sample EnvBrdfLut::lookup(double cos_theta, double roughness) const {
  const double scale = kSize - 1;
  const double x = std::clamp(cos_theta, 0.0, 1.0) * scale;
  const double y = std::clamp(roughness, 0.0, 1.0) * scale;
  const int i0 = std::min(int(x), kSize - 2), j0 = std::min(int(y), kSize - 2);
  const double fx = x - i0, fy = y - j0;
  const bool x_inside = cos_theta > 0 && cos_theta < 1;
  const bool y_inside = roughness > 0 && roughness < 1;
  Sample s;
  for (int c = 0; c < 2; ++c) {
    auto at = [&](int i, int j) { return table_[2 * (j * kSize + i) + c]; };
    const double v00 = at(i0, j0), v10 = at(i0 + 1, j0), v01 = at(i0, j0 + 1), v11 = at(i0 + 1, j0 + 1);
    const double value = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
    const double dx = x_inside ? scale * ((1 - fy) * (v10 - v00) + fy * (v11 - v01)) : 0;
    const double dy = y_inside ? scale * ((1 - fx) * (v01 - v00) + fx * (v11 - v10)) : 0;
    if (c == 0) {
      s.f1 = value;
      s.df1_dcos = dx;
      s.df1_drough = dy;
    } else {
      s.f2 = value;
      s.df2_dcos = dx;
      s.df2_drough = dy;
    }
  }
  return s;
}

}  // namespace glint
