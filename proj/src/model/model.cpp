#include "glint/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "glint/sh.hpp"

namespace glint {

Model::Model(const ModelConfig& cfg, std::mt19937_64& rng)
    : config(cfg),
      gaussian_net(gaussian_net_shape(cfg.encoding, cfg.gaussian_net)),
      reflection_net(reflection_net_shape(cfg.encoding, cfg.reflection_net)),
      env(cfg.env_resolution, cfg.env_mips, cfg.env_samples) {
  gaussian_net.initialize(rng);
  reflection_net.initialize(rng);
}

GaussianSet gaussians_from_points(std::span<const InitPoint> points, const ModelConfig& cfg) {
  GaussianSet g;
  const std::size_t n = points.size();
  g.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> best{1e300, 1e300, 1e300};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec3 d = points[j].position - points[i].position;
      const double d2 = dot(d, d);
      if (d2 < best[2]) {
        best[2] = d2;
        std::sort(best.begin(), best.end());
      }
    }
    double mean = 0;
    int used = 0;
    for (double d2 : best)
      if (d2 < 1e299) {
        mean += std::sqrt(d2);
        ++used;
      }
    mean = used ? std::max(mean / used, 1e-7) : 0.01;
    g.set_pos(i, points[i].position);
    g.set_rot(i, {1, 0, 0, 0});
    g.set_scale_log(i, Vec3{1, 1, 1} * std::log(mean));
    g.raw_opacity[i] = inverse_sigmoid(cfg.init_opacity);
    g.raw_roughness[i] = inverse_sigmoid(cfg.init_roughness);
    for (int c = 0; c < 3; ++c) g.sh_dc[3 * i + c] = (points[i].color[c] - 0.5) / kShC0;
  }
  return g;
}

}  // namespace glint
