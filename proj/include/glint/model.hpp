#pragma once

#include <random>
#include <span>
#include <vector>

#include "glint/deform.hpp"
#include "glint/environment.hpp"
#include "glint/gaussian.hpp"
#include "glint/mlp.hpp"

namespace glint {

struct ModelConfig {
  EncodingConfig encoding;
  NetworkConfig gaussian_net;
  NetworkConfig reflection_net;
  int env_resolution = 128;
  int env_mips = 5;
  int env_samples = 256;
  double init_opacity = 0.1;
  double init_roughness = 0.5;
};

struct InitPoint {
  Vec3 position;
  Vec3 color;  // linear RGB
};

/// Everything that is learned: canonical Gaussians, both deformation
/// networks and the canonical cube map.
struct Model {
  ModelConfig config;
  GaussianSet gaussians;
  Mlp<float> gaussian_net;
  Mlp<float> reflection_net;
  EnvironmentMap env;

  Model() : env(8, 1, 1) {}
  /// Networks initialized from `rng` (output layers zero), default cube map.
  Model(const ModelConfig& cfg, std::mt19937_64& rng);
};

/// Isotropic Gaussians at the points; scale from the mean distance to the
/// three nearest neighbors, SH DC from the point color.
GaussianSet gaussians_from_points(std::span<const InitPoint> points, const ModelConfig& cfg);

}  // namespace glint
