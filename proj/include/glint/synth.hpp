#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glint/camera.hpp"
#include "glint/environment.hpp"
#include "glint/math.hpp"

namespace glint {

enum class Recipe { StaticMirrorSphere, MovingSphere, RotatingLight };

/// Accepts STATIC_MIRROR_SPHERE, MOVING_SPHERE, ROTATING_LIGHT; UsageError otherwise.
Recipe parse_recipe(const std::string& name);
const char* recipe_name(Recipe r);

struct SynthConfig {
  Recipe recipe = Recipe::StaticMirrorSphere;
  int width = 64, height = 64;
  int views = 0;       // 0: 8 for the static recipe, 24 for the dynamic ones
  int test_views = 0;  // static recipe only: extra held-out views between the training ones
  std::uint64_t seed = 0;
  std::string image_format = "png";  // png, ppm or pfm
  int supersample = 4;               // per-axis stratified samples per pixel
  int env_resolution = 128;          // exported ground-truth cube map
  int points = 4000;                 // initialization points
  double amplitude = 0.8;            // MOVING_SPHERE displacement between t = 0 and t = 1
  double light_rotation = kPi / 2;   // ROTATING_LIGHT sky rotation between t = 0 and t = 1
};

/// Analytic scene: checker floor on y = 0 under a fixed sun, and a mirror
/// sphere reflecting a procedural sky. Reflection rays see the sky only.
class SyntheticScene {
 public:
  explicit SyntheticScene(const SynthConfig& cfg);

  static constexpr double kSphereRadius = 0.5;
  static constexpr double kCheckerSize = 0.5;

  Vec3 sphere_center(double t) const;
  Vec3 sun_direction(double t) const;  // brightest sky direction
  /// Sky radiance seen along `dir` at time t.
  Vec3 sky(const Vec3& dir, double t) const;

  struct Hit {
    bool hit = false;
    bool sphere = false;
    double distance = 0;
    Vec3 point, normal;
  };
  Hit trace(const Vec3& origin, const Vec3& dir, double t) const;
  /// Radiance along a primary ray.
  Vec3 radiance(const Vec3& origin, const Vec3& dir, double t) const;

  std::vector<Camera> cameras() const;
  std::vector<std::size_t> test_indices() const;

  /// Canonical (t = 0) sky as a cube map.
  CubeImage sky_cubemap(int resolution, double t = 0) const;

  const SynthConfig& config() const { return cfg_; }

 private:
  double sky_angle(double t) const;
  SynthConfig cfg_;
};

/// World-space ray through pixel coordinates (u, v).
void camera_ray(const Camera& cam, double u, double v, Vec3& origin, Vec3& dir);

/// Writes images, ground-truth normal/depth PFMs, the sky cube map, cameras.json
/// and points.json under `out`. Deterministic given the config.
void generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out);

}  // namespace glint
