#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "glint/math.hpp"

namespace glint {

inline constexpr int kCubeFaces = 6;  // +X, -X, +Y, -Y, +Z, -Z

/// RGB cubemap at one resolution. Texel (face, row, col) lives at
/// ((face * R + row) * R + col) * 3; col follows s, row follows t of the
/// usual cube-map face parameterization.
struct CubeImage {
  int resolution = 0;
  std::vector<double> data;

  CubeImage() = default;
  explicit CubeImage(int res) : resolution(res), data(std::size_t(kCubeFaces) * res * res * 3, 0.0) {}
  std::size_t texel_count() const { return std::size_t(kCubeFaces) * resolution * resolution; }
  std::size_t texel(int face, int row, int col) const {
    return (std::size_t(face) * resolution + row) * resolution + col;
  }
  Vec3 at(std::size_t t) const { return {data[3 * t], data[3 * t + 1], data[3 * t + 2]}; }
  void set(std::size_t t, const Vec3& v) {
    data[3 * t] = v.x;
    data[3 * t + 1] = v.y;
    data[3 * t + 2] = v.z;
  }
};

/// Continuous texel coordinates of a direction: col = s*R - 0.5, row = t*R - 0.5,
/// plus their partials with respect to the (unnormalized) direction.
struct CubeCoord {
  int face = 0;
  double col = 0, row = 0;
  Vec3 dcol, drow;
};

/// Face by dominant axis (ties resolve x, then y, then z). DomainError on a zero direction.
CubeCoord cube_coord(const Vec3& dir, int resolution);

/// Unnormalized direction through the center of a texel.
Vec3 texel_direction(int face, int row, int col, int resolution);

/// Solid angle subtended by a texel.
double texel_solid_angle(int row, int col, int resolution);

/// Four clamp-to-edge bilinear taps and the weight partials w.r.t. (col,row).
struct BilinearTaps {
  std::array<std::size_t, 4> texel{};
  std::array<double, 4> weight{};
  std::array<double, 4> dweight_dcol{};
  std::array<double, 4> dweight_drow{};
};
BilinearTaps bilinear_taps(int face, double col, double row, int resolution);

/// Reference bilinear lookup on one cube image.
Vec3 sample_bilinear(const CubeImage& img, const Vec3& dir);

/// Sparse linear map from the box-filtered pyramid of the base level to one
/// prefiltered mip level (CSR layout).
struct PrefilterOperator {
  int resolution = 0;
  std::vector<std::uint32_t> row_begin;
  std::vector<std::uint32_t> source;  // index into the flattened pyramid
  std::vector<float> weight;
};

/// Box-downsample pyramid offsets: level p (resolution R >> p) begins at offsets[p].
struct PyramidLayout {
  std::vector<int> resolution;
  std::vector<std::size_t> offset;
  std::size_t total = 0;
};
PyramidLayout pyramid_layout(int base_resolution);

/// GGX (N = V = R) filtered importance sampling operator for one level.
/// Results are cached per (base resolution, level resolution, roughness, samples).
std::shared_ptr<const PrefilterOperator> prefilter_operator(int base_resolution, int level_resolution,
                                                            double roughness, int samples = 256);

/// Per-level radiance adjoints produced by queries.
struct EnvironmentGradient {
  std::vector<std::vector<double>> levels;
  void zero();
  bool empty() const { return levels.empty(); }
};

/// Learnable environment: raw base texels (softplus to radiance) and a lazily
/// rebuilt prefiltered chain, level m at resolution R >> m and roughness m / M.
class EnvironmentMap {
 public:
  explicit EnvironmentMap(int base_resolution = 128, int mip_levels = 5, int samples = 256);

  int base_resolution() const { return base_resolution_; }
  int mip_levels() const { return mip_levels_; }
  int level_resolution(int m) const { return base_resolution_ >> m; }

  const std::vector<double>& raw() const { return raw_; }
  /// Invalidates the prefiltered chain.
  std::vector<double>& mutable_raw() {
    dirty_ = true;
    return raw_;
  }
  void set_radiance(const CubeImage& radiance);
  void set_constant(const Vec3& radiance);
  CubeImage base_radiance() const;

  const CubeImage& level(int m) const;

  Vec3 query(const Vec3& dir, double roughness) const;
  /// Accumulates level adjoints, direction and roughness adjoints.
  void query_backward(const Vec3& dir, double roughness, const Vec3& d_rgb, EnvironmentGradient& grad,
                      Vec3& d_dir, double& d_roughness) const;

  EnvironmentGradient make_gradient() const;
  /// Pulls level adjoints back to the raw base texels (accumulates).
  void levels_backward(const EnvironmentGradient& grad, std::vector<double>& d_raw) const;

 private:
  void rebuild() const;

  int base_resolution_;
  int mip_levels_;
  int samples_;
  std::vector<double> raw_;
  mutable bool dirty_ = true;
  mutable std::vector<CubeImage> levels_;
  mutable std::vector<std::shared_ptr<const PrefilterOperator>> operators_;
};

/// Pre-integrated environment BRDF over (cos theta, roughness).
class EnvBrdfLut {
 public:
  static constexpr int kSize = 32;

  explicit EnvBrdfLut(std::uint64_t seed = 0, int samples = 1024);

  double f1(int cos_index, int rough_index) const { return table_[2 * (rough_index * kSize + cos_index)]; }
  double f2(int cos_index, int rough_index) const {
    return table_[2 * (rough_index * kSize + cos_index) + 1];
  }

  struct Sample {
    double f1 = 0, f2 = 0;
    double df1_dcos = 0, df2_dcos = 0;
    double df1_drough = 0, df2_drough = 0;
  };
  /// Bilinear lookup with clamping to the grid.
  Sample lookup(double cos_theta, double roughness) const;

  const std::vector<double>& table() const { return table_; }

 private:
  std::vector<double> table_;
};

/// Split-sum integrand for one (cos theta, roughness) node: returns (F1, F2).
std::pair<double, double> integrate_env_brdf(double cos_theta, double roughness, int samples,
                                             std::uint64_t seed);

Vec2 hammersley(std::uint32_t i, std::uint32_t n);

}  // namespace glint
