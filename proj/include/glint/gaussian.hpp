#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "glint/camera.hpp"
#include "glint/math.hpp"
#include "glint/sh.hpp"

namespace glint {

/// Canonical Gaussians in structure-of-arrays layout. Every attribute is a flat
/// double array of `width * size()` entries; accessors give typed views.
///
/// Parameterization: scales live in log space, opacity and roughness behind a
/// sigmoid, rotations are raw (possibly non-unit) quaternions (w, x, y, z),
/// specular tint is stored directly and kept inside [0,1] by the optimizer.
struct GaussianSet {
  std::vector<double> position;         // 3
  std::vector<double> rotation;         // 4
  std::vector<double> log_scale;        // 3
  std::vector<double> raw_opacity;      // 1
  std::vector<double> sh_dc;            // 3: degree-0 RGB
  std::vector<double> sh_rest;          // 45: degrees 1..3, coefficient-major RGB
  std::vector<double> specular_tint;    // 3
  std::vector<double> raw_roughness;    // 1
  std::vector<double> normal_residual;  // 3

  std::size_t size() const { return raw_opacity.size(); }
  bool empty() const { return size() == 0; }

  void resize(std::size_t n);
  /// Same shape as `other`, all zeros (used for gradients).
  static GaussianSet zeros_like(const GaussianSet& other);
  void set_zero();

  /// Calls f(name, width, array) for every attribute in a fixed order.
  void for_each_attribute(const std::function<void(std::string_view, int, std::vector<double>&)>& f);
  void for_each_attribute(
      const std::function<void(std::string_view, int, const std::vector<double>&)>& f) const;

  /// Keeps rows in `source` order (indices may repeat).
  GaussianSet gather(const std::vector<std::size_t>& source) const;

  Vec3 pos(std::size_t i) const { return {position[3 * i], position[3 * i + 1], position[3 * i + 2]}; }
  Quat rot(std::size_t i) const {
    return {rotation[4 * i], rotation[4 * i + 1], rotation[4 * i + 2], rotation[4 * i + 3]};
  }
  Vec3 scale_log(std::size_t i) const {
    return {log_scale[3 * i], log_scale[3 * i + 1], log_scale[3 * i + 2]};
  }
  Vec3 tint(std::size_t i) const {
    return {specular_tint[3 * i], specular_tint[3 * i + 1], specular_tint[3 * i + 2]};
  }
  Vec3 residual(std::size_t i) const {
    return {normal_residual[3 * i], normal_residual[3 * i + 1], normal_residual[3 * i + 2]};
  }
  double opacity(std::size_t i) const { return sigmoid(raw_opacity[i]); }
  double roughness(std::size_t i) const { return sigmoid(raw_roughness[i]); }
  ShCoefficients sh(std::size_t i) const;

  void set_pos(std::size_t i, const Vec3& v);
  void set_rot(std::size_t i, const Quat& q);
  void set_scale_log(std::size_t i, const Vec3& v);
  void set_tint(std::size_t i, const Vec3& v);
  void set_residual(std::size_t i, const Vec3& v);
  void set_sh(std::size_t i, const ShCoefficients& c);

  void add_pos(std::size_t i, const Vec3& v);
  void add_rot(std::size_t i, const Quat& q);
  void add_scale_log(std::size_t i, const Vec3& v);
  void add_tint(std::size_t i, const Vec3& v);
  void add_residual(std::size_t i, const Vec3& v);
  void add_sh(std::size_t i, const ShCoefficients& c);
};

/// Sigma = R diag(exp(log_scale))^2 R^T.
Mat3 build_covariance(const Vec3& log_scale, const Quat& r);

/// Adjoint of build_covariance for a (not necessarily symmetric) dL/dSigma.
void build_covariance_backward(const Vec3& log_scale, const Quat& r, const Mat3& d_sigma,
                               Vec3& d_log_scale, Quat& d_r);

struct Sym2 {
  double xx = 0, xy = 0, yy = 0;
  double det() const { return xx * yy - xy * xy; }
};

inline constexpr double kLowPassVariance = 0.3;
inline constexpr double kDefaultNearPlane = 0.01;

struct ProjectedGaussian {
  bool culled = true;
  Vec3 cam_pos;   // camera-space center
  Vec2 mean;      // pixels
  Sym2 cov;       // screen covariance including the low-pass term
  Sym2 conic;     // inverse of cov
  double depth = 0;
};

/// Sigma' = J W Sigma W^T J^T + 0.3 I with the affine Jacobian J at the center.
/// Centers at or behind the near plane come back with culled = true.
ProjectedGaussian project_covariance(const Mat3& sigma, const Camera& cam, const Vec3& pos_world,
                                     double near_plane = kDefaultNearPlane);

/// Adjoints of the projection outputs. `conic.xy` is the adjoint of the single
/// off-diagonal parameter (it appears twice in the quadratic form).
struct ProjectionAdjoint {
  Vec2 mean;
  Sym2 conic;
  double depth = 0;
};

void project_covariance_backward(const Mat3& sigma, const Camera& cam, const ProjectedGaussian& p,
                                 const ProjectionAdjoint& adj, Vec3& d_pos_world, Mat3& d_sigma);

struct GaussianAxes {
  Vec3 shortest;
  double shortest_length = 0;
  int shortest_index = 0;
  Vec3 longest;
  double longest_length = 0;
  int longest_index = 0;
  /// All scales equal: shortest and longest coincide (column 0).
  bool degenerate() const { return shortest_index == longest_index; }
};

/// Shortest/longest local axes (rotation columns) with lengths exp(log_scale);
/// equal scales resolve to the lowest index.
GaussianAxes gaussian_axes(const Vec3& log_scale, const Quat& r);

}  // namespace glint
