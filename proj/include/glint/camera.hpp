#pragma once

#include "glint/math.hpp"

namespace glint {

/// Pinhole camera. World-to-camera is x_cam = rotation * x_world + translation
/// with +z forward and +y down; pixel centers sit at integer coordinates, so a
/// centered principal point is ((width-1)/2, (height-1)/2).
struct Camera {
  Mat3 rotation = Mat3::identity();
  Vec3 translation;
  double fx = 1, fy = 1;
  double cx = 0, cy = 0;
  int width = 1, height = 1;
  double time = 0;

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return rotation.transposed() * (-translation); }

  /// Throws DomainError when fx/fy are not positive or time lies outside [0,1].
  void validate() const;
};

/// Camera at `eye` looking at `target`; `up` is the world up direction.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_radians,
               int width, int height, double time = 0);

}  // namespace glint
