#include "glint/gaussian.hpp"

#include <cmath>

#include "glint/error.hpp"

namespace glint {

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw DomainError("camera focal lengths must be positive");
  if (!(time >= 0.0 && time <= 1.0)) throw DomainError("camera time must lie in [0,1]");
  if (width <= 0 || height <= 0) throw DomainError("camera image size must be positive");
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y, int width,
               int height, double time) {
  const Vec3 forward = normalize(target - eye);
  // +x right, +y down in the image.
  const Vec3 right = normalize(cross(forward, up));
  const Vec3 down = cross(forward, right);
  Camera cam;
  cam.rotation = Mat3{{right.x, right.y, right.z, down.x, down.y, down.z, forward.x, forward.y,
                       forward.z}};
  cam.translation = -(cam.rotation * eye);
  cam.width = width;
  cam.height = height;
  cam.fy = 0.5 * height / std::tan(0.5 * fov_y);
  cam.fx = cam.fy;
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  cam.time = time;
  return cam;
}

void GaussianSet::resize(std::size_t n) {
  position.resize(3 * n);
  rotation.resize(4 * n);
  log_scale.resize(3 * n);
  raw_opacity.resize(n);
  sh_dc.resize(3 * n);
  sh_rest.resize(45 * n);
  specular_tint.resize(3 * n);
  raw_roughness.resize(n);
  normal_residual.resize(3 * n);
}

GaussianSet GaussianSet::zeros_like(const GaussianSet& other) {
  GaussianSet g;
  g.resize(other.size());
  return g;
}

void GaussianSet::set_zero() {
  for_each_attribute([](std::string_view, int, std::vector<double>& a) {
    std::fill(a.begin(), a.end(), 0.0);
  });
}

void GaussianSet::for_each_attribute(
    const std::function<void(std::string_view, int, std::vector<double>&)>& f) {
  f("position", 3, position);
  f("rotation", 4, rotation);
  f("log_scale", 3, log_scale);
  f("raw_opacity", 1, raw_opacity);
  f("sh_dc", 3, sh_dc);
  f("sh_rest", 45, sh_rest);
  f("specular_tint", 3, specular_tint);
  f("raw_roughness", 1, raw_roughness);
  f("normal_residual", 3, normal_residual);
}

void GaussianSet::for_each_attribute(
    const std::function<void(std::string_view, int, const std::vector<double>&)>& f) const {
  const_cast<GaussianSet*>(this)->for_each_attribute(
      [&](std::string_view name, int width, std::vector<double>& a) { f(name, width, a); });
}

GaussianSet GaussianSet::gather(const std::vector<std::size_t>& source) const {
  GaussianSet out;
  out.resize(source.size());
  auto dst_it = std::vector<std::vector<double>*>{};
  out.for_each_attribute([&](std::string_view, int, std::vector<double>& a) { dst_it.push_back(&a); });
  std::size_t slot = 0;
  for_each_attribute([&](std::string_view, int width, const std::vector<double>& a) {
    std::vector<double>& dst = *dst_it[slot++];
    for (std::size_t i = 0; i < source.size(); ++i)
      for (int k = 0; k < width; ++k) dst[i * width + k] = a[source[i] * width + k];
  });
  return out;
}

ShCoefficients GaussianSet::sh(std::size_t i) const {
  ShCoefficients c;
  c[0] = {sh_dc[3 * i], sh_dc[3 * i + 1], sh_dc[3 * i + 2]};
  for (int k = 1; k < kShCoefficientCount; ++k) {
    const double* p = &sh_rest[45 * i + 3 * (k - 1)];
    c[k] = {p[0], p[1], p[2]};
  }
  return c;
}

namespace {
void put3(std::vector<double>& a, std::size_t i, const Vec3& v) {
  a[3 * i] = v.x;
  a[3 * i + 1] = v.y;
  a[3 * i + 2] = v.z;
}
void add3(std::vector<double>& a, std::size_t i, const Vec3& v) {
  a[3 * i] += v.x;
  a[3 * i + 1] += v.y;
  a[3 * i + 2] += v.z;
}
}  // namespace

void GaussianSet::set_pos(std::size_t i, const Vec3& v) { put3(position, i, v); }
void GaussianSet::set_scale_log(std::size_t i, const Vec3& v) { put3(log_scale, i, v); }
void GaussianSet::set_tint(std::size_t i, const Vec3& v) { put3(specular_tint, i, v); }
void GaussianSet::set_residual(std::size_t i, const Vec3& v) { put3(normal_residual, i, v); }
void GaussianSet::set_rot(std::size_t i, const Quat& q) {
  rotation[4 * i] = q.w;
  rotation[4 * i + 1] = q.x;
  rotation[4 * i + 2] = q.y;
  rotation[4 * i + 3] = q.z;
}
void GaussianSet::set_sh(std::size_t i, const ShCoefficients& c) {
  put3(sh_dc, i, c[0]);
  for (int k = 1; k < kShCoefficientCount; ++k) {
    double* p = &sh_rest[45 * i + 3 * (k - 1)];
    p[0] = c[k].x;
    p[1] = c[k].y;
    p[2] = c[k].z;
  }
}

void GaussianSet::add_pos(std::size_t i, const Vec3& v) { add3(position, i, v); }
void GaussianSet::add_scale_log(std::size_t i, const Vec3& v) { add3(log_scale, i, v); }
void GaussianSet::add_tint(std::size_t i, const Vec3& v) { add3(specular_tint, i, v); }
void GaussianSet::add_residual(std::size_t i, const Vec3& v) { add3(normal_residual, i, v); }
void GaussianSet::add_rot(std::size_t i, const Quat& q) {
  rotation[4 * i] += q.w;
  rotation[4 * i + 1] += q.x;
  rotation[4 * i + 2] += q.y;
  rotation[4 * i + 3] += q.z;
}
void GaussianSet::add_sh(std::size_t i, const ShCoefficients& c) {
  add3(sh_dc, i, c[0]);
  for (int k = 1; k < kShCoefficientCount; ++k) {
    double* p = &sh_rest[45 * i + 3 * (k - 1)];
    p[0] += c[k].x;
    p[1] += c[k].y;
    p[2] += c[k].z;
  }
}

Mat3 build_covariance(const Vec3& log_scale, const Quat& r) {
  const Mat3 rot = quat_to_rotmat(r);
  const Vec3 s{std::exp(log_scale.x), std::exp(log_scale.y), std::exp(log_scale.z)};
  const Mat3 m = rot * Mat3::diagonal(s);
  return m * m.transposed();
}

void build_covariance_backward(const Vec3& log_scale, const Quat& r, const Mat3& d_sigma,
                               Vec3& d_log_scale, Quat& d_r) {
  const Mat3 rot = quat_to_rotmat(r);
  const Vec3 s{std::exp(log_scale.x), std::exp(log_scale.y), std::exp(log_scale.z)};
  const Mat3 m = rot * Mat3::diagonal(s);
  const Mat3 d_m = (d_sigma + d_sigma.transposed()) * m;
  Mat3 d_rot;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d_rot(i, j) = d_m(i, j) * s[j];
  for (int j = 0; j < 3; ++j) {
    double ds = 0;
    for (int i = 0; i < 3; ++i) ds += rot(i, j) * d_m(i, j);
    d_log_scale[j] += ds * s[j];
  }
  const Quat dq = quat_to_rotmat_backward(r, d_rot);
  d_r = d_r + dq;
}

namespace {

// Rows of T = J W (2x3).
struct ProjectionJacobian {
  Vec3 t0, t1;
};

ProjectionJacobian projection_jacobian(const Camera& cam, const Vec3& p) {
  const double iz = 1.0 / p.z;
  const double iz2 = iz * iz;
  const Vec3 j0{cam.fx * iz, 0, -cam.fx * p.x * iz2};
  const Vec3 j1{0, cam.fy * iz, -cam.fy * p.y * iz2};
  const Mat3& w = cam.rotation;
  // (J W)_r = sum_k J_rk W_k
  return {w.row(0) * j0.x + w.row(1) * j0.y + w.row(2) * j0.z,
          w.row(0) * j1.x + w.row(1) * j1.y + w.row(2) * j1.z};
}

}  // namespace

ProjectedGaussian project_covariance(const Mat3& sigma, const Camera& cam, const Vec3& pos_world,
                                     double near_plane) {
  ProjectedGaussian out;
  out.cam_pos = cam.to_camera(pos_world);
  out.depth = out.cam_pos.z;
  if (!(out.cam_pos.z > near_plane)) return out;
  out.culled = false;
  const Vec3& p = out.cam_pos;
  out.mean = {cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy};
  const auto [t0, t1] = projection_jacobian(cam, p);
  const Vec3 s0 = sigma * t0;
  const Vec3 s1 = sigma * t1;
  out.cov = {dot(t0, s0) + kLowPassVariance, dot(t0, s1), dot(t1, s1) + kLowPassVariance};
  const double det = out.cov.det();
  out.conic = {out.cov.yy / det, -out.cov.xy / det, out.cov.xx / det};
  return out;
}

void project_covariance_backward(const Mat3& sigma, const Camera& cam, const ProjectedGaussian& pg,
                                 const ProjectionAdjoint& adj, Vec3& d_pos_world, Mat3& d_sigma) {
  if (pg.culled) return;
  const Vec3& p = pg.cam_pos;
  // dL/dSigma' = -Q G Q with G the symmetric gradient w.r.t. the conic matrix.
  const Sym2& q = pg.conic;
  const double ga = adj.conic.xx, gb = 0.5 * adj.conic.xy, gc = adj.conic.yy;
  // QG
  const double m00 = q.xx * ga + q.xy * gb, m01 = q.xx * gb + q.xy * gc;
  const double m10 = q.xy * ga + q.yy * gb, m11 = q.xy * gb + q.yy * gc;
  const double dc00 = -(m00 * q.xx + m01 * q.xy);
  const double dc01 = -(m00 * q.xy + m01 * q.yy);
  const double dc11 = -(m10 * q.xy + m11 * q.yy);

  const auto [t0, t1] = projection_jacobian(cam, p);
  // d_sigma += T^T dC T
  d_sigma += Mat3::outer(t0, t0) * dc00 + (Mat3::outer(t0, t1) + Mat3::outer(t1, t0)) * dc01 +
             Mat3::outer(t1, t1) * dc11;
  // dT = 2 dC T Sigma
  const Vec3 st0 = sigma * t0;
  const Vec3 st1 = sigma * t1;
  const Vec3 dt0 = (st0 * dc00 + st1 * dc01) * 2.0;
  const Vec3 dt1 = (st0 * dc01 + st1 * dc11) * 2.0;
  // dJ = dT W^T
  const Mat3& w = cam.rotation;
  const Vec3 dj0 = w * dt0;
  const Vec3 dj1 = w * dt1;

  const double iz = 1.0 / p.z, iz2 = iz * iz, iz3 = iz2 * iz;
  Vec3 dp;
  dp.z += -cam.fx * iz2 * dj0.x;
  dp.x += -cam.fx * iz2 * dj0.z;
  dp.z += 2 * cam.fx * p.x * iz3 * dj0.z;
  dp.z += -cam.fy * iz2 * dj1.y;
  dp.y += -cam.fy * iz2 * dj1.z;
  dp.z += 2 * cam.fy * p.y * iz3 * dj1.z;

  dp.x += cam.fx * iz * adj.mean.x;
  dp.z += -cam.fx * p.x * iz2 * adj.mean.x;
  dp.y += cam.fy * iz * adj.mean.y;
  dp.z += -cam.fy * p.y * iz2 * adj.mean.y;
  dp.z += adj.depth;

  d_pos_world += w.transposed() * dp;
}

GaussianAxes gaussian_axes(const Vec3& log_scale, const Quat& r) {
  const Mat3 rot = quat_to_rotmat(r);
  int lo = 0, hi = 0;
  for (int k = 1; k < 3; ++k) {
    if (log_scale[k] < log_scale[lo]) lo = k;
    if (log_scale[k] > log_scale[hi]) hi = k;
  }
  GaussianAxes a;
  a.shortest_index = lo;
  a.longest_index = hi;
  a.shortest = rot.column(lo);
  a.longest = rot.column(hi);
  a.shortest_length = std::exp(log_scale[lo]);
  a.longest_length = std::exp(log_scale[hi]);
  return a;
}

}  // namespace glint
