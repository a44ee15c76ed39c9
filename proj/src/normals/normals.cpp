#include "glint/normals.hpp"

#include <algorithm>
#include <cmath>

#include "glint/error.hpp"

namespace glint {

namespace {

constexpr double kCollapseNorm = 1e-8;

void check_orthonormal(const Vec3& a, const Vec3& b) {
  constexpr double tol = 1e-6;
  if (std::abs(dot(a, a) - 1) > tol || std::abs(dot(b, b) - 1) > tol || std::abs(dot(a, b)) > tol)
    throw GeometryError("axis pair is not orthonormal");
}

Mat3 frame(const Vec3& s, const Vec3& l) { return Mat3::from_columns(s, l, cross(s, l)); }

}  // namespace

std::pair<Vec3, Vec3> align_axes(const Vec3& v_s, const Vec3& v_l, const Vec3& vt_s, const Vec3& vt_l) {
  return {dot(v_s, vt_s) > 0 ? vt_s : -vt_s, dot(v_l, vt_l) > 0 ? vt_l : -vt_l};
}

Mat3 rotation_from_axes(const Vec3& v_s, const Vec3& v_l, const Vec3& vt_s, const Vec3& vt_l) {
  check_orthonormal(v_s, v_l);
  check_orthonormal(vt_s, vt_l);
  return frame(vt_s, vt_l) * frame(v_s, v_l).transposed();
}

double oblateness(double short_length, double long_length) {
  if (!(long_length > 0)) throw DomainError("oblateness of a zero-length axis");
  return (long_length - short_length) / long_length;
}

Vec3 deform_normal_residual(const Vec3& dn, const Mat3& r, double beta, double beta_t) {
  return (r * dn) * (beta / std::max(beta_t, kOblatenessEpsilon));
}

Vec3 final_normal(const Vec3& dn_t, const Vec3& vt_s, const Vec3& omega_o) {
  const Vec3 n = dn_t + vt_s;
  if (norm(n) < kCollapseNorm) return dot(vt_s, omega_o) > 0 ? vt_s : -vt_s;
  return normalize(dot(n, omega_o) > 0 ? n : -n);
}

double gamma_weight(double short_length, double long_length, int k) {
  const double w = short_length / long_length;
  const double g2 = std::max(0.0, 1 - w * w);
  return std::pow(std::sqrt(g2), k);
}

double gamma_weight_from_log_scale(const Vec3& deformed_log_scale, int k) {
  const double lo = std::min({deformed_log_scale.x, deformed_log_scale.y, deformed_log_scale.z});
  const double hi = std::max({deformed_log_scale.x, deformed_log_scale.y, deformed_log_scale.z});
  return gamma_weight(std::exp(lo), std::exp(hi), k);
}

NormalFrame physical_normal(const NormalInputs& in, NormalMode mode) {
  NormalFrame f;
  f.deformed = gaussian_axes(in.deformed_log_scale, in.deformed_rotation);
  f.deformed_rot = quat_to_rotmat(in.deformed_rotation);

  if (mode == NormalMode::ShortestAxis) {
    f.aligned_short = f.deformed.shortest;
    f.orientation = dot(f.aligned_short, in.view_dir) > 0 ? 1 : -1;
    f.normal = f.aligned_short * f.orientation;
    return f;
  }

  f.canonical = gaussian_axes(in.log_scale, in.rotation);
  f.canonical_rot = quat_to_rotmat(in.rotation);

  f.sign_short = dot(f.canonical.shortest, f.deformed.shortest) > 0 ? 1 : -1;
  f.sign_long = dot(f.canonical.longest, f.deformed.longest) > 0 ? 1 : -1;
  f.aligned_short = f.deformed.shortest * f.sign_short;
  f.aligned_long = f.deformed.longest * f.sign_long;

  f.rotation_fallback = f.canonical.degenerate() || f.deformed.degenerate();
  if (f.rotation_fallback) {
    f.rotation = f.deformed_rot * f.canonical_rot.transposed();
  } else {
    f.rotation = frame(f.aligned_short, f.aligned_long) *
                 frame(f.canonical.shortest, f.canonical.longest).transposed();
  }

  f.beta = oblateness(f.canonical.shortest_length, f.canonical.longest_length);
  f.beta_t = oblateness(f.deformed.shortest_length, f.deformed.longest_length);
  f.deformed_residual = deform_normal_residual(in.residual, f.rotation, f.beta, f.beta_t);

  f.sum = f.deformed_residual + f.aligned_short;
  if (norm(f.sum) < kCollapseNorm) {
    f.collapsed = true;
    f.orientation = dot(f.aligned_short, in.view_dir) > 0 ? 1 : -1;
    f.normal = f.aligned_short * f.orientation;
    return f;
  }
  f.orientation = dot(f.sum, in.view_dir) > 0 ? 1 : -1;
  f.normal = normalize(f.sum * f.orientation);
  return f;
}

void physical_normal_backward(const NormalInputs& in, const NormalFrame& f, NormalMode mode,
                              const Vec3& d_normal, NormalGradients& grad) {
  Mat3 d_drot;  // adjoint of the deformed rotation matrix
  if (mode == NormalMode::ShortestAxis) {
    d_drot.add_to_column(f.deformed.shortest_index, d_normal * f.orientation);
    grad.deformed_rotation = grad.deformed_rotation +
                             quat_to_rotmat_backward(in.deformed_rotation, d_drot);
    return;
  }

  Vec3 d_aligned_short, d_aligned_long;
  Vec3 d_sum;
  if (f.collapsed) {
    d_aligned_short = d_normal * f.orientation;
  } else {
    d_sum = normalize_backward(f.sum * f.orientation, d_normal) * f.orientation;
    d_aligned_short = d_sum;
  }

  Mat3 d_crot;
  Vec3 d_ls, d_dls;
  if (!f.collapsed) {
    // dn_t = ratio * m with m = R dn.
    const double clamped = std::max(f.beta_t, kOblatenessEpsilon);
    const double ratio = f.beta / clamped;
    const Vec3 m = f.rotation * in.residual;
    const Vec3 d_m = d_sum * ratio;
    const double d_ratio = dot(d_sum, m);
    const double d_beta = d_ratio / clamped;
    const double d_beta_t = f.beta_t > kOblatenessEpsilon ? -d_ratio * f.beta / (clamped * clamped) : 0;

    // beta = 1 - exp(ls_short - ls_long)
    const double wc = f.canonical.shortest_length / f.canonical.longest_length;
    const double wd = f.deformed.shortest_length / f.deformed.longest_length;
    if (!f.canonical.degenerate()) {
      d_ls[f.canonical.shortest_index] += -wc * d_beta;
      d_ls[f.canonical.longest_index] += wc * d_beta;
    }
    if (!f.deformed.degenerate()) {
      d_dls[f.deformed.shortest_index] += -wd * d_beta_t;
      d_dls[f.deformed.longest_index] += wd * d_beta_t;
    }

    if (f.rotation_fallback) {
      // m = Rd (Rc^T dn)
      const Vec3 c = f.canonical_rot.transposed() * in.residual;
      const Vec3 d_c = f.deformed_rot.transposed() * d_m;
      d_drot += Mat3::outer(d_m, c);
      grad.residual += f.canonical_rot * d_c;
      d_crot += Mat3::outer(in.residual, d_c);
    } else {
      // m = V c with c = U^T dn.
      const Vec3& vs = f.canonical.shortest;
      const Vec3& vl = f.canonical.longest;
      const Vec3& as = f.aligned_short;
      const Vec3& al = f.aligned_long;
      const Vec3 wv = cross(vs, vl);
      const Vec3 wa = cross(as, al);
      const Vec3 c{dot(vs, in.residual), dot(vl, in.residual), dot(wv, in.residual)};
      const Vec3 d_c{dot(as, d_m), dot(al, d_m), dot(wa, d_m)};

      d_aligned_short += d_m * c.x + cross(al, d_m) * c.z;
      d_aligned_long += d_m * c.y + cross(d_m, as) * c.z;

      grad.residual += vs * d_c.x + vl * d_c.y + wv * d_c.z;
      const Vec3 d_wv = in.residual * d_c.z;
      const Vec3 d_vs = in.residual * d_c.x + cross(vl, d_wv);
      const Vec3 d_vl = in.residual * d_c.y + cross(d_wv, vs);
      d_crot.add_to_column(f.canonical.shortest_index, d_vs);
      d_crot.add_to_column(f.canonical.longest_index, d_vl);
    }
  }

  d_drot.add_to_column(f.deformed.shortest_index, d_aligned_short * f.sign_short);
  d_drot.add_to_column(f.deformed.longest_index, d_aligned_long * f.sign_long);

  grad.deformed_rotation =
      grad.deformed_rotation + quat_to_rotmat_backward(in.deformed_rotation, d_drot);
  grad.rotation = grad.rotation + quat_to_rotmat_backward(in.rotation, d_crot);
  grad.log_scale += d_ls;
  grad.deformed_log_scale += d_dls;
}

}  // namespace glint
