#pragma once

#include <utility>

#include "glint/gaussian.hpp"
#include "glint/math.hpp"

namespace glint {

inline constexpr double kOblatenessEpsilon = 1e-6;

/// Flips each deformed axis whose dot with its canonical counterpart is <= 0.
std::pair<Vec3, Vec3> align_axes(const Vec3& v_s, const Vec3& v_l, const Vec3& vt_s, const Vec3& vt_l);

/// V U^T with U = [v_s | v_l | v_s x v_l] and V built the same way from the
/// aligned deformed axes. Throws GeometryError unless both pairs are
/// orthonormal within 1e-6.
Mat3 rotation_from_axes(const Vec3& v_s, const Vec3& v_l, const Vec3& vt_s, const Vec3& vt_l);

/// (|v_l| - |v_s|) / |v_l|; DomainError when |v_l| is zero.
double oblateness(double short_length, double long_length);

/// (beta / max(beta_t, eps)) R dn.
Vec3 deform_normal_residual(const Vec3& dn, const Mat3& r, double beta, double beta_t);

/// Normalized dn_t + vt_s oriented toward omega_o; a collapsed sum falls back
/// to the oriented shortest axis.
Vec3 final_normal(const Vec3& dn_t, const Vec3& vt_s, const Vec3& omega_o);

/// gamma^k with gamma = sqrt(1 - (|vt_s| / |vt_l|)^2).
double gamma_weight(double short_length, double long_length, int k);

enum class NormalMode {
  Physical,      // full rotation/oblateness chain with the residual
  ShortestAxis,  // oriented deformed shortest axis, residual unused
};

struct NormalInputs {
  Vec3 log_scale;
  Quat rotation;
  Vec3 deformed_log_scale;
  Quat deformed_rotation;
  Vec3 residual;
  Vec3 view_dir;  // unit, surface toward camera
};

/// Intermediate state of the chain, kept for the backward pass.
struct NormalFrame {
  GaussianAxes canonical;
  GaussianAxes deformed;
  Mat3 canonical_rot;
  Mat3 deformed_rot;
  double sign_short = 1, sign_long = 1;  // alignment flips
  Vec3 aligned_short, aligned_long;
  bool rotation_fallback = false;  // an isotropic side: R = R(q_t) R(q)^T
  Mat3 rotation;
  double beta = 0, beta_t = 0;
  Vec3 deformed_residual;
  Vec3 sum;
  bool collapsed = false;
  double orientation = 1;
  Vec3 normal;
};

NormalFrame physical_normal(const NormalInputs& in, NormalMode mode = NormalMode::Physical);

struct NormalGradients {
  Vec3 log_scale;
  Quat rotation{0, 0, 0, 0};
  Vec3 deformed_log_scale;
  Quat deformed_rotation{0, 0, 0, 0};
  Vec3 residual;
};

/// Accumulates adjoints of the chain for dL/dnormal. Index selection,
/// alignment flips and the final orientation are treated as locally constant.
void physical_normal_backward(const NormalInputs& in, const NormalFrame& f, NormalMode mode,
                              const Vec3& d_normal, NormalGradients& grad);

/// gamma^k from deformed log-scales (shortest/longest extent).
double gamma_weight_from_log_scale(const Vec3& deformed_log_scale, int k);

}  // namespace glint
