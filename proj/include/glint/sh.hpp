#pragma once

#include <array>

#include "glint/math.hpp"

namespace glint {

inline constexpr int kShCoefficientCount = 16;
inline constexpr double kShC0 = 0.28209479177387814;

/// Real SH coefficients for degrees 0..3; index l*l + l + m, one RGB triple each.
using ShCoefficients = std::array<Vec3, kShCoefficientCount>;

/// Evaluates the real SH basis (Condon-Shortley phase, the usual splatting
/// convention) up to `degree` in direction `dir` and contracts with `coeffs`.
/// Throws DomainError for degree outside 0..3.
Vec3 eval_sh(int degree, const ShCoefficients& coeffs, const Vec3& dir);

/// Basis values Y_0..Y_15 (entries above the degree are left zero).
std::array<double, kShCoefficientCount> sh_basis(int degree, const Vec3& dir);

/// Adjoint of eval_sh: accumulates into d_coeffs and d_dir.
void eval_sh_backward(int degree, const ShCoefficients& coeffs, const Vec3& dir, const Vec3& d_rgb,
                      ShCoefficients& d_coeffs, Vec3& d_dir);

}  // namespace glint
