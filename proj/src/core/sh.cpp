#include "glint/sh.hpp"

#include "glint/error.hpp"

namespace glint {
namespace {

constexpr double C1 = 0.4886025119029199;
constexpr double C2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                         -1.0925484305920792, 0.5462742152960396};
constexpr double C3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                         0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                         -0.5900435899266435};

void check_degree(int degree) {
  if (degree < 0 || degree > 3) throw DomainError("SH degree must be in 0..3");
}

// Basis values and their partials with respect to (x, y, z).
void basis_with_gradient(int degree, const Vec3& d, std::array<double, 16>& y,
                         std::array<Vec3, 16>* grad) {
  y.fill(0.0);
  if (grad) grad->fill(Vec3{});
  const double x = d.x, yy = d.y, z = d.z;
  y[0] = kShC0;
  if (degree < 1) return;
  y[1] = -C1 * yy;
  y[2] = C1 * z;
  y[3] = -C1 * x;
  if (grad) {
    (*grad)[1] = {0, -C1, 0};
    (*grad)[2] = {0, 0, C1};
    (*grad)[3] = {-C1, 0, 0};
  }
  if (degree < 2) return;
  const double xx = x * x, y2 = yy * yy, zz = z * z;
  const double xy = x * yy, yz = yy * z, xz = x * z;
  y[4] = C2[0] * xy;
  y[5] = C2[1] * yz;
  y[6] = C2[2] * (2 * zz - xx - y2);
  y[7] = C2[3] * xz;
  y[8] = C2[4] * (xx - y2);
  if (grad) {
    (*grad)[4] = {C2[0] * yy, C2[0] * x, 0};
    (*grad)[5] = {0, C2[1] * z, C2[1] * yy};
    (*grad)[6] = {-2 * C2[2] * x, -2 * C2[2] * yy, 4 * C2[2] * z};
    (*grad)[7] = {C2[3] * z, 0, C2[3] * x};
    (*grad)[8] = {2 * C2[4] * x, -2 * C2[4] * yy, 0};
  }
  if (degree < 3) return;
  y[9] = C3[0] * yy * (3 * xx - y2);
  y[10] = C3[1] * xy * z;
  y[11] = C3[2] * yy * (4 * zz - xx - y2);
  y[12] = C3[3] * z * (2 * zz - 3 * xx - 3 * y2);
  y[13] = C3[4] * x * (4 * zz - xx - y2);
  y[14] = C3[5] * z * (xx - y2);
  y[15] = C3[6] * x * (xx - 3 * y2);
  if (grad) {
    (*grad)[9] = {C3[0] * 6 * xy, C3[0] * (3 * xx - 3 * y2), 0};
    (*grad)[10] = {C3[1] * yz, C3[1] * xz, C3[1] * xy};
    (*grad)[11] = {C3[2] * (-2 * xy), C3[2] * (4 * zz - xx - 3 * y2), C3[2] * 8 * yz};
    (*grad)[12] = {C3[3] * (-6 * xz), C3[3] * (-6 * yz), C3[3] * (6 * zz - 3 * xx - 3 * y2)};
    (*grad)[13] = {C3[4] * (4 * zz - 3 * xx - y2), C3[4] * (-2 * xy), C3[4] * 8 * xz};
    (*grad)[14] = {C3[5] * 2 * xz, C3[5] * (-2 * yz), C3[5] * (xx - y2)};
    (*grad)[15] = {C3[6] * (3 * xx - 3 * y2), C3[6] * (-6 * xy), 0};
  }
}

int coefficient_count(int degree) { return (degree + 1) * (degree + 1); }

}  // namespace

std::array<double, kShCoefficientCount> sh_basis(int degree, const Vec3& dir) {
  check_degree(degree);
  std::array<double, 16> y{};
  basis_with_gradient(degree, dir, y, nullptr);
  return y;
}

Vec3 eval_sh(int degree, const ShCoefficients& coeffs, const Vec3& dir) {
  check_degree(degree);
  std::array<double, 16> y{};
  basis_with_gradient(degree, dir, y, nullptr);
  Vec3 rgb;
  for (int k = 0; k < coefficient_count(degree); ++k) rgb += coeffs[k] * y[k];
  return rgb;
}

void eval_sh_backward(int degree, const ShCoefficients& coeffs, const Vec3& dir, const Vec3& d_rgb,
                      ShCoefficients& d_coeffs, Vec3& d_dir) {
  check_degree(degree);
  std::array<double, 16> y{};
  std::array<Vec3, 16> grad{};
  basis_with_gradient(degree, dir, y, &grad);
  for (int k = 0; k < coefficient_count(degree); ++k) {
    d_coeffs[k] += d_rgb * y[k];
    d_dir += grad[k] * dot(coeffs[k], d_rgb);
  }
}

}  // namespace glint
