#include "glint/math.hpp"

#include "glint/error.hpp"

namespace glint {

double frobenius_norm(const Mat3& a) {
  double s = 0;
  for (double v : a.m) s += v * v;
  return std::sqrt(s);
}

Quat normalized(const Quat& q) {
  const double n = norm(q);
  if (!(n > 1e-12)) throw DomainError("quaternion has zero norm");
  return q * (1.0 / n);
}

Quat normalize_backward(const Quat& q, const Quat& d_unit) {
  const double n = norm(q);
  const Quat u = q * (1.0 / n);
  const double proj = u.w * d_unit.w + u.x * d_unit.x + u.y * d_unit.y + u.z * d_unit.z;
  return {(d_unit.w - u.w * proj) / n, (d_unit.x - u.x * proj) / n, (d_unit.y - u.y * proj) / n,
          (d_unit.z - u.z * proj) / n};
}

Mat3 quat_to_rotmat(const Quat& q_in) {
  const Quat q = normalized(q_in);
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return Mat3{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
               2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
               2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
}

Quat quat_to_rotmat_backward(const Quat& q_in, const Mat3& g) {
  const Quat q = normalized(q_in);
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  const auto& m = g.m;
  Quat d;
  d.w = 2 * (-z * m[1] + y * m[2] + z * m[3] - x * m[5] - y * m[6] + x * m[7]);
  d.x = 2 * (y * m[1] + z * m[2] + y * m[3] - 2 * x * m[4] - w * m[5] + z * m[6] + w * m[7] -
             2 * x * m[8]);
  d.y = 2 * (-2 * y * m[0] + x * m[1] + w * m[2] + x * m[3] + z * m[5] - w * m[6] + z * m[7] -
             2 * y * m[8]);
  d.z = 2 * (-2 * z * m[0] - w * m[1] + x * m[2] + w * m[3] - 2 * z * m[4] + y * m[5] + x * m[6] +
             y * m[7]);
  return normalize_backward(q_in, d);
}

}  // namespace glint
