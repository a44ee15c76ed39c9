#include "glint/deform.hpp"

#include "glint/encoding.hpp"
#include "glint/error.hpp"

namespace glint {

int encoded_dim(int frequencies, int components) { return components * (1 + 2 * frequencies); }

void encode_vector_time(const Vec3& v, double t, int vec_frequencies, int time_frequencies,
                        std::span<double> out) {
  const int nv = encoded_dim(vec_frequencies, 3);
  const double raw[3] = {v.x, v.y, v.z};
  out[0] = v.x;
  out[1] = v.y;
  out[2] = v.z;
  positional_encoding(raw, vec_frequencies, out.subspan(3, nv - 3));
  out[nv] = t;
  const double tt[1] = {t};
  positional_encoding(tt, time_frequencies, out.subspan(nv + 1, 2 * time_frequencies));
}

void encode_vector_time_backward(const Vec3& v, int vec_frequencies, std::span<const double> d_out,
                                 Vec3& d_v) {
  const int nv = encoded_dim(vec_frequencies, 3);
  double raw[3] = {v.x, v.y, v.z};
  double dv[3] = {d_out[0], d_out[1], d_out[2]};
  positional_encoding_backward(raw, vec_frequencies, d_out.subspan(3, nv - 3), dv);
  d_v += Vec3{dv[0], dv[1], dv[2]};
}

MlpShape gaussian_net_shape(const EncodingConfig& enc, const NetworkConfig& net) {
  MlpShape s;
  s.input_dim = encoded_dim(enc.position_frequencies, 3) + encoded_dim(enc.time_frequencies, 1);
  s.width = net.width;
  s.depth = net.depth;
  s.skip_layer = net.skip_layer;
  s.heads = {3, 4, 3};
  return s;
}

MlpShape reflection_net_shape(const EncodingConfig& enc, const NetworkConfig& net) {
  MlpShape s;
  s.input_dim = encoded_dim(enc.direction_frequencies, 3) + encoded_dim(enc.time_frequencies, 1);
  s.width = net.width;
  s.depth = net.depth;
  s.skip_layer = net.skip_layer;
  s.heads = {3};
  return s;
}

namespace {

template <typename T>
typename Mlp<T>::Matrix encode_batch(std::span<const Vec3> vs, double t, int vec_freq,
                                     int time_freq) {
  const int dim = encoded_dim(vec_freq, 3) + encoded_dim(time_freq, 1);
  typename Mlp<T>::Matrix input(dim, static_cast<Eigen::Index>(vs.size()));
  std::vector<double> column(dim);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    encode_vector_time(vs[i], t, vec_freq, time_freq, column);
    for (int r = 0; r < dim; ++r) input(r, static_cast<Eigen::Index>(i)) = static_cast<T>(column[r]);
  }
  return input;
}

}  // namespace

template <typename T>
std::vector<DeformOutput> deform_gaussians(const Mlp<T>& net, const EncodingConfig& enc,
                                           std::span<const Vec3> positions, double t,
                                           typename Mlp<T>::Cache* cache) {
  const auto input = encode_batch<T>(positions, t, enc.position_frequencies, enc.time_frequencies);
  const auto y = net.forward(input, cache);
  std::vector<DeformOutput> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto c = y.col(static_cast<Eigen::Index>(i));
    DeformOutput& o = out[i];
    o.d_position = {double(c(0)), double(c(1)), double(c(2))};
    o.d_rotation = {double(c(3)), double(c(4)), double(c(5)), double(c(6))};
    o.d_log_scale = {double(c(7)), double(c(8)), double(c(9))};
  }
  return out;
}

template <typename T>
DeformOutput deform_gaussian(const Mlp<T>& net, const EncodingConfig& enc, const Vec3& x, double t) {
  const Vec3 xs[1] = {x};
  return deform_gaussians(net, enc, std::span<const Vec3>(xs), t)[0];
}

template <typename T>
void deform_gaussians_backward(const Mlp<T>& net, const typename Mlp<T>::Cache& cache,
                               std::span<const DeformOutput> d_out, std::span<T> d_params) {
  typename Mlp<T>::Matrix g(10, static_cast<Eigen::Index>(d_out.size()));
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    const DeformOutput& d = d_out[i];
    const double v[10] = {d.d_position.x,   d.d_position.y,   d.d_position.z,  d.d_rotation.w,
                          d.d_rotation.x,   d.d_rotation.y,   d.d_rotation.z,  d.d_log_scale.x,
                          d.d_log_scale.y,  d.d_log_scale.z};
    for (int r = 0; r < 10; ++r) g(r, static_cast<Eigen::Index>(i)) = static_cast<T>(v[r]);
  }
  net.backward(cache, g, d_params, nullptr);
}

DeformedGaussians apply_deformation(const GaussianSet& g, std::span<const DeformOutput> residuals) {
  if (residuals.size() != g.size())
    throw ContractError("deformation residual count does not match the Gaussian count");
  DeformedGaussians d;
  const std::size_t n = g.size();
  d.position.resize(n);
  d.rotation_raw.resize(n);
  d.rotation.resize(n);
  d.log_scale.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.position[i] = g.pos(i) + residuals[i].d_position;
    d.rotation_raw[i] = g.rot(i) + residuals[i].d_rotation;
    if (!(norm(d.rotation_raw[i]) > 1e-12))
      throw DomainError("deformed rotation collapsed to a zero quaternion");
    d.rotation[i] = normalized(d.rotation_raw[i]);
    d.log_scale[i] = g.scale_log(i) + residuals[i].d_log_scale;
  }
  return d;
}

DeformedGaussians identity_deformation(const GaussianSet& g) {
  std::vector<DeformOutput> zero(g.size());
  return apply_deformation(g, zero);
}

Vec3 apply_reflection_residual(const Vec3& omega, const Vec3& residual) {
  if (residual == Vec3{}) return omega;
  const Vec3 sum = omega + residual;
  if (norm(sum) < 1e-8) return omega;
  return normalize(sum);
}

void apply_reflection_residual_backward(const Vec3& omega, const Vec3& residual, const Vec3& d_out,
                                        Vec3& d_omega, Vec3& d_residual) {
  if (residual == Vec3{}) {
    // Identity in omega; the residual partial is the limit of normalize(omega + r).
    d_omega += d_out;
    d_residual += normalize_backward(omega, d_out);
    return;
  }
  const Vec3 sum = omega + residual;
  if (norm(sum) < 1e-8) {
    d_omega += d_out;
    return;
  }
  const Vec3 g = normalize_backward(sum, d_out);
  d_omega += g;
  d_residual += g;
}

template <typename T>
std::vector<Vec3> reflection_residuals(const Mlp<T>& net, const EncodingConfig& enc,
                                       std::span<const Vec3> directions, double t,
                                       typename Mlp<T>::Cache* cache) {
  const auto input = encode_batch<T>(directions, t, enc.direction_frequencies, enc.time_frequencies);
  const auto y = net.forward(input, cache);
  std::vector<Vec3> out(directions.size());
  for (std::size_t i = 0; i < directions.size(); ++i) {
    const auto c = y.col(static_cast<Eigen::Index>(i));
    out[i] = {double(c(0)), double(c(1)), double(c(2))};
  }
  return out;
}

template <typename T>
void reflection_residuals_backward(const Mlp<T>& net, const EncodingConfig& enc,
                                   const typename Mlp<T>::Cache& cache,
                                   std::span<const Vec3> directions,
                                   std::span<const Vec3> d_residual, std::span<T> d_params,
                                   std::span<Vec3> d_directions) {
  typename Mlp<T>::Matrix g(3, static_cast<Eigen::Index>(d_residual.size()));
  for (std::size_t i = 0; i < d_residual.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    g(0, col) = static_cast<T>(d_residual[i].x);
    g(1, col) = static_cast<T>(d_residual[i].y);
    g(2, col) = static_cast<T>(d_residual[i].z);
  }
  typename Mlp<T>::Matrix d_input;
  net.backward(cache, g, d_params, d_directions.empty() ? nullptr : &d_input);
  if (d_directions.empty()) return;
  const int dim = net.shape().input_dim;
  std::vector<double> column(dim);
  for (std::size_t i = 0; i < directions.size(); ++i) {
    for (int r = 0; r < dim; ++r) column[r] = double(d_input(r, static_cast<Eigen::Index>(i)));
    encode_vector_time_backward(directions[i], enc.direction_frequencies, column, d_directions[i]);
  }
}

template <typename T>
Vec3 deform_reflection(const Mlp<T>& net, const EncodingConfig& enc, const Vec3& omega, double t) {
  const Vec3 dirs[1] = {omega};
  const Vec3 r = reflection_residuals(net, enc, std::span<const Vec3>(dirs), t)[0];
  return apply_reflection_residual(omega, r);
}

#define GLINT_INSTANTIATE(T)                                                                      \
  template std::vector<DeformOutput> deform_gaussians<T>(                                         \
      const Mlp<T>&, const EncodingConfig&, std::span<const Vec3>, double, Mlp<T>::Cache*);       \
  template DeformOutput deform_gaussian<T>(const Mlp<T>&, const EncodingConfig&, const Vec3&,     \
                                           double);                                               \
  template void deform_gaussians_backward<T>(const Mlp<T>&, const Mlp<T>::Cache&,                 \
                                             std::span<const DeformOutput>, std::span<T>);        \
  template std::vector<Vec3> reflection_residuals<T>(                                             \
      const Mlp<T>&, const EncodingConfig&, std::span<const Vec3>, double, Mlp<T>::Cache*);       \
  template void reflection_residuals_backward<T>(                                                 \
      const Mlp<T>&, const EncodingConfig&, const Mlp<T>::Cache&, std::span<const Vec3>,          \
      std::span<const Vec3>, std::span<T>, std::span<Vec3>);                                      \
  template Vec3 deform_reflection<T>(const Mlp<T>&, const EncodingConfig&, const Vec3&, double);

GLINT_INSTANTIATE(float)
GLINT_INSTANTIATE(double)

#undef GLINT_INSTANTIATE

}  // namespace glint
