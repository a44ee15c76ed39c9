#pragma once

#include <span>
#include <vector>

#include "glint/gaussian.hpp"
#include "glint/math.hpp"
#include "glint/mlp.hpp"

namespace glint {

/// Frequency counts for the network inputs. Both networks see the raw value
/// concatenated in front of its encoding: [v, gamma(v), t, gamma(t)].
struct EncodingConfig {
  int position_frequencies = 10;
  int time_frequencies = 6;
  int direction_frequencies = 4;
  bool operator==(const EncodingConfig&) const = default;
};

struct NetworkConfig {
  int width = 256;
  int depth = 8;
  int skip_layer = 4;
  bool operator==(const NetworkConfig&) const = default;
};

int encoded_dim(int frequencies, int components);

/// [v, gamma(v; vec_freq), t, gamma(t; time_freq)] into `out`.
void encode_vector_time(const Vec3& v, double t, int vec_frequencies, int time_frequencies,
                        std::span<double> out);
/// Accumulates dL/dv (time is not differentiated).
void encode_vector_time_backward(const Vec3& v, int vec_frequencies, std::span<const double> d_out,
                                 Vec3& d_v);

MlpShape gaussian_net_shape(const EncodingConfig& enc, const NetworkConfig& net);
MlpShape reflection_net_shape(const EncodingConfig& enc, const NetworkConfig& net);

struct DeformOutput {
  Vec3 d_position;
  Quat d_rotation{0, 0, 0, 0};
  Vec3 d_log_scale;
};

/// Batched Gaussian deformation network: one column per position.
template <typename T>
std::vector<DeformOutput> deform_gaussians(const Mlp<T>& net, const EncodingConfig& enc,
                                           std::span<const Vec3> positions, double t,
                                           typename Mlp<T>::Cache* cache = nullptr);

template <typename T>
DeformOutput deform_gaussian(const Mlp<T>& net, const EncodingConfig& enc, const Vec3& x, double t);

/// Parameter gradients of the Gaussian network for per-Gaussian residual adjoints.
template <typename T>
void deform_gaussians_backward(const Mlp<T>& net, const typename Mlp<T>::Cache& cache,
                               std::span<const DeformOutput> d_out, std::span<T> d_params);

/// Deformed attributes: positions and log-scales get the residual added,
/// rotations are the normalized sum of raw quaternion components.
struct DeformedGaussians {
  std::vector<Vec3> position;
  std::vector<Quat> rotation_raw;  // q + dq, before normalization
  std::vector<Quat> rotation;      // unit
  std::vector<Vec3> log_scale;
};

/// Throws DomainError when a deformed quaternion collapses to zero.
DeformedGaussians apply_deformation(const GaussianSet& g, std::span<const DeformOutput> residuals);

/// Canonical attributes in deformed layout (no residual).
DeformedGaussians identity_deformation(const GaussianSet& g);

/// normalize(omega + residual) with the exact-zero and collapsed-sum cases
/// returning omega unchanged.
Vec3 apply_reflection_residual(const Vec3& omega, const Vec3& residual);
void apply_reflection_residual_backward(const Vec3& omega, const Vec3& residual, const Vec3& d_out,
                                        Vec3& d_omega, Vec3& d_residual);

template <typename T>
std::vector<Vec3> reflection_residuals(const Mlp<T>& net, const EncodingConfig& enc,
                                       std::span<const Vec3> directions, double t,
                                       typename Mlp<T>::Cache* cache = nullptr);

/// Input and parameter adjoints for reflection residual adjoints.
template <typename T>
void reflection_residuals_backward(const Mlp<T>& net, const EncodingConfig& enc,
                                   const typename Mlp<T>::Cache& cache,
                                   std::span<const Vec3> directions,
                                   std::span<const Vec3> d_residual, std::span<T> d_params,
                                   std::span<Vec3> d_directions);

template <typename T>
Vec3 deform_reflection(const Mlp<T>& net, const EncodingConfig& enc, const Vec3& omega, double t);

}  // namespace glint
