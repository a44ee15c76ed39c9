#pragma once

#include "glint/deform.hpp"
#include "glint/environment.hpp"
#include "glint/math.hpp"

namespace glint {

enum class EnvMode {
  ShOnly,         // view-dependent color from degree-3 SH, cube map unused
  StaticEnv,      // split-sum specular with the canonical cube map
  DeformableEnv,  // reflection direction deformed by the reflection network
};

/// 2 (wo . n) n - wo.
Vec3 reflect(const Vec3& wo, const Vec3& n);
void reflect_backward(const Vec3& wo, const Vec3& n, const Vec3& d_r, Vec3& d_wo, Vec3& d_n);

/// max((tint * F1 + F2) * env, 0) per channel.
Vec3 specular_color(const Vec3& tint, double f1, double f2, const Vec3& env);

/// View-independent diffuse color from the degree-0 coefficient: max(C0 dc + 0.5, 0).
Vec3 diffuse_color(const Vec3& sh_dc);

struct SpecularInputs {
  Vec3 sh_dc;
  Vec3 tint;
  double roughness = 0;
  Vec3 normal;    // unit, oriented toward the viewer
  Vec3 view_dir;  // unit, surface toward camera
};

struct SpecularRecord {
  Vec3 reflected;
  Vec3 query_dir;
  double cos_nv = 0;
  EnvBrdfLut::Sample lut;
  Vec3 env;
  Vec3 diffuse;
  Vec3 specular;
  Vec3 color;
};

/// Final color with the reflection residual already evaluated (zero for the
/// static environment).
SpecularRecord shade_with_residual(const SpecularInputs& in, const Vec3& residual,
                                   const EnvironmentMap& env, const EnvBrdfLut& lut);

/// Single-Gaussian shading; `reflection_net` null means the static environment.
template <typename T>
Vec3 shade(const SpecularInputs& in, double t, const EnvironmentMap& env, const EnvBrdfLut& lut,
           const Mlp<T>* reflection_net, const EncodingConfig& enc);

struct SpecularGradients {
  Vec3 sh_dc;
  Vec3 tint;
  double roughness = 0;
  Vec3 normal;
  Vec3 view_dir;
  Vec3 residual;
};

/// Accumulates all adjoints of shade_with_residual; cube map adjoints go to `env_grad`.
void shade_backward(const SpecularInputs& in, const Vec3& residual, const SpecularRecord& rec,
                    const EnvironmentMap& env, const Vec3& d_color, EnvironmentGradient& env_grad,
                    SpecularGradients& grad);

}  // namespace glint
