#include "glint/shading.hpp"

#include <algorithm>

#include "glint/sh.hpp"

namespace glint {

Vec3 reflect(const Vec3& wo, const Vec3& n) { return n * (2 * dot(wo, n)) - wo; }

void reflect_backward(const Vec3& wo, const Vec3& n, const Vec3& d_r, Vec3& d_wo, Vec3& d_n) {
  const double won = dot(wo, n);
  const double dn = dot(d_r, n);
  d_wo += n * (2 * dn) - d_r;
  d_n += d_r * (2 * won) + wo * (2 * dn);
}

Vec3 specular_color(const Vec3& tint, double f1, double f2, const Vec3& env) {
  Vec3 c;
  for (int i = 0; i < 3; ++i) c[i] = std::max((tint[i] * f1 + f2) * env[i], 0.0);
  return c;
}

Vec3 diffuse_color(const Vec3& sh_dc) {
  Vec3 c;
  for (int i = 0; i < 3; ++i) c[i] = std::max(kShC0 * sh_dc[i] + 0.5, 0.0);
  return c;
}

SpecularRecord shade_with_residual(const SpecularInputs& in, const Vec3& residual,
                                   const EnvironmentMap& env, const EnvBrdfLut& lut) {
  SpecularRecord r;
  r.reflected = reflect(in.view_dir, in.normal);
  r.query_dir = apply_reflection_residual(r.reflected, residual);
  r.cos_nv = dot(in.normal, in.view_dir);
  r.lut = lut.lookup(r.cos_nv, in.roughness);
  r.env = env.query(r.query_dir, in.roughness);
  r.diffuse = diffuse_color(in.sh_dc);
  r.specular = specular_color(in.tint, r.lut.f1, r.lut.f2, r.env);
  r.color = r.diffuse + r.specular;
  return r;
}

template <typename T>
Vec3 shade(const SpecularInputs& in, double t, const EnvironmentMap& env, const EnvBrdfLut& lut,
           const Mlp<T>* reflection_net, const EncodingConfig& enc) {
  Vec3 residual;
  if (reflection_net) {
    const Vec3 dirs[1] = {reflect(in.view_dir, in.normal)};
    residual = reflection_residuals(*reflection_net, enc, std::span<const Vec3>(dirs), t)[0];
  }
  return shade_with_residual(in, residual, env, lut).color;
}

template Vec3 shade<float>(const SpecularInputs&, double, const EnvironmentMap&, const EnvBrdfLut&,
                           const Mlp<float>*, const EncodingConfig&);
template Vec3 shade<double>(const SpecularInputs&, double, const EnvironmentMap&, const EnvBrdfLut&,
                            const Mlp<double>*, const EncodingConfig&);

void shade_backward(const SpecularInputs& in, const Vec3& residual, const SpecularRecord& rec,
                    const EnvironmentMap& env, const Vec3& d_color, EnvironmentGradient& env_grad,
                    SpecularGradients& grad) {
  for (int i = 0; i < 3; ++i)
    if (kShC0 * in.sh_dc[i] + 0.5 > 0) grad.sh_dc[i] += kShC0 * d_color[i];

  Vec3 d_env;
  double d_f1 = 0, d_f2 = 0;
  for (int i = 0; i < 3; ++i) {
    const double k = in.tint[i] * rec.lut.f1 + rec.lut.f2;
    if (k * rec.env[i] <= 0) continue;
    const double g = d_color[i];
    d_env[i] = g * k;
    grad.tint[i] += g * rec.env[i] * rec.lut.f1;
    d_f1 += g * rec.env[i] * in.tint[i];
    d_f2 += g * rec.env[i];
  }

  Vec3 d_query;
  env.query_backward(rec.query_dir, in.roughness, d_env, env_grad, d_query, grad.roughness);
  grad.roughness += d_f1 * rec.lut.df1_drough + d_f2 * rec.lut.df2_drough;

  const double d_cos = d_f1 * rec.lut.df1_dcos + d_f2 * rec.lut.df2_dcos;
  grad.normal += in.view_dir * d_cos;
  grad.view_dir += in.normal * d_cos;

  Vec3 d_reflected;
  apply_reflection_residual_backward(rec.reflected, residual, d_query, d_reflected, grad.residual);
  reflect_backward(in.view_dir, in.normal, d_reflected, grad.view_dir, grad.normal);
}

}  // namespace glint
