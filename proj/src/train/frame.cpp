#include "glint/frame.hpp"

#include "glint/error.hpp"
#include "glint/sh.hpp"

namespace glint {

const EnvBrdfLut& shared_brdf_lut() {
  static const EnvBrdfLut lut;
  return lut;
}

FrameState render_frame(const Model& model, const Camera& cam, const FrameOptions& opt) {
  cam.validate();
  const GaussianSet& g = model.gaussians;
  const std::size_t n = g.size();
  FrameState s;
  s.camera = cam;
  s.options = opt;
  if (opt.deform) {
    std::vector<Vec3> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = g.pos(i);
    const auto res = deform_gaussians(model.gaussian_net, model.config.encoding, std::span<const Vec3>(pos),
                                      cam.time, &s.gaussian_cache);
    s.deformed = apply_deformation(g, res);
  } else {
    s.deformed = identity_deformation(g);
  }
  const DeformedGaussians& d = s.deformed;
  const Vec3 eye = cam.center();

  for (std::size_t i = 0; i < n; ++i) {
    const Mat3 sigma = build_covariance(d.log_scale[i], d.rotation_raw[i]);
    const ProjectedGaussian p = project_covariance(sigma, cam, d.position[i], opt.near_plane);
    if (p.culled) continue;
    const Splat2D probe = make_splat(p, 0, {}, {}, 0);
    if (probe.mean.x + probe.radius < 0 || probe.mean.y + probe.radius < 0 ||
        probe.mean.x - probe.radius > cam.width - 1 || probe.mean.y - probe.radius > cam.height - 1)
      continue;
    s.visible.push_back(std::uint32_t(i));
    s.sigma.push_back(sigma);
    s.projected.push_back(p);
    s.view_dir.push_back(normalize(eye - d.position[i]));
  }
  const std::size_t m = s.visible.size();

  std::vector<Vec3> normal_world(m);
  if (opt.normals || opt.specular) {
    s.normal_inputs.resize(m);
    s.normal_frames.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::uint32_t i = s.visible[j];
      NormalInputs& in = s.normal_inputs[j];
      in.log_scale = g.scale_log(i);
      in.rotation = g.rot(i);
      in.deformed_log_scale = d.log_scale[i];
      in.deformed_rotation = d.rotation_raw[i];
      in.residual = g.residual(i);
      in.view_dir = s.view_dir[j];
      s.normal_frames[j] = physical_normal(in, opt.normal_mode);
      normal_world[j] = s.normal_frames[j].normal;
    }
  }

  std::vector<Vec3> color(m);
  if (opt.specular) {
    s.reflected.resize(m);
    for (std::size_t j = 0; j < m; ++j) s.reflected[j] = reflect(s.view_dir[j], normal_world[j]);
    if (opt.deformable_env)
      s.env_residual = reflection_residuals(model.reflection_net, model.config.encoding,
                                            std::span<const Vec3>(s.reflected), cam.time, &s.reflection_cache);
    else
      s.env_residual.assign(m, Vec3{});
    s.shading.resize(m);
    const EnvBrdfLut& lut = shared_brdf_lut();
    for (std::size_t j = 0; j < m; ++j) {
      const std::uint32_t i = s.visible[j];
      SpecularInputs in{{g.sh_dc[3 * i], g.sh_dc[3 * i + 1], g.sh_dc[3 * i + 2]}, g.tint(i), g.roughness(i),
                        normal_world[j], s.view_dir[j]};
      s.shading[j] = shade_with_residual(in, s.env_residual[j], model.env, lut);
      color[j] = s.shading[j].color;
    }
  } else {
    for (std::size_t j = 0; j < m; ++j) {
      const std::uint32_t i = s.visible[j];
      const Vec3 c = eval_sh(opt.sh_degree, g.sh(i), -s.view_dir[j]);
      for (int k = 0; k < 3; ++k) color[j][k] = std::max(c[k] + 0.5, 0.0);
    }
  }

  s.splats.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::uint32_t i = s.visible[j];
    s.splats[j] = make_splat(s.projected[j], g.opacity(i), color[j], cam.rotation * normal_world[j], i);
  }
  s.bins = bin_and_sort(s.splats, cam.width, cam.height);
  s.buffers = composite_forward(s.splats, s.bins, opt.background);
  return s;
}

ModelGradients ModelGradients::zeros_like(const Model& m) {
  ModelGradients g;
  g.gaussians = GaussianSet::zeros_like(m.gaussians);
  g.gaussian_net.assign(m.gaussian_net.parameters().size(), 0.0f);
  g.reflection_net.assign(m.reflection_net.parameters().size(), 0.0f);
  g.env_raw.assign(m.env.raw().size(), 0.0);
  g.screen_grad.assign(m.gaussians.size(), 0.0);
  g.visible.assign(m.gaussians.size(), 0);
  return g;
}

void backward_frame(const Model& model, const FrameState& s, const PixelAdjoints& adj, ModelGradients& grad) {
  const GaussianSet& g = model.gaussians;
  const std::size_t n = g.size();
  if (grad.gaussians.size() != n || s.deformed.position.size() != n)
    throw ContractError("backward_frame: gradient or frame state does not match the model");
  const FrameOptions& opt = s.options;
  const Camera& cam = s.camera;
  const DeformedGaussians& d = s.deformed;
  const Mat3 rt = cam.rotation.transposed();
  const Vec3 eye = cam.center();
  const std::size_t m = s.visible.size();

  const auto sg = composite_backward(s.splats, s.bins, s.buffers, adj);

  // Adjoints of deformed attributes.
  std::vector<Vec3> d_pos(n), d_ls(n);
  std::vector<Quat> d_rot(n, Quat{0, 0, 0, 0});
  std::vector<Vec3> d_normal(m), d_view(m);

  EnvironmentGradient env_grad;
  std::vector<Vec3> d_env_residual;
  if (opt.specular) {
    env_grad = model.env.make_gradient();
    d_env_residual.assign(m, Vec3{});
  }

  for (std::size_t j = 0; j < m; ++j) {
    const std::uint32_t i = s.visible[j];
    d_normal[j] += rt * sg[j].normal;
    if (opt.specular) {
      SpecularInputs in{{g.sh_dc[3 * i], g.sh_dc[3 * i + 1], g.sh_dc[3 * i + 2]}, g.tint(i), g.roughness(i),
                        s.normal_frames[j].normal, s.view_dir[j]};
      SpecularGradients sp;
      shade_backward(in, s.env_residual[j], s.shading[j], model.env, sg[j].color, env_grad, sp);
      for (int k = 0; k < 3; ++k) grad.gaussians.sh_dc[3 * i + k] += sp.sh_dc[k];
      grad.gaussians.add_tint(i, sp.tint);
      const double rho = in.roughness;
      grad.gaussians.raw_roughness[i] += sp.roughness * rho * (1 - rho);
      d_normal[j] += sp.normal;
      d_view[j] += sp.view_dir;
      d_env_residual[j] = sp.residual;
    } else {
      const ShCoefficients coeffs = g.sh(i);
      const Vec3 dir = -s.view_dir[j];
      const Vec3 raw = eval_sh(opt.sh_degree, coeffs, dir);
      Vec3 d_rgb;
      for (int k = 0; k < 3; ++k) d_rgb[k] = raw[k] + 0.5 > 0 ? sg[j].color[k] : 0.0;
      ShCoefficients d_coeffs{};
      Vec3 d_dir;
      eval_sh_backward(opt.sh_degree, coeffs, dir, d_rgb, d_coeffs, d_dir);
      grad.gaussians.add_sh(i, d_coeffs);
      d_view[j] -= d_dir;
    }
  }

  if (opt.specular && opt.deformable_env) {
    std::vector<Vec3> d_reflected(m);
    reflection_residuals_backward(model.reflection_net, model.config.encoding, s.reflection_cache,
                                  std::span<const Vec3>(s.reflected), std::span<const Vec3>(d_env_residual),
                                  std::span<float>(grad.reflection_net), std::span<Vec3>(d_reflected));
    for (std::size_t j = 0; j < m; ++j)
      reflect_backward(s.view_dir[j], s.normal_frames[j].normal, d_reflected[j], d_view[j], d_normal[j]);
  }
  if (opt.specular) model.env.levels_backward(env_grad, grad.env_raw);

  for (std::size_t j = 0; j < m; ++j) {
    const std::uint32_t i = s.visible[j];
    if (!s.normal_frames.empty()) {
      NormalGradients ng;
      physical_normal_backward(s.normal_inputs[j], s.normal_frames[j], opt.normal_mode, d_normal[j], ng);
      grad.gaussians.add_scale_log(i, ng.log_scale);
      grad.gaussians.add_rot(i, ng.rotation);
      grad.gaussians.add_residual(i, ng.residual);
      d_ls[i] += ng.deformed_log_scale;
      d_rot[i] = d_rot[i] + ng.deformed_rotation;
    }
    d_pos[i] -= normalize_backward(eye - d.position[i], d_view[j]);

    const double op = g.opacity(i);
    grad.gaussians.raw_opacity[i] += sg[j].opacity * op * (1 - op);

    ProjectionAdjoint pa;
    pa.mean = sg[j].mean;
    pa.conic = sg[j].conic;
    pa.depth = sg[j].depth;
    Vec3 dp;
    Mat3 d_sigma;
    project_covariance_backward(s.sigma[j], cam, s.projected[j], pa, dp, d_sigma);
    d_pos[i] += dp;
    Vec3 dls;
    Quat dq{0, 0, 0, 0};
    build_covariance_backward(d.log_scale[i], d.rotation_raw[i], d_sigma, dls, dq);
    d_ls[i] += dls;
    d_rot[i] = d_rot[i] + dq;

    grad.visible[i] = 1;
    grad.screen_grad[i] += std::hypot(sg[j].mean.x * 0.5 * cam.width, sg[j].mean.y * 0.5 * cam.height);
  }

  for (std::size_t i = 0; i < n; ++i) {
    grad.gaussians.add_pos(i, d_pos[i]);
    grad.gaussians.add_rot(i, d_rot[i]);
    grad.gaussians.add_scale_log(i, d_ls[i]);
  }
  if (opt.deform) {
    std::vector<DeformOutput> d_out(n);
    for (std::size_t i = 0; i < n; ++i) d_out[i] = {d_pos[i], d_rot[i], d_ls[i]};
    deform_gaussians_backward(model.gaussian_net, s.gaussian_cache, std::span<const DeformOutput>(d_out),
                              std::span<float>(grad.gaussian_net));
  }
}

}  // namespace glint
