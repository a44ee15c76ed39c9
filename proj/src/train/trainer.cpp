#include "glint/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "glint/error.hpp"

namespace glint {

void TrainConfig::validate() const {
  schedule.validate();
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(lambda_normal >= 0)) throw ConfigError("lambda_normal must be non-negative");
  if (!(lambda_ssim >= 0 && lambda_ssim <= 1)) throw ConfigError("lambda_ssim must lie in [0,1]");
  if (log_every < 1) throw ConfigError("log_every must be at least 1");
  if (!(near_plane > 0)) throw ConfigError("near_plane must be positive");
  if (densify.interval < 1) throw ConfigError("densify.interval must be at least 1");
  if (!(densify.grad_threshold > 0) || !(densify.opacity_floor > 0) || !(densify.percent_dense > 0))
    throw ConfigError("densify thresholds must be positive");
  for (double v : {lr.position_init, lr.position_final, lr.sh_dc, lr.sh_rest, lr.opacity, lr.scale, lr.rotation,
                   lr.tint, lr.roughness, lr.normal_residual, lr.mlp_init, lr.mlp_final, lr.env})
    if (!(v > 0)) throw ConfigError("learning rates must be positive");
}

FrameOptions frame_options(const TrainConfig& cfg, int it) {
  const StageSchedule& s = cfg.schedule;
  const Stage stage = s.stage_at(it);
  FrameOptions o;
  o.deform = stage != Stage::Static;
  o.specular = stage == Stage::Specular && cfg.env_mode != EnvMode::ShOnly;
  o.deformable_env = o.specular && cfg.env_mode == EnvMode::DeformableEnv && s.reflection_trainable(it);
  o.normals = geometry_terms_active(stage) || o.specular;
  o.normal_mode = cfg.normal_mode;
  o.background = cfg.background;
  o.near_plane = cfg.near_plane;
  return o;
}

Model initial_model(const Dataset& data, const ModelConfig& cfg, std::uint64_t seed, std::size_t fallback_points) {
  std::mt19937_64 rng(seed);
  Model m(cfg, rng);
  const auto points = data.initial_points(fallback_points, seed);
  m.gaussians = gaussians_from_points(points, cfg);
  return m;
}

Trainer::Trainer(const Dataset& data, Model model, TrainConfig cfg)
    : data_(data), model_(std::move(model)), cfg_(std::move(cfg)), adam_(cfg_.adam), rng_(cfg_.seed) {
  cfg_.validate();
  if (data_.train.empty()) throw ConfigError("dataset has no training frames");
  if (model_.gaussians.empty()) throw ConfigError("model has no Gaussians");
  sched_ = cfg_.schedule;
  total_ = sched_.total();
  extent_ = data_.scene_extent();
  if (!(extent_ > 0)) extent_ = 1;
  stats_.reset(model_.gaussians.size());
}

void Trainer::restore(int iteration, Adam optimizer) {
  if (iteration < 0) throw ConfigError("resume iteration must be non-negative");
  iteration_ = iteration;
  adam_ = std::move(optimizer);
}

bool Trainer::densify_window(int it) const {
  const int start = cfg_.densify.start / sched_.divisor;
  return (it >= start && it < sched_.specular_start()) || (it >= sched_.unfreeze_at() && it < sched_.densify_stop());
}

namespace {

template <typename V>
bool finite(const V& v) {
  return all_finite(std::span<const typename V::value_type>(v));
}

bool gradients_finite(const ModelGradients& g) {
  bool ok = true;
  g.gaussians.for_each_attribute([&](std::string_view, int, const std::vector<double>& a) { ok = ok && finite(a); });
  return ok && finite(g.gaussian_net) && finite(g.reflection_net) && finite(g.env_raw);
}

}  // namespace

void Trainer::apply_updates(const ModelGradients& grad, int it) {
  const Stage stage = sched_.stage_at(it);
  const bool frozen = sched_.in_frozen_window(it);
  const bool specular = stage == Stage::Specular && cfg_.env_mode != EnvMode::ShOnly;
  const LearningRates& lr = cfg_.lr;
  GaussianSet& g = model_.gaussians;
  const GaussianSet& d = grad.gaussians;

  auto step = [&](const char* name, std::vector<double>& p, const std::vector<double>& gr, double rate) {
    adam_.step<double>(name, std::span<double>(p), std::span<const double>(gr), rate);
  };
  auto step_net = [&](const char* name, Mlp<float>& net, const ParamVector<float>& gr, double rate) {
    adam_.step<float>(name, net.mutable_parameters(), std::span<const float>(gr), rate);
  };

  const double mlp_lr = exponential_lr(lr.mlp_init, lr.mlp_final, it, total_);

  step("sh_dc", g.sh_dc, d.sh_dc, lr.sh_dc);
  if (!specular) step("sh_rest", g.sh_rest, d.sh_rest, lr.sh_rest);
  if (specular) {
    step("specular_tint", g.specular_tint, d.specular_tint, lr.tint);
    for (double& v : g.specular_tint) v = std::clamp(v, 0.0, 1.0);
    step("raw_roughness", g.raw_roughness, d.raw_roughness, lr.roughness);
    step("env", model_.env.mutable_raw(), grad.env_raw, lr.env);
    if (cfg_.env_mode == EnvMode::DeformableEnv && sched_.reflection_trainable(it))
      step_net("reflection_net", model_.reflection_net, grad.reflection_net, mlp_lr);
  }
  if (frozen) return;

  step("position", g.position, d.position, extent_ * exponential_lr(lr.position_init, lr.position_final, it, total_));
  step("rotation", g.rotation, d.rotation, lr.rotation);
  step("log_scale", g.log_scale, d.log_scale, lr.scale);
  step("raw_opacity", g.raw_opacity, d.raw_opacity, lr.opacity);
  if (stage != Stage::Static) step_net("gaussian_net", model_.gaussian_net, grad.gaussian_net, mlp_lr);
  if (geometry_terms_active(stage) && cfg_.normal_mode == NormalMode::Physical)
    step("normal_residual", g.normal_residual, d.normal_residual, lr.normal_residual);
}

IterationReport Trainer::step() {
  IterationReport rep;
  const int it = iteration_;
  rep.iteration = it;
  rep.stage = sched_.stage_at(it);
  if (finished()) throw ContractError("training already finished");

  std::uniform_int_distribution<std::size_t> pick(0, data_.train.size() - 1);
  const CameraFrame& frame = data_.frames[data_.train[pick(rng_)]];
  const FrameOptions opt = frame_options(cfg_, it);
  const FrameState state = render_frame(model_, frame.camera, opt);

  PixelAdjoints adj;
  ImageLoss color = photometric_loss(state.buffers.color, frame.image, cfg_.lambda_ssim);
  rep.terms.color = color.value;
  adj.color = std::move(color.adjoint);

  ModelGradients grad = ModelGradients::zeros_like(model_);
  const bool geometry = geometry_terms_active(rep.stage);
  std::vector<Vec3> reg_residuals;
  std::vector<double> reg_weights;
  RegLoss reg;
  if (geometry) {
    const DepthNormals target = depth_to_normal(state.buffers.depth, frame.camera, state.buffers.alpha);
    ImageLoss nl = normal_loss(state.buffers.normal, target.normal, target.valid);
    rep.terms.normal = nl.value;
    for (double& v : nl.adjoint.data) v *= cfg_.lambda_normal;
    adj.normal = std::move(nl.adjoint);

    reg_residuals.reserve(state.visible.size());
    for (std::uint32_t i : state.visible) {
      reg_residuals.push_back(model_.gaussians.residual(i));
      reg_weights.push_back(gamma_weight_from_log_scale(state.deformed.log_scale[i], cfg_.k));
    }
    reg = reg_loss(reg_residuals, reg_weights);
    rep.terms.reg = reg.value;
  }
  rep.total = total_loss(rep.terms, rep.stage, cfg_.lambda_normal);

  backward_frame(model_, state, adj, grad);
  if (geometry)
    for (std::size_t j = 0; j < state.visible.size(); ++j) grad.gaussians.add_residual(state.visible[j], reg.d_residual[j]);

  if (!std::isfinite(rep.total) || !gradients_finite(grad)) {
    rep.aborted = true;
    ++aborted_;
    std::cerr << "glint: iteration " << it << " aborted, non-finite loss or gradient\n";
    if (++consecutive_aborts_ >= 10) throw NumericalError("10 consecutive iterations produced non-finite gradients");
  } else {
    consecutive_aborts_ = 0;
    apply_updates(grad, it);
    stats_.accumulate(grad.screen_grad, grad.visible);
  }

  iteration_ = it + 1;
  if (iteration_ % cfg_.densify.interval == 0) {
    const bool enabled = densify_window(it);
    rep.densify = densify_and_prune(model_.gaussians, stats_, cfg_.densify, extent_, enabled, rng_);
    if (rep.densify.changed()) {
      model_.gaussians.for_each_attribute([&](std::string_view name, int width, std::vector<double>&) {
        adam_.remap(std::string(name), width, rep.densify.source);
      });
    }
  }

  if (iteration_ % cfg_.log_every == 0 || iteration_ == total_) {
    LogRow row;
    row.iteration = iteration_;
    row.stage = rep.stage;
    row.terms = rep.terms;
    row.total = rep.total;
    row.heldout_psnr = heldout_psnr();
    row.gaussians = model_.gaussians.size();
    log_.push_back(row);
  }
  if (on_iteration) on_iteration(*this, rep);
  return rep;
}

void Trainer::run() {
  while (!finished()) step();
}

double Trainer::heldout_psnr() const {
  const std::size_t idx = data_.test.empty() ? data_.train.front() : data_.test.front();
  const CameraFrame& f = data_.frames[idx];
  const int it = std::max(iteration_ - 1, 0);
  const FrameState s = render_frame(model_, f.camera, frame_options(cfg_, it));
  return psnr(s.buffers.color, f.image);
}

std::string Trainer::log_csv() const {
  std::ostringstream out;
  out << "iteration,stage,loss_color,loss_normal,loss_reg,loss_total,psnr_heldout,gaussians\n";
  char buf[256];
  for (const LogRow& r : log_) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.9g,%.9g,%.9g,%.9g,%.6f,%zu\n", r.iteration, stage_name(r.stage),
                  r.terms.color, r.terms.normal, r.terms.reg, r.total, r.heldout_psnr, r.gaussians);
    out << buf;
  }
  return out.str();
}

void Trainer::write_log(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw LoadError("cannot write log " + path.string());
  f << log_csv();
}

}  // namespace glint
