#pragma once

#include <vector>

#include "glint/camera.hpp"
#include "glint/model.hpp"
#include "glint/normals.hpp"
#include "glint/raster.hpp"
#include "glint/shading.hpp"

namespace glint {

struct FrameOptions {
  bool deform = false;    // run the Gaussian network at the camera time
  bool specular = false;  // diffuse + split-sum specular instead of full SH color
  bool deformable_env = false;  // reflection network residual on the query direction
  bool normals = false;   // evaluate the normal chain (needed for losses and specular)
  NormalMode normal_mode = NormalMode::Physical;
  int sh_degree = 3;
  double near_plane = kDefaultNearPlane;
  Vec3 background;
};

/// Forward record of one rendered frame; consumed by backward_frame.
struct FrameState {
  Camera camera;
  FrameOptions options;
  Mlp<float>::Cache gaussian_cache;
  DeformedGaussians deformed;
  std::vector<std::uint32_t> visible;  // Gaussian index per splat
  std::vector<Mat3> sigma;
  std::vector<ProjectedGaussian> projected;
  std::vector<Vec3> view_dir;          // surface toward camera, world space
  std::vector<NormalInputs> normal_inputs;
  std::vector<NormalFrame> normal_frames;
  std::vector<Vec3> reflected;
  std::vector<Vec3> env_residual;
  Mlp<float>::Cache reflection_cache;
  std::vector<SpecularRecord> shading;
  std::vector<Splat2D> splats;
  TileBins bins;
  RenderBuffers buffers;
};

/// Environment BRDF table shared by every render (built on first use).
const EnvBrdfLut& shared_brdf_lut();

FrameState render_frame(const Model& model, const Camera& cam, const FrameOptions& opt);

struct ModelGradients {
  GaussianSet gaussians;
  ParamVector<float> gaussian_net;
  ParamVector<float> reflection_net;
  std::vector<double> env_raw;
  std::vector<double> screen_grad;  // |dL/d mean| in NDC units, per Gaussian
  std::vector<std::uint8_t> visible;

  static ModelGradients zeros_like(const Model& m);
};

/// Accumulates parameter adjoints for the pixel adjoints of `state`.
void backward_frame(const Model& model, const FrameState& state, const PixelAdjoints& adj, ModelGradients& grad);

}  // namespace glint
