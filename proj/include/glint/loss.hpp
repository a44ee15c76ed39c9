#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glint/image.hpp"
#include "glint/math.hpp"

namespace glint {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kDefaultSsimWeight = 0.2;
inline constexpr double kDefaultNormalWeight = 0.01;

/// Mean SSIM over all pixels and channels; 11x11 Gaussian window (sigma 1.5),
/// zero padding at the borders. UsageError on a shape mismatch.
double ssim(const Image& a, const Image& b);
/// Same value; accumulates scale * dSSIM/da into d_a.
double ssim_backward(const Image& a, const Image& b, double scale, Image& d_a);

struct ImageLoss {
  double value = 0;
  Image adjoint;  // dL/d(render)
};

/// (1 - lambda) L1 + lambda (1 - SSIM).
ImageLoss photometric_loss(const Image& render, const Image& gt, double lambda = kDefaultSsimWeight);

/// Mean of 1 - N . N_hat over valid pixels; the target map is a constant.
ImageLoss normal_loss(const Image& rendered, const Image& target, std::span<const std::uint8_t> valid);

struct RegLoss {
  double value = 0;
  std::vector<Vec3> d_residual;  // per entry of the inputs
};

/// Mean over the given Gaussians of weight * |residual|^2; weights are
/// treated as constants.
RegLoss reg_loss(std::span<const Vec3> residuals, std::span<const double> weights);

enum class Stage { Static, DynamicWarmup, DynamicNormal, Specular };
const char* stage_name(Stage s);

struct LossTerms {
  double color = 0, normal = 0, reg = 0;
};

/// color + lambda_normal * normal + reg, with the geometry terms gated off
/// before the normal phase of the dynamic stage.
double total_loss(const LossTerms& terms, Stage stage, double lambda_normal = kDefaultNormalWeight);
bool geometry_terms_active(Stage stage);

/// 10 log10(1 / MSE) capped at 99 dB.
double psnr(const Image& a, const Image& b);

}  // namespace glint
