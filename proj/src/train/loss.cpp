#include "glint/loss.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "glint/error.hpp"

namespace glint {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable zero-padded "same" filtering of one plane. The kernel is
// symmetric, so this operator is its own transpose.
void blur(const std::vector<double>& in, int w, int h, std::vector<double>& out) {
  static const auto k = gaussian_window();
  constexpr int r = kSsimWindow / 2;
  std::vector<double> tmp(in.size(), 0.0);
  out.assign(in.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[i + r] * in[std::size_t(y) * w + xx];
      }
      tmp[std::size_t(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[i + r] * tmp[std::size_t(yy) * w + x];
      }
      out[std::size_t(y) * w + x] = s;
    }
}

void require_same(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.data.empty())
    throw UsageError("image dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     "x" + std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + "x" + std::to_string(b.channels));
}

double ssim_impl(const Image& a, const Image& b, double scale, Image* d_a) {
  require_same(a, b);
  const int w = a.width, h = a.height, nc = a.channels;
  const std::size_t n = a.pixel_count();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  std::vector<double> mx, my, exx, eyy, exy;
  double total = 0;
  for (int c = 0; c < nc; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = a.data[p * nc + c];
      y[p] = b.data[p * nc + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    blur(x, w, h, mx);
    blur(y, w, h, my);
    blur(xx, w, h, exx);
    blur(yy, w, h, eyy);
    blur(xy, w, h, exy);
    std::vector<double> g_mx, g_exx, g_exy;
    if (d_a) {
      g_mx.resize(n);
      g_exx.resize(n);
      g_exy.resize(n);
    }
    const double pixel_scale = scale / double(n * nc);
    for (std::size_t p = 0; p < n; ++p) {
      const double a1 = 2 * mx[p] * my[p] + kC1;
      const double a2 = 2 * (exy[p] - mx[p] * my[p]) + kC2;
      const double b1 = mx[p] * mx[p] + my[p] * my[p] + kC1;
      const double b2 = exx[p] - mx[p] * mx[p] + eyy[p] - my[p] * my[p] + kC2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (!d_a) continue;
      const double g = pixel_scale * s;
      g_mx[p] = g * (2 * my[p] / a1 - 2 * my[p] / a2 - 2 * mx[p] / b1 + 2 * mx[p] / b2);
      g_exx[p] = -g / b2;
      g_exy[p] = g * 2 / a2;
    }
    if (!d_a) continue;
    std::vector<double> t_mx, t_exx, t_exy;
    blur(g_mx, w, h, t_mx);
    blur(g_exx, w, h, t_exx);
    blur(g_exy, w, h, t_exy);
    for (std::size_t p = 0; p < n; ++p) d_a->data[p * nc + c] += t_mx[p] + 2 * x[p] * t_exx[p] + y[p] * t_exy[p];
  }
  return total / double(n * nc);
}

}  // namespace

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, 0, nullptr); }

double ssim_backward(const Image& a, const Image& b, double scale, Image& d_a) {
  if (!d_a.same_shape(a)) d_a = Image(a.width, a.height, a.channels);
  return ssim_impl(a, b, scale, &d_a);
}

ImageLoss photometric_loss(const Image& render, const Image& gt, double lambda) {
  require_same(render, gt);
  ImageLoss out;
  out.adjoint = Image(render.width, render.height, render.channels);
  const double inv = 1.0 / double(render.data.size());
  double l1 = 0;
  for (std::size_t i = 0; i < render.data.size(); ++i) {
    const double d = render.data[i] - gt.data[i];
    l1 += std::abs(d);
    out.adjoint.data[i] = (1 - lambda) * inv * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
  }
  l1 *= inv;
  const double s = ssim_backward(render, gt, -lambda, out.adjoint);
  out.value = (1 - lambda) * l1 + lambda * (1 - s);
  return out;
}

ImageLoss normal_loss(const Image& rendered, const Image& target, std::span<const std::uint8_t> valid) {
  require_same(rendered, target);
  if (valid.size() != rendered.pixel_count()) throw UsageError("normal mask size mismatch");
  ImageLoss out;
  out.adjoint = Image(rendered.width, rendered.height, 3);
  std::size_t count = 0;
  for (std::uint8_t v : valid) count += v ? 1 : 0;
  if (count == 0) return out;
  const double inv = 1.0 / double(count);
  double sum = 0;
  for (std::size_t p = 0; p < valid.size(); ++p) {
    if (!valid[p]) continue;
    const Vec3 n = rendered.rgb(p), t = target.rgb(p);
    sum += 1 - dot(n, t);
    for (int k = 0; k < 3; ++k) out.adjoint.data[3 * p + k] = -t[k] * inv;
  }
  out.value = sum * inv;
  return out;
}

RegLoss reg_loss(std::span<const Vec3> residuals, std::span<const double> weights) {
  if (residuals.size() != weights.size()) throw ContractError("reg_loss input sizes differ");
  RegLoss out;
  out.d_residual.resize(residuals.size());
  if (residuals.empty()) return out;
  const double inv = 1.0 / double(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    out.value += weights[i] * dot(residuals[i], residuals[i]);
    out.d_residual[i] = residuals[i] * (2 * weights[i] * inv);
  }
  out.value *= inv;
  return out;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Static: return "static";
    case Stage::DynamicWarmup: return "dynamic_warmup";
    case Stage::DynamicNormal: return "dynamic_normal";
    case Stage::Specular: return "specular";
  }
  return "?";
}

bool geometry_terms_active(Stage stage) { return stage == Stage::DynamicNormal || stage == Stage::Specular; }

double total_loss(const LossTerms& t, Stage stage, double lambda_normal) {
  if (!geometry_terms_active(stage)) return t.color;
  return t.color + lambda_normal * t.normal + t.reg;
}

double psnr(const Image& a, const Image& b) {
  require_same(a, b);
  double se = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) se += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  const double mse = se / double(a.data.size());
  if (mse <= 0) return 99.0;
  return std::min(99.0, 10 * std::log10(1.0 / mse));
}

}  // namespace glint
