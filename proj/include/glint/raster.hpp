#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glint/camera.hpp"
#include "glint/gaussian.hpp"
#include "glint/image.hpp"
#include "glint/math.hpp"

namespace glint {

inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinTransmittance = 1.0 / 255.0;
/// A splat touches a pixel only inside its 3-sigma ellipse: 0.5 d^T conic d <= 4.5.
inline constexpr double kCutoffPower = 4.5;

struct Splat2D {
  Vec2 mean;
  Sym2 conic;
  double depth = 0;
  double opacity = 0;
  Vec3 color;
  Vec3 normal;  // camera space
  std::uint32_t index = 0;
  double radius = 0;  // 3 sigma along the major axis, pixels
};

/// Fills screen geometry from a projection; radius from the larger eigenvalue of cov.
Splat2D make_splat(const ProjectedGaussian& p, double opacity, const Vec3& color, const Vec3& normal,
                   std::uint32_t index);

/// Per-tile front-to-back lists. Entries of tile k are entries[begin[k] .. begin[k+1]).
struct TileBins {
  int width = 0, height = 0, tile_size = 16;
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::uint32_t> begin;
  std::vector<std::uint32_t> entries;  // positions in the splat array
};

/// Bins by the 3-sigma bounding box; each list sorted by (depth, index).
TileBins bin_and_sort(std::span<const Splat2D> splats, int width, int height, int tile_size = 16);

struct RenderBuffers {
  int width = 0, height = 0;
  Image color;   // RGB, linear, background blended in
  Image depth;   // alpha-normalized camera depth (0 where alpha is 0)
  Image normal;  // camera space, renormalized
  Image alpha;
  std::vector<std::uint32_t> fragments;

  // Forward state kept for the adjoint.
  Vec3 background;
  std::vector<double> transmittance;
  std::vector<std::uint32_t> last_entry;  // list entries traversed per pixel
  Image depth_sum;
  Image normal_sum;

  bool has_state() const { return !transmittance.empty(); }
};

RenderBuffers composite_forward(std::span<const Splat2D> splats, const TileBins& bins,
                                const Vec3& background = {});

/// Pixel adjoints; empty images are treated as zero.
struct PixelAdjoints {
  Image color, depth, normal, alpha;
};

struct SplatGradient {
  Vec2 mean;
  Sym2 conic;  // xy is the adjoint of the single off-diagonal parameter
  double opacity = 0;
  Vec3 color;
  double depth = 0;
  Vec3 normal;
};

/// Exact adjoints per splat. Per-entry partials are reduced in list order so
/// results do not depend on the thread count. ContractError without forward state.
std::vector<SplatGradient> composite_backward(std::span<const Splat2D> splats, const TileBins& bins,
                                              const RenderBuffers& buffers, const PixelAdjoints& adj);

/// Pseudo normals from the depth map via back-projection and central
/// differences, oriented toward the camera. Invalid pixels are zero with mask 0.
struct DepthNormals {
  Image normal;
  std::vector<std::uint8_t> valid;
};
DepthNormals depth_to_normal(const Image& depth, const Camera& cam, const Image& alpha);

}  // namespace glint
