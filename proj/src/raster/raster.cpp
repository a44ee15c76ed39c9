#include "glint/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glint/error.hpp"
#include "glint/parallel.hpp"

namespace glint {

namespace {

struct Footprint {
  int x0, y0, x1, y1;  // inclusive tile range
};

bool tile_range(const Splat2D& s, const TileBins& b, Footprint& f) {
  if (!(s.radius > 0)) return false;
  const double lo_x = s.mean.x - s.radius, hi_x = s.mean.x + s.radius;
  const double lo_y = s.mean.y - s.radius, hi_y = s.mean.y + s.radius;
  if (hi_x < 0 || hi_y < 0 || lo_x > b.width - 1 || lo_y > b.height - 1) return false;
  // Pixels are integer centers; the box covers ceil(lo) .. floor(hi).
  const int px0 = std::max(0, int(std::ceil(lo_x))), px1 = std::min(b.width - 1, int(std::floor(hi_x)));
  const int py0 = std::max(0, int(std::ceil(lo_y))), py1 = std::min(b.height - 1, int(std::floor(hi_y)));
  if (px0 > px1 || py0 > py1) return false;
  f = {px0 / b.tile_size, py0 / b.tile_size, px1 / b.tile_size, py1 / b.tile_size};
  return true;
}

// Gaussian falloff exponent at pixel (x, y).
inline double power_at(const Splat2D& s, double x, double y, double& dx, double& dy) {
  dx = x - s.mean.x;
  dy = y - s.mean.y;
  return 0.5 * (s.conic.xx * dx * dx + s.conic.yy * dy * dy) + s.conic.xy * dx * dy;
}

}  // namespace

Splat2D make_splat(const ProjectedGaussian& p, double opacity, const Vec3& color, const Vec3& normal,
                   std::uint32_t index) {
  Splat2D s;
  s.mean = p.mean;
  s.conic = p.conic;
  s.depth = p.depth;
  s.opacity = opacity;
  s.color = color;
  s.normal = normal;
  s.index = index;
  if (!p.culled) {
    const double mid = 0.5 * (p.cov.xx + p.cov.yy);
    const double disc = std::sqrt(std::max(0.0, mid * mid - p.cov.det()));
    s.radius = 3.0 * std::sqrt(mid + disc);
  }
  return s;
}

TileBins bin_and_sort(std::span<const Splat2D> splats, int width, int height, int tile_size) {
  if (width <= 0 || height <= 0 || tile_size <= 0) throw UsageError("invalid raster dimensions");
  TileBins b;
  b.width = width;
  b.height = height;
  b.tile_size = tile_size;
  b.tiles_x = (width + tile_size - 1) / tile_size;
  b.tiles_y = (height + tile_size - 1) / tile_size;
  const std::size_t tiles = std::size_t(b.tiles_x) * b.tiles_y;

  std::vector<std::uint32_t> order(splats.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t c) {
    if (splats[a].depth != splats[c].depth) return splats[a].depth < splats[c].depth;
    return splats[a].index < splats[c].index;
  });

  std::vector<std::uint32_t> counts(tiles + 1, 0);
  std::vector<Footprint> fp(splats.size());
  std::vector<char> hit(splats.size(), 0);
  for (std::size_t i = 0; i < splats.size(); ++i) {
    if (!tile_range(splats[i], b, fp[i])) continue;
    hit[i] = 1;
    for (int ty = fp[i].y0; ty <= fp[i].y1; ++ty)
      for (int tx = fp[i].x0; tx <= fp[i].x1; ++tx) ++counts[std::size_t(ty) * b.tiles_x + tx + 1];
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  b.begin = counts;
  b.entries.resize(counts.back());
  std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
  // Walking splats in sorted order leaves every tile list sorted.
  for (std::uint32_t i : order) {
    if (!hit[i]) continue;
    for (int ty = fp[i].y0; ty <= fp[i].y1; ++ty)
      for (int tx = fp[i].x0; tx <= fp[i].x1; ++tx) b.entries[cursor[std::size_t(ty) * b.tiles_x + tx]++] = i;
  }
  return b;
}

RenderBuffers composite_forward(std::span<const Splat2D> splats, const TileBins& bins,
                                const Vec3& background) {
  const int w = bins.width, h = bins.height;
  RenderBuffers r;
  r.width = w;
  r.height = h;
  r.color = Image(w, h, 3);
  r.depth = Image(w, h, 1);
  r.normal = Image(w, h, 3);
  r.alpha = Image(w, h, 1);
  r.fragments.assign(std::size_t(w) * h, 0);
  r.background = background;
  r.transmittance.assign(std::size_t(w) * h, 1.0);
  r.last_entry.assign(std::size_t(w) * h, 0);
  r.depth_sum = Image(w, h, 1);
  r.normal_sum = Image(w, h, 3);

  parallel_for(std::size_t(bins.tiles_x) * bins.tiles_y, [&](std::size_t tile) {
    const int tx = int(tile % bins.tiles_x), ty = int(tile / bins.tiles_x);
    const std::uint32_t lo = bins.begin[tile], hi = bins.begin[tile + 1];
    for (int y = ty * bins.tile_size; y < std::min(h, (ty + 1) * bins.tile_size); ++y)
      for (int x = tx * bins.tile_size; x < std::min(w, (tx + 1) * bins.tile_size); ++x) {
        const std::size_t p = std::size_t(y) * w + x;
        double T = 1;
        Vec3 c, n;
        double z = 0;
        std::uint32_t frags = 0, e = lo;
        for (; e < hi; ++e) {
          if (T < kMinTransmittance) break;
          const Splat2D& s = splats[bins.entries[e]];
          double dx, dy;
          const double power = power_at(s, x, y, dx, dy);
          if (power < 0 || power > kCutoffPower) continue;
          const double a = std::min(kMaxAlpha, s.opacity * std::exp(-power));
          if (a < kMinAlpha) continue;
          const double wgt = a * T;
          c += s.color * wgt;
          n += s.normal * wgt;
          z += s.depth * wgt;
          T *= 1 - a;
          ++frags;
        }
        r.transmittance[p] = T;
        r.last_entry[p] = e - lo;
        r.fragments[p] = frags;
        const double A = 1 - T;
        r.alpha.data[p] = A;
        for (int k = 0; k < 3; ++k) r.color.data[3 * p + k] = c[k] + T * background[k];
        r.depth_sum.data[p] = z;
        r.depth.data[p] = A > 0 ? z / A : 0.0;
        r.normal_sum.data[3 * p] = n.x;
        r.normal_sum.data[3 * p + 1] = n.y;
        r.normal_sum.data[3 * p + 2] = n.z;
        const double len = norm(n);
        if (len > 1e-12)
          for (int k = 0; k < 3; ++k) r.normal.data[3 * p + k] = n[k] / len;
      }
  });
  return r;
}

std::vector<SplatGradient> composite_backward(std::span<const Splat2D> splats, const TileBins& bins,
                                              const RenderBuffers& buf, const PixelAdjoints& adj) {
  if (!buf.has_state() || buf.width != bins.width || buf.height != bins.height)
    throw ContractError("composite_backward needs the forward buffers of the same render");
  const int w = bins.width, h = bins.height;
  const std::size_t npix = std::size_t(w) * h;
  auto check = [&](const Image& img, int ch) {
    if (!img.data.empty() && img.data.size() != npix * ch)
      throw ContractError("pixel adjoint image has the wrong shape");
  };
  check(adj.color, 3);
  check(adj.depth, 1);
  check(adj.normal, 3);
  check(adj.alpha, 1);

  std::vector<SplatGradient> per_entry(bins.entries.size());
  parallel_for(std::size_t(bins.tiles_x) * bins.tiles_y, [&](std::size_t tile) {
    const int tx = int(tile % bins.tiles_x), ty = int(tile / bins.tiles_x);
    const std::uint32_t lo = bins.begin[tile];
    for (int y = ty * bins.tile_size; y < std::min(h, (ty + 1) * bins.tile_size); ++y)
      for (int x = tx * bins.tile_size; x < std::min(w, (tx + 1) * bins.tile_size); ++x) {
        const std::size_t p = std::size_t(y) * w + x;
        const double T_final = buf.transmittance[p];
        const double A = 1 - T_final;
        // Adjoints of the raw sums: color C, depth Z, normal N, coverage A = sum of weights.
        Vec3 gC, gN;
        double gZ = 0, gA = 0, gT = 0;
        if (!adj.color.data.empty()) {
          gC = adj.color.rgb(p);
          gT += dot(gC, buf.background);
        }
        if (!adj.depth.data.empty() && A > 0) {
          const double dd = adj.depth.data[p];
          gZ = dd / A;
          gA -= dd * buf.depth_sum.data[p] / (A * A);
        }
        if (!adj.normal.data.empty()) {
          const Vec3 nsum = buf.normal_sum.rgb(p);
          if (norm(nsum) > 1e-12) gN = normalize_backward(nsum, adj.normal.rgb(p));
        }
        if (!adj.alpha.data.empty()) gA += adj.alpha.data[p];
        // T_final = 1 - A, so fold the coverage adjoint into the transmittance one.
        gT -= gA;
        if (gC == Vec3{} && gN == Vec3{} && gZ == 0 && gT == 0) continue;

        double T = T_final;
        double behind = gT * T_final;  // sum over later fragments of w_j (g . f_j), plus the tail term
        for (std::uint32_t k = buf.last_entry[p]; k-- > 0;) {
          const std::uint32_t e = lo + k;
          const Splat2D& s = splats[bins.entries[e]];
          double dx, dy;
          const double power = power_at(s, x, y, dx, dy);
          if (power < 0 || power > kCutoffPower) continue;
          const double g = std::exp(-power);
          const double raw = s.opacity * g;
          const double a = std::min(kMaxAlpha, raw);
          if (a < kMinAlpha) continue;
          T /= 1 - a;
          const double wgt = a * T;
          const double feature = dot(gC, s.color) + gZ * s.depth + dot(gN, s.normal);
          SplatGradient& sg = per_entry[e];
          sg.color += gC * wgt;
          sg.depth += gZ * wgt;
          sg.normal += gN * wgt;
          // dL/da: own weight T, and every later weight (and the tail) scales by 1/(1-a).
          const double d_a = T * feature - behind / (1 - a);
          behind += wgt * feature;
          if (raw > kMaxAlpha) continue;
          sg.opacity += d_a * g;
          const double d_power = -d_a * raw;
          sg.mean.x -= d_power * (s.conic.xx * dx + s.conic.xy * dy);
          sg.mean.y -= d_power * (s.conic.xy * dx + s.conic.yy * dy);
          sg.conic.xx += d_power * 0.5 * dx * dx;
          sg.conic.xy += d_power * dx * dy;
          sg.conic.yy += d_power * 0.5 * dy * dy;
        }
      }
  });

  std::vector<SplatGradient> out(splats.size());
  for (std::size_t e = 0; e < bins.entries.size(); ++e) {
    SplatGradient& d = out[bins.entries[e]];
    const SplatGradient& s = per_entry[e];
    d.mean += s.mean;
    d.conic.xx += s.conic.xx;
    d.conic.xy += s.conic.xy;
    d.conic.yy += s.conic.yy;
    d.opacity += s.opacity;
    d.color += s.color;
    d.depth += s.depth;
    d.normal += s.normal;
  }
  return out;
}

DepthNormals depth_to_normal(const Image& depth, const Camera& cam, const Image& alpha) {
  const int w = depth.width, h = depth.height;
  DepthNormals out;
  out.normal = Image(w, h, 3);
  out.valid.assign(std::size_t(w) * h, 0);
  auto point = [&](int x, int y) {
    const double z = depth.at(x, y, 0);
    return Vec3{(x - cam.cx) / cam.fx * z, (y - cam.cy) / cam.fy * z, z};
  };
  auto usable = [&](int x, int y) { return alpha.at(x, y, 0) >= 0.5 && depth.at(x, y, 0) > 0; };
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      if (!usable(x, y) || !usable(x - 1, y) || !usable(x + 1, y) || !usable(x, y - 1) || !usable(x, y + 1))
        continue;
      const Vec3 du = point(x + 1, y) - point(x - 1, y);
      const Vec3 dv = point(x, y + 1) - point(x, y - 1);
      Vec3 n = cross(du, dv);
      const double len = norm(n);
      if (!(len > 1e-20)) continue;
      n = n / len;
      if (n.z > 0) n = -n;
      const std::size_t p = std::size_t(y) * w + x;
      for (int k = 0; k < 3; ++k) out.normal.data[3 * p + k] = n[k];
      out.valid[p] = 1;
    }
  return out;
}

}  // namespace glint
