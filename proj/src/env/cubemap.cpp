#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "glint/environment.hpp"
#include "glint/error.hpp"

namespace glint {

namespace {

// Per face: major axis, its sign, s axis and sign, t axis and sign.
struct FaceAxes {
  int major;
  double major_sign;
  int s_axis;
  double s_sign;
  int t_axis;
  double t_sign;
};

constexpr FaceAxes kFaces[kCubeFaces] = {
    {0, +1, 2, -1, 1, -1},  // +X
    {0, -1, 2, +1, 1, -1},  // -X
    {1, +1, 0, +1, 2, +1},  // +Y
    {1, -1, 0, +1, 2, -1},  // -Y
    {2, +1, 0, +1, 1, -1},  // +Z
    {2, -1, 0, -1, 1, -1},  // -Z
};

double area_element(double x, double y) { return std::atan2(x * y, std::sqrt(x * x + y * y + 1)); }

}  // namespace

CubeCoord cube_coord(const Vec3& dir, int resolution) {
  const double ax = std::abs(dir.x), ay = std::abs(dir.y), az = std::abs(dir.z);
  int major;
  if (ax >= ay && ax >= az)
    major = 0;
  else if (ay >= az)
    major = 1;
  else
    major = 2;
  if (!(std::max({ax, ay, az}) > 0)) throw DomainError("cube map query with a zero direction");

  CubeCoord c;
  c.face = 2 * major + (dir[major] < 0 ? 1 : 0);
  const FaceAxes& f = kFaces[c.face];
  const double ma = f.major_sign * dir[major];
  const double sc = f.s_sign * dir[f.s_axis];
  const double tc = f.t_sign * dir[f.t_axis];
  const double half = 0.5 * resolution;
  c.col = half * (sc / ma + 1) - 0.5;
  c.row = half * (tc / ma + 1) - 0.5;
  c.dcol[f.s_axis] += half * f.s_sign / ma;
  c.dcol[major] += -half * sc / (ma * ma) * f.major_sign;
  c.drow[f.t_axis] += half * f.t_sign / ma;
  c.drow[major] += -half * tc / (ma * ma) * f.major_sign;
  return c;
}

Vec3 texel_direction(int face, int row, int col, int resolution) {
  const FaceAxes& f = kFaces[face];
  const double sc = 2 * (col + 0.5) / resolution - 1;
  const double tc = 2 * (row + 0.5) / resolution - 1;
  Vec3 d;
  d[f.major] = f.major_sign;
  d[f.s_axis] = sc * f.s_sign;
  d[f.t_axis] = tc * f.t_sign;
  return d;
}

double texel_solid_angle(int row, int col, int resolution) {
  const double x0 = 2.0 * col / resolution - 1, x1 = 2.0 * (col + 1) / resolution - 1;
  const double y0 = 2.0 * row / resolution - 1, y1 = 2.0 * (row + 1) / resolution - 1;
  return area_element(x0, y0) - area_element(x0, y1) - area_element(x1, y0) + area_element(x1, y1);
}

BilinearTaps bilinear_taps(int face, double col, double row, int resolution) {
  BilinearTaps b;
  const int r = resolution;
  auto base = [&](int rr, int cc) { return (std::size_t(face) * r + rr) * r + cc; };
  if (r == 1) {
    b.texel.fill(base(0, 0));
    b.weight = {1, 0, 0, 0};
    return b;
  }
  const bool col_inside = col >= 0 && col <= r - 1;
  const bool row_inside = row >= 0 && row <= r - 1;
  const double c = std::clamp(col, 0.0, double(r - 1));
  const double w = std::clamp(row, 0.0, double(r - 1));
  const int c0 = std::min(int(c), r - 2);
  const int r0 = std::min(int(w), r - 2);
  const double fc = c - c0, fr = w - r0;
  b.texel = {base(r0, c0), base(r0, c0 + 1), base(r0 + 1, c0), base(r0 + 1, c0 + 1)};
  b.weight = {(1 - fc) * (1 - fr), fc * (1 - fr), (1 - fc) * fr, fc * fr};
  if (col_inside) b.dweight_dcol = {-(1 - fr), 1 - fr, -fr, fr};
  if (row_inside) b.dweight_drow = {-(1 - fc), -fc, 1 - fc, fc};
  return b;
}

namespace {

// Lerp form so equal corner values reproduce exactly.
Vec3 blend(const CubeImage& img, const BilinearTaps& b, double fc, double fr) {
  const Vec3 v00 = img.at(b.texel[0]), v01 = img.at(b.texel[1]);
  const Vec3 v10 = img.at(b.texel[2]), v11 = img.at(b.texel[3]);
  const Vec3 top = v00 + (v01 - v00) * fc;
  const Vec3 bottom = v10 + (v11 - v10) * fc;
  return top + (bottom - top) * fr;
}

std::pair<double, double> fractions(double col, double row, int r) {
  if (r == 1) return {0, 0};
  const double c = std::clamp(col, 0.0, double(r - 1));
  const double w = std::clamp(row, 0.0, double(r - 1));
  return {c - std::min(int(c), r - 2), w - std::min(int(w), r - 2)};
}

}  // namespace

Vec3 sample_bilinear(const CubeImage& img, const Vec3& dir) {
  const CubeCoord c = cube_coord(dir, img.resolution);
  const BilinearTaps b = bilinear_taps(c.face, c.col, c.row, img.resolution);
  const auto [fc, fr] = fractions(c.col, c.row, img.resolution);
  return blend(img, b, fc, fr);
}

PyramidLayout pyramid_layout(int base_resolution) {
  PyramidLayout p;
  for (int r = base_resolution; r >= 1; r /= 2) {
    p.resolution.push_back(r);
    p.offset.push_back(p.total);
    p.total += std::size_t(kCubeFaces) * r * r;
  }
  return p;
}

Vec2 hammersley(std::uint32_t i, std::uint32_t n) {
  std::uint32_t bits = i;
  bits = (bits << 16u) | (bits >> 16u);
  bits = ((bits & 0x55555555u) << 1u) | ((bits & 0xAAAAAAAAu) >> 1u);
  bits = ((bits & 0x33333333u) << 2u) | ((bits & 0xCCCCCCCCu) >> 2u);
  bits = ((bits & 0x0F0F0F0Fu) << 4u) | ((bits & 0xF0F0F0F0u) >> 4u);
  bits = ((bits & 0x00FF00FFu) << 8u) | ((bits & 0xFF00FF00u) >> 8u);
  return {double(i) / n, double(bits) * 2.3283064365386963e-10};
}

namespace {

std::shared_ptr<const PrefilterOperator> build_operator(int base_res, int res, double roughness,
                                                        int samples) {
  const PyramidLayout pyr = pyramid_layout(base_res);
  const int max_lod = int(pyr.resolution.size()) - 1;
  const double alpha = roughness * roughness;
  const double a2 = alpha * alpha;
  const double texel_omega = 4 * kPi / (6.0 * base_res * base_res);

  auto op = std::make_shared<PrefilterOperator>();
  op->resolution = res;
  op->row_begin.push_back(0);
  std::vector<std::pair<std::uint32_t, double>> taps;
  for (int face = 0; face < kCubeFaces; ++face)
    for (int row = 0; row < res; ++row)
      for (int col = 0; col < res; ++col) {
        const Vec3 n = normalize(texel_direction(face, row, col, res));
        const Vec3 up = std::abs(n.z) < 0.999 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
        const Vec3 tx = normalize(cross(up, n));
        const Vec3 ty = cross(n, tx);
        taps.clear();
        double total = 0;
        for (int i = 0; i < samples; ++i) {
          const Vec2 xi = hammersley(std::uint32_t(i), std::uint32_t(samples));
          const double phi = 2 * kPi * xi.x;
          const double cos_h = std::sqrt((1 - xi.y) / (1 + (a2 - 1) * xi.y));
          const double sin_h = std::sqrt(std::max(0.0, 1 - cos_h * cos_h));
          const Vec3 h = tx * (sin_h * std::cos(phi)) + ty * (sin_h * std::sin(phi)) + n * cos_h;
          const Vec3 l = h * (2 * dot(n, h)) - n;
          const double nol = dot(n, l);
          if (nol <= 0) continue;
          const double denom = cos_h * cos_h * (a2 - 1) + 1;
          const double d = a2 / (kPi * denom * denom);
          const double pdf = d / 4;
          const double sample_omega = 1.0 / (samples * pdf);
          const double lod = std::clamp(0.5 * std::log2(sample_omega / texel_omega) + 1, 0.0, double(max_lod));
          const int p0 = std::min(int(lod), max_lod);
          const int p1 = std::min(p0 + 1, max_lod);
          const double fl = lod - p0;
          for (int k = 0; k < 2; ++k) {
            const int p = k == 0 ? p0 : p1;
            const double wl = k == 0 ? 1 - fl : fl;
            if (wl == 0) continue;
            const CubeCoord c = cube_coord(l, pyr.resolution[p]);
            const BilinearTaps b = bilinear_taps(c.face, c.col, c.row, pyr.resolution[p]);
            for (int t = 0; t < 4; ++t)
              if (b.weight[t] != 0)
                taps.emplace_back(std::uint32_t(pyr.offset[p] + b.texel[t]), nol * wl * b.weight[t]);
          }
          total += nol;
        }
        std::sort(taps.begin(), taps.end());
        for (std::size_t i = 0; i < taps.size();) {
          std::size_t j = i;
          double w = 0;
          for (; j < taps.size() && taps[j].first == taps[i].first; ++j) w += taps[j].second;
          op->source.push_back(taps[i].first);
          op->weight.push_back(float(w / total));
          i = j;
        }
        op->row_begin.push_back(std::uint32_t(op->source.size()));
      }
  return op;
}

}  // namespace

std::shared_ptr<const PrefilterOperator> prefilter_operator(int base_resolution, int level_resolution,
                                                            double roughness, int samples) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, double, int>, std::shared_ptr<const PrefilterOperator>> cache;
  const auto key = std::make_tuple(base_resolution, level_resolution, roughness, samples);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto op = build_operator(base_resolution, level_resolution, roughness, samples);
  std::lock_guard lock(mutex);
  return cache.emplace(key, op).first->second;
}

void EnvironmentGradient::zero() {
  for (auto& l : levels) std::fill(l.begin(), l.end(), 0.0);
}

EnvironmentMap::EnvironmentMap(int base_resolution, int mip_levels, int samples)
    : base_resolution_(base_resolution), mip_levels_(mip_levels), samples_(samples) {
  if (base_resolution <= 0 || (base_resolution & (base_resolution - 1)) != 0)
    throw ConfigError("cube map resolution must be a power of two");
  if (mip_levels < 0 || (base_resolution >> mip_levels) < 1)
    throw ConfigError("too many cube map mip levels for the resolution");
  raw_.assign(std::size_t(kCubeFaces) * base_resolution * base_resolution * 3, inverse_softplus(0.5));
}

void EnvironmentMap::set_radiance(const CubeImage& radiance) {
  if (radiance.resolution != base_resolution_) throw DomainError("cube map resolution mismatch");
  auto& raw = mutable_raw();
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = inverse_softplus(std::max(radiance.data[i], 1e-6));
}

void EnvironmentMap::set_constant(const Vec3& radiance) {
  auto& raw = mutable_raw();
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = inverse_softplus(std::max(radiance[int(i % 3)], 1e-6));
}

CubeImage EnvironmentMap::base_radiance() const {
  CubeImage img(base_resolution_);
  for (std::size_t i = 0; i < raw_.size(); ++i) img.data[i] = softplus(raw_[i]);
  return img;
}

void EnvironmentMap::rebuild() const {
  if (!dirty_) return;
  if (operators_.empty())
    for (int m = 1; m <= mip_levels_; ++m)
      operators_.push_back(prefilter_operator(base_resolution_, level_resolution(m),
                                              double(m) / mip_levels_, samples_));
  const PyramidLayout pyr = pyramid_layout(base_resolution_);
  std::vector<double> pyramid(pyr.total * 3);
  for (std::size_t i = 0; i < raw_.size(); ++i) pyramid[i] = softplus(raw_[i]);
  for (std::size_t p = 1; p < pyr.resolution.size(); ++p) {
    const int r = pyr.resolution[p], rc = pyr.resolution[p - 1];
    for (int face = 0; face < kCubeFaces; ++face)
      for (int row = 0; row < r; ++row)
        for (int col = 0; col < r; ++col) {
          const std::size_t dst = pyr.offset[p] + (std::size_t(face) * r + row) * r + col;
          for (int ch = 0; ch < 3; ++ch) {
            double s = 0;
            for (int dr = 0; dr < 2; ++dr)
              for (int dc = 0; dc < 2; ++dc)
                s += pyramid[3 * (pyr.offset[p - 1] +
                                  (std::size_t(face) * rc + 2 * row + dr) * rc + 2 * col + dc) + ch];
            pyramid[3 * dst + ch] = 0.25 * s;
          }
        }
  }
  levels_.assign(mip_levels_ + 1, CubeImage());
  levels_[0] = CubeImage(base_resolution_);
  std::copy(pyramid.begin(), pyramid.begin() + raw_.size(), levels_[0].data.begin());
  for (int m = 1; m <= mip_levels_; ++m) {
    const PrefilterOperator& op = *operators_[m - 1];
    CubeImage& out = levels_[m];
    out = CubeImage(op.resolution);
    for (std::size_t t = 0; t + 1 < op.row_begin.size(); ++t) {
      const std::uint32_t b = op.row_begin[t], e = op.row_begin[t + 1];
      // Offsets from the first source keep a constant input exactly constant.
      const std::size_t ref = op.source[b];
      for (int ch = 0; ch < 3; ++ch) {
        const double base = pyramid[3 * ref + ch];
        double acc = 0;
        for (std::uint32_t k = b; k < e; ++k) acc += double(op.weight[k]) * (pyramid[3 * op.source[k] + ch] - base);
        out.data[3 * t + ch] = base + acc;
      }
    }
  }
  dirty_ = false;
}

const CubeImage& EnvironmentMap::level(int m) const {
  rebuild();
  return levels_.at(m);
}

namespace {

struct LevelBlend {
  int m0 = 0, m1 = 0;
  double f = 0;
  bool rough_inside = false;
};

LevelBlend level_blend(double roughness, int mips) {
  LevelBlend b;
  const double x = std::clamp(roughness, 0.0, 1.0) * mips;
  b.m0 = std::min(int(x), mips);
  b.m1 = std::min(b.m0 + 1, mips);
  b.f = b.m0 == mips ? 0 : x - b.m0;
  b.rough_inside = roughness > 0 && roughness < 1;
  return b;
}

}  // namespace

Vec3 EnvironmentMap::query(const Vec3& dir, double roughness) const {
  rebuild();
  const LevelBlend lb = level_blend(roughness, mip_levels_);
  const Vec3 a = sample_bilinear(levels_[lb.m0], dir);
  if (lb.f == 0) return a;
  const Vec3 b = sample_bilinear(levels_[lb.m1], dir);
  return a + (b - a) * lb.f;
}

EnvironmentGradient EnvironmentMap::make_gradient() const {
  EnvironmentGradient g;
  for (int m = 0; m <= mip_levels_; ++m)
    g.levels.emplace_back(std::size_t(kCubeFaces) * level_resolution(m) * level_resolution(m) * 3, 0.0);
  return g;
}

void EnvironmentMap::query_backward(const Vec3& dir, double roughness, const Vec3& d_rgb,
                                    EnvironmentGradient& grad, Vec3& d_dir, double& d_roughness) const {
  rebuild();
  const LevelBlend lb = level_blend(roughness, mip_levels_);
  Vec3 values[2];
  for (int k = 0; k < 2; ++k) {
    const int m = k == 0 ? lb.m0 : lb.m1;
    const double wl = k == 0 ? 1 - lb.f : lb.f;
    if (k == 1 && lb.f == 0) break;
    const CubeImage& img = levels_[m];
    const CubeCoord c = cube_coord(dir, img.resolution);
    const BilinearTaps b = bilinear_taps(c.face, c.col, c.row, img.resolution);
    std::vector<double>& g = grad.levels[m];
    double dcol = 0, drow = 0;
    Vec3 v;
    for (int t = 0; t < 4; ++t) {
      const Vec3 tex = img.at(b.texel[t]);
      v += tex * b.weight[t];
      const double w = wl * b.weight[t];
      g[3 * b.texel[t]] += w * d_rgb.x;
      g[3 * b.texel[t] + 1] += w * d_rgb.y;
      g[3 * b.texel[t] + 2] += w * d_rgb.z;
      const double proj = dot(tex, d_rgb);
      dcol += b.dweight_dcol[t] * proj;
      drow += b.dweight_drow[t] * proj;
    }
    values[k] = v;
    d_dir += (c.dcol * dcol + c.drow * drow) * wl;
  }
  if (lb.rough_inside && lb.m1 != lb.m0) {
    const Vec3 hi = lb.f == 0 ? sample_bilinear(levels_[lb.m1], dir) : values[1];
    d_roughness += mip_levels_ * dot(d_rgb, hi - values[0]);
  }
}

void EnvironmentMap::levels_backward(const EnvironmentGradient& grad, std::vector<double>& d_raw) const {
  rebuild();
  const PyramidLayout pyr = pyramid_layout(base_resolution_);
  std::vector<double> d_pyr(pyr.total * 3, 0.0);
  std::copy(grad.levels[0].begin(), grad.levels[0].end(), d_pyr.begin());
  for (int m = 1; m <= mip_levels_; ++m) {
    const PrefilterOperator& op = *operators_[m - 1];
    const std::vector<double>& g = grad.levels[m];
    for (std::size_t t = 0; t + 1 < op.row_begin.size(); ++t) {
      const std::uint32_t b = op.row_begin[t], e = op.row_begin[t + 1];
      const double gx = g[3 * t], gy = g[3 * t + 1], gz = g[3 * t + 2];
      if (gx == 0 && gy == 0 && gz == 0) continue;
      double rest = 1;
      for (std::uint32_t k = b; k < e; ++k) {
        const double w = op.weight[k];
        rest -= w;
        double* d = &d_pyr[3 * op.source[k]];
        d[0] += w * gx;
        d[1] += w * gy;
        d[2] += w * gz;
      }
      double* d = &d_pyr[3 * op.source[b]];
      d[0] += rest * gx;
      d[1] += rest * gy;
      d[2] += rest * gz;
    }
  }
  for (std::size_t p = pyr.resolution.size() - 1; p >= 1; --p) {
    const int r = pyr.resolution[p], rc = pyr.resolution[p - 1];
    for (int face = 0; face < kCubeFaces; ++face)
      for (int row = 0; row < r; ++row)
        for (int col = 0; col < r; ++col) {
          const std::size_t src = pyr.offset[p] + (std::size_t(face) * r + row) * r + col;
          for (int dr = 0; dr < 2; ++dr)
            for (int dc = 0; dc < 2; ++dc) {
              const std::size_t dst = pyr.offset[p - 1] + (std::size_t(face) * rc + 2 * row + dr) * rc + 2 * col + dc;
              for (int ch = 0; ch < 3; ++ch) d_pyr[3 * dst + ch] += 0.25 * d_pyr[3 * src + ch];
            }
        }
  }
  if (d_raw.size() != raw_.size()) d_raw.assign(raw_.size(), 0.0);
  for (std::size_t i = 0; i < raw_.size(); ++i) d_raw[i] += d_pyr[i] * sigmoid(raw_[i]);
}

}  // namespace glint
