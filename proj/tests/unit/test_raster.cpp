
#include "doctest.h"
#include "glint/error.hpp"
#include "glint/image.hpp"
#include "glint/raster.hpp"
#include "support/raster_oracle.hpp"

using namespace glint;

namespace {

Splat2D round_splat(Vec2 mean, double var, double opacity, Vec3 color, double depth, std::uint32_t index) {
  ProjectedGaussian p;
  p.culled = false;
  p.mean = mean;
  p.cov = {var, 0, var};
  p.conic = {1 / var, 0, 1 / var};
  p.depth = depth;
  return make_splat(p, opacity, color, {0, 0, -1}, index);
}

RenderBuffers render(const std::vector<Splat2D>& s, int w, int h, Vec3 bg = {}) {
  return composite_forward(s, bin_and_sort(s, w, h), bg);
}

std::vector<std::uint32_t> tile_list(const TileBins& b, int tile) {
  return {b.entries.begin() + b.begin[tile], b.entries.begin() + b.begin[tile + 1]};
}

}  // namespace

TEST_CASE("bin_and_sort orders by depth and drops distant tiles") {
  std::vector<Splat2D> s = {round_splat({8, 8}, 2, 0.5, {}, 2.0, 0), round_splat({9, 8}, 2, 0.5, {}, 1.0, 1)};
  const TileBins b = bin_and_sort(s, 48, 16);
  CHECK(tile_list(b, 0) == std::vector<std::uint32_t>{1, 0});
  CHECK(tile_list(b, 1).empty());
  CHECK(tile_list(b, 2).empty());
}

TEST_CASE("per-tile lists match a global sort then filter") {
  std::mt19937_64 rng(53);
  const int w = 70, h = 45;
  auto s = testing::random_splats(rng, 200, w, h);
  for (auto& sp : s) sp.depth = std::round(sp.depth * 4) / 4;  // force ties
  const TileBins b = bin_and_sort(s, w, h);
  std::vector<std::uint32_t> global(s.size());
  for (std::uint32_t i = 0; i < global.size(); ++i) global[i] = i;
  std::sort(global.begin(), global.end(), [&](auto a, auto c) {
    return std::pair(s[a].depth, s[a].index) < std::pair(s[c].depth, s[c].index);
  });
  for (int ty = 0; ty < b.tiles_y; ++ty)
    for (int tx = 0; tx < b.tiles_x; ++tx) {
      const double x0 = tx * 16, x1 = std::min(w, tx * 16 + 16) - 1;
      const double y0 = ty * 16, y1 = std::min(h, ty * 16 + 16) - 1;
      std::vector<std::uint32_t> expect;
      for (auto i : global) {
        const Splat2D& sp = s[i];
        const double lx = std::max(x0, std::ceil(sp.mean.x - sp.radius));
        const double hx = std::min(x1, std::floor(sp.mean.x + sp.radius));
        const double ly = std::max(y0, std::ceil(sp.mean.y - sp.radius));
        const double hy = std::min(y1, std::floor(sp.mean.y + sp.radius));
        if (lx <= hx && ly <= hy) expect.push_back(i);
      }
      CHECK(tile_list(b, ty * b.tiles_x + tx) == expect);
    }
}

TEST_CASE("single and double splat compositing") {
  std::vector<Splat2D> one = {round_splat({4, 4}, 1, 0.5, {1, 0, 0}, 1, 0)};
  const RenderBuffers r = render(one, 8, 8);
  CHECK(r.color.at(4, 4, 0) == doctest::Approx(0.5));
  CHECK(r.color.at(4, 4, 1) == 0);
  CHECK(r.alpha.at(4, 4, 0) == doctest::Approx(0.5));
  CHECK(r.depth.at(4, 4, 0) == doctest::Approx(1.0));
  CHECK(r.normal.at(4, 4, 2) == doctest::Approx(-1.0));

  std::vector<Splat2D> two = {round_splat({4, 4}, 1, 0.5, {0, 1, 0}, 2, 1),
                              round_splat({4, 4}, 1, 0.5, {1, 0, 0}, 1, 0)};
  const RenderBuffers r2 = render(two, 8, 8);
  CHECK(r2.color.at(4, 4, 0) == doctest::Approx(0.5));
  CHECK(r2.color.at(4, 4, 1) == doctest::Approx(0.25));
  CHECK(r2.color.at(4, 4, 2) == 0);
  CHECK(r2.alpha.at(4, 4, 0) == doctest::Approx(0.75));
  CHECK(r2.fragments[4 * 8 + 4] == 2);
}

TEST_CASE("compositing matches the per-pixel oracle") {
  std::mt19937_64 rng(57);
  auto check_scene = [&](int w, int h, int n) {
    const auto s = testing::random_splats(rng, n, w, h);
    const Vec3 bg{0.1, 0.2, 0.3};
    const RenderBuffers r = render(s, w, h, bg);
    double worst = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto o = testing::blend_pixel(s, x, y, bg);
        const std::size_t p = std::size_t(y) * w + x;
        worst = std::max({worst, norm(r.color.rgb(p) - o.color), std::abs(r.depth.data[p] - o.depth),
                          std::abs(r.alpha.data[p] - o.alpha), norm(r.normal.rgb(p) - o.normal)});
        CHECK(r.fragments[p] == o.trace.size());
      }
    CHECK(worst <= 1e-6);
  };
  check_scene(8, 8, 12);
  for (int scene = 0; scene < 100; ++scene) check_scene(16, 16, 1 + int(rng() % 64));
  check_scene(53, 37, 150);
}

TEST_CASE("adding a splat never lowers alpha") {
  std::mt19937_64 rng(59);
  for (int scene = 0; scene < 50; ++scene) {
    auto s = testing::random_splats(rng, 20, 24, 24);
    const RenderBuffers before = render(s, 24, 24);
    auto extra = testing::random_splats(rng, 1, 24, 24)[0];
    extra.index = 20;
    s.push_back(extra);
    const RenderBuffers after = render(s, 24, 24);
    for (std::size_t p = 0; p < after.alpha.data.size(); ++p)
      CHECK(after.alpha.data[p] >= before.alpha.data[p] - 1e-15);
  }
}

TEST_CASE("equal-depth submission order does not change the image") {
  std::mt19937_64 rng(60);
  auto s = testing::random_splats(rng, 40, 32, 32);
  for (auto& sp : s) sp.depth = 1 + double(sp.index % 3);
  const RenderBuffers a = render(s, 32, 32);
  std::shuffle(s.begin(), s.end(), rng);
  const RenderBuffers b = render(s, 32, 32);
  CHECK(a.color.data == b.color.data);
  CHECK(a.depth.data == b.depth.data);
  CHECK(a.normal.data == b.normal.data);
}

TEST_CASE("backward basics") {
  std::vector<Splat2D> one = {round_splat({4, 4}, 1, 0.5, {1, 0, 0}, 1, 0)};
  const TileBins b = bin_and_sort(one, 8, 8);
  const RenderBuffers r = composite_forward(one, b);
  PixelAdjoints zero;
  zero.color = Image(8, 8, 3);
  auto g = composite_backward(one, b, r, zero);
  CHECK(g[0].opacity == 0);
  CHECK(g[0].color == Vec3{});

  PixelAdjoints unit;
  unit.color = Image(8, 8, 3);
  unit.color.at(4, 4, 1) = 1;
  g = composite_backward(one, b, r, unit);
  CHECK(g[0].color.y == doctest::Approx(0.5));
  CHECK(g[0].color.x == 0);

  RenderBuffers stale;
  CHECK_THROWS_AS(composite_backward(one, b, stale, unit), ContractError);
}

TEST_CASE("composite adjoint matches central differences") {
  std::mt19937_64 rng(61);
  const int w = 12, h = 12;
  int checked = 0;
  for (int scene = 0; checked < 100 && scene < 1000; ++scene) {
    const auto base = testing::random_splats(rng, 1 + int(rng() % 6), w, h);
    PixelAdjoints adj;
    adj.color = Image(w, h, 3);
    adj.depth = Image(w, h, 1);
    adj.normal = Image(w, h, 3);
    adj.alpha = Image(w, h, 1);
    for (auto* img : {&adj.color, &adj.depth, &adj.normal, &adj.alpha})
      for (double& v : img->data) v = testing::uniform(rng, -1, 1);
    const Vec3 bg{0.3, 0.1, 0.7};

    auto traces = [&](const std::vector<Splat2D>& s) {
      std::vector<std::vector<std::pair<std::uint32_t, bool>>> t;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) t.push_back(testing::blend_pixel(s, x, y, bg).trace);
      return t;
    };
    const auto sig = traces(base);
    bool stable = true;
    // Per splat: mean(2), conic(3), opacity, color(3), depth, normal(3).
    auto pack = [](const std::vector<Splat2D>& s) {
      std::vector<double> p;
      for (const auto& sp : s)
        p.insert(p.end(), {sp.mean.x, sp.mean.y, sp.conic.xx, sp.conic.xy, sp.conic.yy, sp.opacity, sp.color.x,
                           sp.color.y, sp.color.z, sp.depth, sp.normal.x, sp.normal.y, sp.normal.z});
      return p;
    };
    auto unpack = [&](const std::vector<double>& p) {
      std::vector<Splat2D> s = base;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double* q = &p[13 * i];
        s[i].mean = {q[0], q[1]};
        s[i].conic = {q[2], q[3], q[4]};
        s[i].opacity = q[5];
        s[i].color = {q[6], q[7], q[8]};
        s[i].depth = q[9];
        s[i].normal = {q[10], q[11], q[12]};
      }
      return s;
    };
    auto loss = [&](const std::vector<double>& p) {
      const auto s = unpack(p);
      if (traces(s) != sig) stable = false;
      const RenderBuffers r = render(s, w, h, bg);
      double l = 0;
      for (std::size_t i = 0; i < r.color.data.size(); ++i) l += r.color.data[i] * adj.color.data[i];
      for (std::size_t i = 0; i < r.depth.data.size(); ++i) l += r.depth.data[i] * adj.depth.data[i];
      for (std::size_t i = 0; i < r.normal.data.size(); ++i) l += r.normal.data[i] * adj.normal.data[i];
      for (std::size_t i = 0; i < r.alpha.data.size(); ++i) l += r.alpha.data[i] * adj.alpha.data[i];
      return l;
    };
    const auto num = testing::numeric_gradient(loss, pack(base), 1e-4);
    // Depth order must not flip either; the traces above capture it.
    if (!stable) continue;
    const TileBins b = bin_and_sort(base, w, h);
    const RenderBuffers r = composite_forward(base, b, bg);
    const auto g = composite_backward(base, b, r, adj);
    std::vector<double> ana;
    for (const auto& d : g)
      ana.insert(ana.end(), {d.mean.x, d.mean.y, d.conic.xx, d.conic.xy, d.conic.yy, d.opacity, d.color.x,
                             d.color.y, d.color.z, d.depth, d.normal.x, d.normal.y, d.normal.z});
    const double err = testing::relative_error(ana, num);
    CHECK(err <= 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("pseudo normals from depth") {
  Camera cam;
  cam.width = cam.height = 32;
  cam.fx = cam.fy = 40;
  cam.cx = cam.cy = 15.5;
  Image alpha(32, 32, 1, 1.0);
  Image depth(32, 32, 1, 2.0);
  auto n = depth_to_normal(depth, cam, alpha);
  int valid = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const std::size_t p = std::size_t(y) * 32 + x;
      if (!n.valid[p]) continue;
      ++valid;
      CHECK(norm(n.normal.rgb(p) - Vec3{0, 0, -1}) <= 1e-12);
    }
  CHECK(valid == 30 * 30);

  // Plane x + z = 3 in camera space: depth falls along u.
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) depth.at(x, y, 0) = 3.0 / (1 + (x - cam.cx) / cam.fx);
  n = depth_to_normal(depth, cam, alpha);
  const Vec3 expect = normalize(Vec3{-1, 0, -1});
  for (std::size_t p = 0; p < n.valid.size(); ++p)
    if (n.valid[p]) CHECK(norm(n.normal.rgb(p) - expect) <= 1e-9);

  Image low(32, 32, 1, 0.2);
  n = depth_to_normal(depth, cam, low);
  CHECK(std::count(n.valid.begin(), n.valid.end(), 1) == 0);
}

TEST_CASE("pseudo normals of a sphere stay within two degrees") {
  Camera cam;
  cam.width = cam.height = 128;
  cam.fx = cam.fy = 150;
  cam.cx = cam.cy = 63.5;
  const Vec3 center{0.1, -0.05, 4};
  const double radius = 1.2;
  Image depth(128, 128, 1), alpha(128, 128, 1);
  std::vector<Vec3> truth(128 * 128);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const Vec3 d = normalize({(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1});
      const double b = dot(d, center), c = dot(center, center) - radius * radius;
      const double disc = b * b - c;
      if (disc <= 0) continue;
      const double t = b - std::sqrt(disc);
      const Vec3 hit = d * t;
      depth.at(x, y, 0) = hit.z;
      alpha.at(x, y, 0) = 1;
      truth[y * 128 + x] = normalize(hit - center);
    }
  const auto n = depth_to_normal(depth, cam, alpha);
  int valid = 0;
  double worst = 0;
  for (std::size_t p = 0; p < truth.size(); ++p) {
    if (!n.valid[p]) continue;
    ++valid;
    CHECK(std::abs(norm(n.normal.rgb(p)) - 1) <= 1e-12);
    const double ang = std::acos(std::clamp(dot(n.normal.rgb(p), truth[p]), -1.0, 1.0)) * 180 / kPi;
    // Neighbors straddling the silhouette have no defined central difference.
    const int x = int(p % 128), y = int(p / 128);
    bool interior = true;
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) interior &= alpha.at(std::clamp(x + dx, 0, 127), std::clamp(y + dy, 0, 127), 0) > 0;
    if (interior) worst = std::max(worst, ang);
  }
  CHECK(valid > 3000);
  CHECK(worst <= 2.0);
}
