#include "glint/synth.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "glint/error.hpp"
#include "glint/image.hpp"
#include "glint/parallel.hpp"
#include "json.hpp"

namespace glint {

namespace {

constexpr Vec3 kCheckerLight{0.8, 0.75, 0.7};
constexpr Vec3 kCheckerDark{0.15, 0.2, 0.3};
constexpr Vec3 kSphereAlbedo{0.05, 0.05, 0.06};
constexpr Vec3 kSphereF0{0.85, 0.8, 0.75};
constexpr double kFloorLight = 0.9;
constexpr double kOrbitRadius = 3.2;
constexpr double kElevation = 40 * kPi / 180;
constexpr double kFovY = 40 * kPi / 180;
constexpr Vec3 kTarget{0, 0.4, 0};

Vec3 rotate_y(const Vec3& v, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

Vec3 lerp(const Vec3& a, const Vec3& b, double t) { return a * (1 - t) + b * t; }

Vec3 blob(const Vec3& d, const Vec3& center, double width, const Vec3& color) {
  return color * std::exp((dot(d, normalize(center)) - 1) / width);
}

const char* kFaceNames[kCubeFaces] = {"px", "nx", "py", "ny", "pz", "nz"};

}  // namespace

Recipe parse_recipe(const std::string& name) {
  if (name == "STATIC_MIRROR_SPHERE") return Recipe::StaticMirrorSphere;
  if (name == "MOVING_SPHERE") return Recipe::MovingSphere;
  if (name == "ROTATING_LIGHT") return Recipe::RotatingLight;
  throw UsageError("unknown scene recipe '" + name + "'");
}

const char* recipe_name(Recipe r) {
  switch (r) {
    case Recipe::StaticMirrorSphere: return "STATIC_MIRROR_SPHERE";
    case Recipe::MovingSphere: return "MOVING_SPHERE";
    case Recipe::RotatingLight: return "ROTATING_LIGHT";
  }
  return "?";
}

SyntheticScene::SyntheticScene(const SynthConfig& cfg) : cfg_(cfg) {
  if (cfg_.width < 4 || cfg_.height < 4) throw UsageError("synthetic images must be at least 4x4");
  if (cfg_.views <= 0) cfg_.views = cfg_.recipe == Recipe::StaticMirrorSphere ? 8 : 24;
  if (cfg_.supersample < 1) throw UsageError("supersample must be positive");
}

double SyntheticScene::sky_angle(double t) const {
  return cfg_.recipe == Recipe::RotatingLight ? cfg_.light_rotation * t : 0.0;
}

Vec3 SyntheticScene::sphere_center(double t) const {
  Vec3 c{0, kSphereRadius, 0};
  if (cfg_.recipe == Recipe::MovingSphere) c.x += cfg_.amplitude * 0.5 * (1 - std::cos(kPi * t));
  return c;
}

Vec3 SyntheticScene::sun_direction(double t) const {
  return rotate_y(normalize(Vec3{1, 0.6, 0.4}), sky_angle(t));
}

Vec3 SyntheticScene::sky(const Vec3& dir, double t) const {
  const Vec3 d = rotate_y(normalize(dir), -sky_angle(t));
  Vec3 c;
  if (d.y >= 0)
    c = lerp({0.9, 0.85, 0.8}, {0.25, 0.45, 0.85}, std::sqrt(d.y));
  else
    c = lerp({0.9, 0.85, 0.8}, {0.3, 0.25, 0.2}, std::sqrt(-d.y)) * 0.8;
  c += blob(d, {1, 0.6, 0.4}, 0.002, {3.0, 2.8, 2.4});
  c += blob(d, {-1, 0.3, 0.5}, 0.05, {0.9, 0.2, 0.1});
  c += blob(d, {0.2, 0.2, -1}, 0.05, {0.1, 0.8, 0.2});
  return c;
}

SyntheticScene::Hit SyntheticScene::trace(const Vec3& o, const Vec3& d, double t) const {
  Hit h;
  const Vec3 c = sphere_center(t);
  const Vec3 oc = o - c;
  const double b = dot(oc, d), cc = dot(oc, oc) - kSphereRadius * kSphereRadius;
  const double disc = b * b - cc;
  if (disc > 0) {
    const double s = -b - std::sqrt(disc);
    if (s > 1e-9) {
      h.hit = h.sphere = true;
      h.distance = s;
      h.point = o + d * s;
      h.normal = normalize(h.point - c);
    }
  }
  if (d.y < 0) {
    const double s = -o.y / d.y;
    if (s > 1e-9 && (!h.hit || s < h.distance)) {
      h.hit = true;
      h.sphere = false;
      h.distance = s;
      h.point = o + d * s;
      h.normal = {0, 1, 0};
    }
  }
  return h;
}

Vec3 SyntheticScene::radiance(const Vec3& o, const Vec3& d, double t) const {
  const Hit h = trace(o, d, t);
  if (!h.hit) return sky(d, t);
  if (!h.sphere) {
    const long cx = long(std::floor(h.point.x / kCheckerSize)), cz = long(std::floor(h.point.z / kCheckerSize));
    return ((cx + cz) & 1 ? kCheckerDark : kCheckerLight) * kFloorLight;
  }
  const Vec3 wo = -d;
  const Vec3 n = h.normal;
  const double cos_nv = std::max(dot(n, wo), 0.0);
  const Vec3 r = n * (2 * dot(wo, n)) - wo;
  const double fc = std::pow(1 - cos_nv, 5);
  const Vec3 env = sky(r, t);
  const double lambert = 0.3 + 0.7 * std::max(0.0, dot(n, normalize(Vec3{1, 0.6, 0.4})));
  Vec3 out;
  for (int k = 0; k < 3; ++k) out[k] = kSphereAlbedo[k] * lambert + (kSphereF0[k] + (1 - kSphereF0[k]) * fc) * env[k];
  return out;
}

std::vector<Camera> SyntheticScene::cameras() const {
  std::vector<Camera> cams;
  const int n = cfg_.views;
  if (cfg_.recipe == Recipe::StaticMirrorSphere) {
    // Training views evenly around the orbit, held-out views halfway between.
    const int total = n + cfg_.test_views;
    for (int i = 0; i < total; ++i) {
      const bool test = i >= n;
      const double slot = test ? std::floor(double(i - n) * n / cfg_.test_views) + 0.5 : double(i);
      const double az = 2 * kPi * slot / n;
      const Vec3 eye = kTarget + Vec3{std::cos(kElevation) * std::cos(az), std::sin(kElevation),
                                      std::cos(kElevation) * std::sin(az)} *
                                     kOrbitRadius;
      cams.push_back(look_at(eye, kTarget, {0, 1, 0}, kFovY, cfg_.width, cfg_.height, 0.0));
    }
    return cams;
  }
  // Monocular sweep: one camera per time step over three quarters of the orbit.
  for (int i = 0; i < n; ++i) {
    const double t = n > 1 ? double(i) / (n - 1) : 0.0;
    const double az = 1.5 * kPi * t;
    const Vec3 eye = kTarget + Vec3{std::cos(kElevation) * std::cos(az), std::sin(kElevation),
                                    std::cos(kElevation) * std::sin(az)} *
                                   kOrbitRadius;
    cams.push_back(look_at(eye, kTarget, {0, 1, 0}, kFovY, cfg_.width, cfg_.height, t));
  }
  return cams;
}

std::vector<std::size_t> SyntheticScene::test_indices() const {
  std::vector<std::size_t> out;
  if (cfg_.recipe == Recipe::StaticMirrorSphere) {
    for (int i = 0; i < cfg_.test_views; ++i) out.push_back(std::size_t(cfg_.views + i));
  } else {
    for (int i = 0; i < cfg_.views; ++i)
      if (i % 4 == 2) out.push_back(std::size_t(i));
  }
  return out;
}

CubeImage SyntheticScene::sky_cubemap(int resolution, double t) const {
  CubeImage img(resolution);
  for (int f = 0; f < kCubeFaces; ++f)
    for (int r = 0; r < resolution; ++r)
      for (int c = 0; c < resolution; ++c) img.set(img.texel(f, r, c), sky(texel_direction(f, r, c, resolution), t));
  return img;
}

void camera_ray(const Camera& cam, double u, double v, Vec3& origin, Vec3& dir) {
  origin = cam.center();
  dir = normalize(cam.rotation.transposed() * Vec3{(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0});
}

void generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out) {
  const SyntheticScene scene(cfg);
  const SynthConfig& c = scene.config();
  if (c.image_format != "png" && c.image_format != "ppm" && c.image_format != "pfm")
    throw UsageError("image_format must be png, ppm or pfm");
  namespace fs = std::filesystem;
  fs::create_directories(out / "images");
  fs::create_directories(out / "normals");
  fs::create_directories(out / "depth");
  fs::create_directories(out / "environment");

  const auto cams = scene.cameras();
  const auto test = scene.test_indices();
  std::vector<char> is_test(cams.size(), 0);
  for (auto i : test) is_test[i] = 1;

  nlohmann::json doc;
  doc["recipe"] = recipe_name(c.recipe);
  doc["frames"] = nlohmann::json::array();
  const int w = c.width, h = c.height, ss = c.supersample;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const Camera& cam = cams[i];
    Image color(w, h, 3), normal(w, h, 3), depth(w, h, 1);
    parallel_for(std::size_t(h), [&](std::size_t y) {
      for (int x = 0; x < w; ++x) {
        Vec3 sum;
        for (int sy = 0; sy < ss; ++sy)
          for (int sx = 0; sx < ss; ++sx) {
            Vec3 o, d;
            camera_ray(cam, x - 0.5 + (sx + 0.5) / ss, double(y) - 0.5 + (sy + 0.5) / ss, o, d);
            sum += scene.radiance(o, d, cam.time);
          }
        sum = sum / double(ss * ss);
        Vec3 o, d;
        camera_ray(cam, x, double(y), o, d);
        const auto hit = scene.trace(o, d, cam.time);
        for (int k = 0; k < 3; ++k) color.at(x, int(y), k) = sum[k];
        if (hit.hit) {
          const Vec3 nc = cam.rotation * hit.normal;
          for (int k = 0; k < 3; ++k) normal.at(x, int(y), k) = nc[k];
          depth.at(x, int(y), 0) = cam.to_camera(hit.point).z;
        }
      }
    });
    char name[32];
    std::snprintf(name, sizeof name, "%04zu", i);
    const std::string image = "images/" + std::string(name) + "." + c.image_format;
    write_image(out / image, color);
    write_pfm(out / "normals" / (std::string(name) + ".pfm"), normal);
    write_pfm(out / "depth" / (std::string(name) + ".pfm"), depth);

    nlohmann::json f;
    f["image"] = image;
    f["normal"] = "normals/" + std::string(name) + ".pfm";
    f["depth"] = "depth/" + std::string(name) + ".pfm";
    f["time"] = cam.time;
    f["width"] = w;
    f["height"] = h;
    f["intrinsics"] = {{cam.fx, 0.0, cam.cx}, {0.0, cam.fy, cam.cy}, {0.0, 0.0, 1.0}};
    nlohmann::json m = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
      m.push_back({cam.rotation(r, 0), cam.rotation(r, 1), cam.rotation(r, 2), cam.translation[r]});
    m.push_back({0.0, 0.0, 0.0, 1.0});
    f["world_to_camera"] = m;
    doc["frames"].push_back(f);
  }
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < cams.size(); ++i)
    if (!is_test[i]) train.push_back(i);
  doc["train"] = train;
  doc["test"] = test;
  doc["points"] = "points.json";

  // Initialization points: primary hits of random pixels in the training views.
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> ux(-0.5, w - 0.5), uy(-0.5, h - 0.5);
  nlohmann::json pts = nlohmann::json::array();
  for (int k = 0; k < c.points; ++k) {
    const Camera& cam = cams[train[std::size_t(k) % train.size()]];
    Vec3 o, d;
    camera_ray(cam, ux(rng), uy(rng), o, d);
    const auto hit = scene.trace(o, d, cam.time);
    if (!hit.hit) continue;
    const Vec3 col = scene.radiance(o, d, cam.time);
    pts.push_back({hit.point.x, hit.point.y, hit.point.z, std::min(col.x, 1.0), std::min(col.y, 1.0),
                   std::min(col.z, 1.0)});
  }
  std::ofstream(out / "points.json") << nlohmann::json{{"points", pts}}.dump() << '\n';

  const CubeImage sky = scene.sky_cubemap(c.env_resolution);
  for (int f = 0; f < kCubeFaces; ++f) {
    Image face(sky.resolution, sky.resolution, 3);
    for (int r = 0; r < sky.resolution; ++r)
      for (int col = 0; col < sky.resolution; ++col)
        for (int k = 0; k < 3; ++k) face.at(col, r, k) = sky.at(sky.texel(f, r, col))[k];
    write_pfm(out / "environment" / (std::string(kFaceNames[f]) + ".pfm"), face);
  }
  doc["scene"] = {{"sphere_radius", SyntheticScene::kSphereRadius},
                  {"amplitude", c.recipe == Recipe::MovingSphere ? c.amplitude : 0.0},
                  {"light_rotation", c.recipe == Recipe::RotatingLight ? c.light_rotation : 0.0},
                  {"seed", c.seed}};
  std::ofstream(out / "cameras.json") << doc.dump(2) << '\n';
}

}  // namespace glint
