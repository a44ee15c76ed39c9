#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "doctest.h"
#include "glint/checkpoint.hpp"
#include "glint/dataset.hpp"
#include "glint/error.hpp"
#include "glint/shading.hpp"
#include "glint/synth.hpp"
#include "glint/trainer.hpp"
#include "json.hpp"
#include "support/testing.hpp"

using namespace glint;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

// Pixel coordinates of a world point.
Vec2 project(const Camera& cam, const Vec3& p) {
  const Vec3 c = cam.to_camera(p);
  return {cam.fx * c.x / c.z + cam.cx, cam.fy * c.y / c.z + cam.cy};
}

}  // namespace

TEST_CASE("image formats round trip") {
  const auto dir = testing::scratch_dir("images");
  std::mt19937_64 rng(80);
  Image img(7, 5, 3);
  for (double& v : img.data) v = testing::uniform(rng, 0, 1);

  write_pfm(dir / "a.pfm", img);
  const Image pfm = read_pfm(dir / "a.pfm");
  REQUIRE(pfm.same_shape(img));
  for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(pfm.data[i] == double(float(img.data[i])));

  for (const char* name : {"a.png", "a.ppm"}) {
    write_image(dir / name, img);
    const Image back = read_image(dir / name);
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data.size(); ++i)
      CHECK(std::abs(linear_to_srgb(back.data[i]) - linear_to_srgb(img.data[i])) <= 0.5 / 255 + 1e-9);
  }
  Image gray(3, 2, 1, 0.25);
  write_pfm(dir / "g.pfm", gray);
  CHECK(read_pfm(dir / "g.pfm").data == gray.data);
  CHECK_THROWS_AS(read_image(dir / "a.bmp"), LoadError);
  CHECK_THROWS_AS(read_image(dir / "missing.ppm"), LoadError);
}

TEST_CASE("srgb transfer is inverted by its inverse") {
  for (int i = 0; i <= 100; ++i) {
    const double v = i / 100.0;
    CHECK(srgb_to_linear(linear_to_srgb(v)) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("generated dataset loads back exactly") {
  const auto dir = testing::scratch_dir("roundtrip");
  SynthConfig sc;
  sc.width = 20;
  sc.height = 16;
  sc.views = 5;
  sc.test_views = 2;
  sc.image_format = "pfm";
  sc.supersample = 1;
  sc.env_resolution = 8;
  sc.points = 50;
  generate_synthetic(sc, dir);
  const Dataset d = load_dataset(dir);
  const SyntheticScene scene(sc);
  const auto cams = scene.cameras();
  REQUIRE(d.frames.size() == 7);
  CHECK(d.train.size() == 5);
  CHECK(d.test == std::vector<std::size_t>{5, 6});
  CHECK(d.points.size() <= 50);
  CHECK_FALSE(d.points.empty());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const Camera& a = cams[i];
    const Camera& b = d.frames[i].camera;
    CHECK(frobenius_norm(a.rotation - b.rotation) <= 1e-12);
    CHECK(norm(a.translation - b.translation) <= 1e-12);
    CHECK(std::abs(a.fx - b.fx) <= 1e-12);
    CHECK(std::abs(a.cy - b.cy) <= 1e-12);
    CHECK(b.width == 20);
    CHECK(b.height == 16);
    const auto rewritten = testing::scratch_dir("roundtrip_rewrite") / "x.pfm";
    write_pfm(rewritten, d.frames[i].image);
    CHECK(read_bytes(rewritten) == read_bytes(d.frames[i].image_path));
  }
  // Spot pixels against the analytic scene (one sample per pixel).
  const Camera& cam = d.frames[3].camera;
  for (auto [x, y] : {std::pair{2, 3}, std::pair{10, 8}, std::pair{17, 14}}) {
    Vec3 o, dir_ray;
    camera_ray(cam, x, y, o, dir_ray);
    const Vec3 c = scene.radiance(o, dir_ray, cam.time);
    for (int k = 0; k < 3; ++k) CHECK(d.frames[3].image.at(x, y, k) == double(float(c[k])));
  }
}

TEST_CASE("generator is deterministic") {
  SynthConfig sc;
  sc.recipe = Recipe::RotatingLight;
  sc.width = sc.height = 12;
  sc.views = 3;
  sc.supersample = 2;
  sc.env_resolution = 4;
  sc.points = 40;
  sc.seed = 9;
  const auto a = testing::scratch_dir("det_a"), b = testing::scratch_dir("det_b");
  generate_synthetic(sc, a);
  generate_synthetic(sc, b);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    CHECK(read_bytes(e.path()) == read_bytes(b / fs::relative(e.path(), a)));
  }
  CHECK(files == 3 + 3 + 3 + 6 + 2);
  CHECK_THROWS_AS(parse_recipe("SPINNING_TOP"), UsageError);
}

TEST_CASE("sphere center pixel sees the view-opposed normal") {
  const auto dir = testing::scratch_dir("sphere_normal");
  SynthConfig sc;
  sc.width = sc.height = 64;
  sc.supersample = 1;
  sc.env_resolution = 4;
  sc.points = 10;
  generate_synthetic(sc, dir);
  const Dataset d = load_dataset(dir);
  REQUIRE(d.frames.size() == 8);
  const SyntheticScene scene(sc);
  for (const CameraFrame& f : d.frames) {
    const Vec2 uv = project(f.camera, scene.sphere_center(0));
    const int x = int(std::lround(uv.x)), y = int(std::lround(uv.y));
    const Image n = read_pfm(f.normal_path);
    const Vec3 normal{n.at(x, y, 0), n.at(x, y, 1), n.at(x, y, 2)};
    Vec3 o, ray;
    camera_ray(f.camera, x, y, o, ray);
    const Vec3 toward_camera = f.camera.rotation * (-ray);
    CHECK(std::abs(norm(normal) - 1) < 1e-6);
    CHECK(dot(normal, toward_camera) > 0.99);
    // Exact analytic normal at this pixel.
    const auto hit = scene.trace(o, ray, 0);
    REQUIRE(hit.sphere);
    CHECK(norm(normal - f.camera.rotation * hit.normal) < 1e-6);
  }
}

TEST_CASE("moving sphere is displaced by the recipe amplitude") {
  const auto dir = testing::scratch_dir("moving");
  SynthConfig sc;
  sc.recipe = Recipe::MovingSphere;
  sc.width = sc.height = 48;
  sc.views = 5;
  sc.supersample = 1;
  sc.env_resolution = 4;
  sc.points = 10;
  sc.amplitude = 0.6;
  generate_synthetic(sc, dir);
  const Dataset d = load_dataset(dir);
  REQUIRE(d.frames.front().camera.time == 0.0);
  REQUIRE(d.frames.back().camera.time == 1.0);

  // Sphere center from the ground-truth depth and normal maps.
  auto center_from_maps = [&](const CameraFrame& f) {
    const Image depth = read_pfm(f.depth_path), normal = read_pfm(f.normal_path);
    const Camera& cam = f.camera;
    Vec3 sum;
    int count = 0;
    for (int y = 0; y < depth.height; ++y)
      for (int x = 0; x < depth.width; ++x) {
        const double z = depth.at(x, y, 0);
        const Vec3 n{normal.at(x, y, 0), normal.at(x, y, 1), normal.at(x, y, 2)};
        if (z <= 0) continue;
        const Vec3 world_n = cam.rotation.transposed() * n;
        if (std::abs(world_n.y - 1) < 1e-6) continue;  // floor
        const Vec3 p_cam{(x - cam.cx) / cam.fx * z, (y - cam.cy) / cam.fy * z, z};
        const Vec3 c_cam = p_cam - n * SyntheticScene::kSphereRadius;
        sum += cam.rotation.transposed() * (c_cam - cam.translation);
        ++count;
      }
    REQUIRE(count > 20);
    return sum / double(count);
  };
  const Vec3 c0 = center_from_maps(d.frames.front()), c1 = center_from_maps(d.frames.back());
  CHECK(std::abs(norm(c1 - c0) - 0.6) < 1e-4);
  const SyntheticScene scene(sc);
  CHECK(norm(scene.sphere_center(1) - scene.sphere_center(0)) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("rotating light highlight follows the mirror reflection of the rotated sun") {
  const auto dir = testing::scratch_dir("rotating");
  SynthConfig sc;
  sc.recipe = Recipe::RotatingLight;
  sc.width = sc.height = 96;
  sc.views = 3;
  sc.supersample = 1;
  sc.env_resolution = 4;
  sc.points = 10;
  generate_synthetic(sc, dir);
  const Dataset d = load_dataset(dir);
  const CameraFrame& f = d.frames[1];
  REQUIRE(f.camera.time == 0.5);
  const SyntheticScene scene(sc);

  // Sun at t = 0 rotated about +y by half the recipe angle.
  const double half = 0.5 * sc.light_rotation;
  const Quat q{std::cos(half / 2), 0, std::sin(half / 2), 0};
  const Vec3 sun = quat_to_rotmat(q) * scene.sun_direction(0);
  CHECK(norm(sun - scene.sun_direction(0.5)) < 1e-12);
  // Fixed point iteration for the sphere point whose mirror direction is the sun.
  const Vec3 center = scene.sphere_center(0.5), eye = f.camera.center();
  Vec3 n = normalize(normalize(eye - center) + sun);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p = center + n * SyntheticScene::kSphereRadius;
    n = normalize(normalize(eye - p) + sun);
  }
  const Vec3 p = center + n * SyntheticScene::kSphereRadius;
  CHECK(norm(reflect(normalize(eye - p), n) - sun) < 1e-9);
  const Vec2 expected = project(f.camera, p);

  int bx = -1, by = -1;
  double best = -1;
  for (int y = 0; y < f.image.height; ++y)
    for (int x = 0; x < f.image.width; ++x) {
      const double lum = f.image.at(x, y, 0) + f.image.at(x, y, 1) + f.image.at(x, y, 2);
      if (lum > best) {
        best = lum;
        bx = x;
        by = y;
      }
    }
  CHECK(std::abs(bx - expected.x) <= 1.0);
  CHECK(std::abs(by - expected.y) <= 1.0);
  // The highlight actually moves between t = 0 and t = 0.5.
  const Vec3 p0 = [&] {
    Vec3 m = normalize(normalize(d.frames[0].camera.center() - scene.sphere_center(0)) + scene.sun_direction(0));
    return scene.sphere_center(0) + m * SyntheticScene::kSphereRadius;
  }();
  CHECK(norm(p0 - p) > 0.05);
}

TEST_CASE("missing image is reported by name") {
  const auto dir = testing::scratch_dir("missing");
  SynthConfig sc;
  sc.width = sc.height = 8;
  sc.views = 3;
  sc.supersample = 1;
  sc.env_resolution = 4;
  sc.points = 5;
  sc.image_format = "ppm";
  generate_synthetic(sc, dir);
  fs::remove(dir / "images" / "0001.ppm");
  const std::string msg = error_of([&] { load_dataset(dir); });
  CHECK(msg.find("0001.ppm") != std::string::npos);
  CHECK(msg.find("frame 1") != std::string::npos);
  CHECK_THROWS_AS(load_dataset(dir), LoadError);

  write_bytes(dir / "cameras.json", "{\"frames\": [");
  CHECK_THROWS_AS(load_dataset(dir), LoadError);
  CHECK_THROWS_AS(load_dataset(testing::scratch_dir("empty")), LoadError);
}

TEST_CASE("times in seconds are normalized to the unit interval") {
  const auto dir = testing::scratch_dir("seconds");
  nlohmann::json doc;
  doc["frames"] = nlohmann::json::array();
  const double times[] = {0, 1.25, 2.5, 5};
  for (int i = 0; i < 4; ++i) {
    const std::string name = "f" + std::to_string(i) + ".ppm";
    write_ppm(dir / name, Image(6, 4, 3, 0.5));
    doc["frames"].push_back({{"image", name},
                             {"time", times[i]},
                             {"intrinsics", {{5.0, 0.0, 3.0}, {0.0, 5.0, 2.0}, {0.0, 0.0, 1.0}}},
                             {"world_to_camera", {{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 4.0},
                                                  {0.0, 0.0, 0.0, 1.0}}}});
  }
  std::ofstream(dir / "cameras.json") << doc.dump();
  const Dataset d = load_dataset(dir);
  REQUIRE(d.frames.size() == 4);
  CHECK(d.frames[0].camera.time == 0.0);
  CHECK(d.frames[1].camera.time == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(d.frames[2].camera.time == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d.frames[3].camera.time == 1.0);
  CHECK(d.test == std::vector<std::size_t>{0});
  CHECK(d.train == std::vector<std::size_t>{1, 2, 3});

  write_ppm(dir / "f2.ppm", Image(7, 4, 3, 0.5));
  const std::string msg = error_of([&] { load_dataset(dir); });
  CHECK(msg.find("frame 2") != std::string::npos);
}

namespace {

Model checkpoint_model(int width, std::uint64_t seed) {
  ModelConfig mc;
  mc.gaussian_net = {width, 3, 1};
  mc.reflection_net = {width, 2, -1};
  mc.env_resolution = 8;
  mc.env_mips = 2;
  mc.env_samples = 8;
  std::mt19937_64 rng(seed);
  Model m(mc, rng);
  std::vector<InitPoint> pts;
  for (int i = 0; i < 30; ++i)
    pts.push_back({{testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1)},
                   {testing::uniform(rng, 0, 1), testing::uniform(rng, 0, 1), testing::uniform(rng, 0, 1)}});
  m.gaussians = gaussians_from_points(pts, mc);
  m.gaussians.for_each_attribute([&](std::string_view, int, std::vector<double>& v) {
    for (double& x : v) x += testing::uniform(rng, -0.1, 0.1);
  });
  for (float& p : m.gaussian_net.mutable_parameters()) p += float(testing::uniform(rng, -0.01, 0.01));
  for (float& p : m.reflection_net.mutable_parameters()) p += float(testing::uniform(rng, -0.01, 0.01));
  for (double& v : m.env.mutable_raw()) v = testing::uniform(rng, -2, 2);
  return m;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = testing::scratch_dir("checkpoint");
  const Model m = checkpoint_model(16, 90);
  Adam adam;
  std::vector<double> p{1, 2, 3};
  adam.step<double>("position", p, std::vector<double>{0.5, -1, 2}, 0.1);
  save_checkpoint(dir / "a.spmo", m, &adam, 123);

  const Checkpoint ck = load_checkpoint(dir / "a.spmo");
  CHECK(ck.iteration == 123);
  REQUIRE(ck.optimizer.has_value());
  CHECK(ck.optimizer->groups().at("position").m == adam.groups().at("position").m);
  CHECK(ck.optimizer->groups().at("position").v == adam.groups().at("position").v);
  CHECK(ck.optimizer->groups().at("position").step == 1);
  CHECK(ck.model.config.gaussian_net == m.config.gaussian_net);
  CHECK(ck.model.env.raw() == m.env.raw());
  CHECK(std::equal(ck.model.gaussian_net.parameters().begin(), ck.model.gaussian_net.parameters().end(),
                   m.gaussian_net.parameters().begin(), m.gaussian_net.parameters().end()));
  CHECK(std::equal(ck.model.reflection_net.parameters().begin(), ck.model.reflection_net.parameters().end(),
                   m.reflection_net.parameters().begin(), m.reflection_net.parameters().end()));
  m.gaussians.for_each_attribute([&](std::string_view name, int, const std::vector<double>& a) {
    ck.model.gaussians.for_each_attribute([&](std::string_view other, int, const std::vector<double>& b) {
      if (other == name) CHECK(a == b);
    });
  });

  save_checkpoint(dir / "b.spmo", ck.model, &*ck.optimizer, ck.iteration);
  CHECK(read_bytes(dir / "a.spmo") == read_bytes(dir / "b.spmo"));

  save_checkpoint(dir / "c.spmo", m);
  CHECK_FALSE(load_checkpoint(dir / "c.spmo").optimizer.has_value());
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto dir = testing::scratch_dir("checkpoint_bad");
  const Model m = checkpoint_model(16, 91);
  save_checkpoint(dir / "good.spmo", m);
  const std::string bytes = read_bytes(dir / "good.spmo");

  std::string bad = bytes;
  bad[0] = 'X';
  write_bytes(dir / "magic.spmo", bad);
  CHECK(error_of([&] { load_checkpoint(dir / "magic.spmo"); }).find("magic") != std::string::npos);

  bad = bytes;
  bad[4] = 9;
  write_bytes(dir / "version.spmo", bad);
  CHECK(error_of([&] { load_checkpoint(dir / "version.spmo"); }).find("version") != std::string::npos);

  for (std::size_t cut : {std::size_t(6), bytes.size() / 3, bytes.size() - 3}) {
    write_bytes(dir / "short.spmo", bytes.substr(0, cut));
    CHECK(error_of([&] { load_checkpoint(dir / "short.spmo"); }).find("truncated") != std::string::npos);
  }
  write_bytes(dir / "long.spmo", bytes + "xx");
  CHECK_THROWS_AS(load_checkpoint(dir / "long.spmo"), LoadError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.spmo"), LoadError);
}

TEST_CASE("checkpoint from a larger model has a mismatched shape header") {
  const auto dir = testing::scratch_dir("checkpoint_shape");
  save_checkpoint(dir / "big.spmo", checkpoint_model(32, 92));
  Model small = checkpoint_model(16, 93);
  const std::string msg = error_of([&] { load_checkpoint_into(dir / "big.spmo", small); });
  CHECK(msg.find("shape header mismatch") != std::string::npos);
  CHECK_THROWS_AS(load_checkpoint_into(dir / "big.spmo", small), LoadError);

  Model same = checkpoint_model(32, 94);
  int it = -1;
  load_checkpoint_into(dir / "big.spmo", same, nullptr, &it);
  CHECK(it == 0);
  CHECK(same.env.raw() == checkpoint_model(32, 92).env.raw());
}
