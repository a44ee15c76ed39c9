#include "glint/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "glint/error.hpp"
#include "json.hpp"

namespace glint {

using nlohmann::json;

namespace {

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw LoadError(what + " is not a number");
  return j.get<double>();
}

Camera parse_camera(const json& f, const std::string& where) {
  if (!f.contains("intrinsics") || !f.contains("world_to_camera"))
    throw LoadError(where + ": needs intrinsics and world_to_camera");
  const json& k = f["intrinsics"];
  const json& m = f["world_to_camera"];
  if (!k.is_array() || k.size() != 3 || !m.is_array() || m.size() != 4)
    throw LoadError(where + ": intrinsics must be 3x3 and world_to_camera 4x4");
  double kk[3][3], mm[4][4];
  for (int r = 0; r < 3; ++r) {
    if (!k[r].is_array() || k[r].size() != 3) throw LoadError(where + ": intrinsics must be 3x3");
    for (int c = 0; c < 3; ++c) kk[r][c] = number(k[r][c], where + " intrinsics");
  }
  for (int r = 0; r < 4; ++r) {
    if (!m[r].is_array() || m[r].size() != 4) throw LoadError(where + ": world_to_camera must be 4x4");
    for (int c = 0; c < 4; ++c) mm[r][c] = number(m[r][c], where + " world_to_camera");
  }
  Camera cam;
  cam.fx = kk[0][0];
  cam.fy = kk[1][1];
  cam.cx = kk[0][2];
  cam.cy = kk[1][2];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) cam.rotation(r, c) = mm[r][c];
    cam.translation[r] = mm[r][3];
  }
  if (mm[3][0] != 0 || mm[3][1] != 0 || mm[3][2] != 0 || mm[3][3] != 1)
    throw LoadError(where + ": world_to_camera last row must be 0 0 0 1");
  const Mat3 should_be_identity = cam.rotation * cam.rotation.transposed();
  if (frobenius_norm(should_be_identity - Mat3::identity()) > 1e-6 || cam.rotation.determinant() < 0)
    throw LoadError(where + ": world_to_camera rotation is not a proper rotation");
  if (!(cam.fx > 0) || !(cam.fy > 0)) throw LoadError(where + ": focal lengths must be positive");
  return cam;
}

std::vector<std::size_t> parse_indices(const json& j, std::size_t count, const std::string& name) {
  std::vector<std::size_t> out;
  if (!j.is_array()) throw LoadError(name + " must be an array of frame indices");
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 0 || std::size_t(v.get<long long>()) >= count)
      throw LoadError(name + " contains an invalid frame index");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

}  // namespace

double Dataset::scene_extent() const {
  const auto& ids = train.empty() ? test : train;
  if (ids.empty()) return 1.0;
  Vec3 mean;
  for (auto i : ids) mean += frames[i].camera.center();
  mean = mean / double(ids.size());
  double r = 0;
  for (auto i : ids) r = std::max(r, norm(frames[i].camera.center() - mean));
  return 1.1 * std::max(r, 1e-6);
}

std::vector<InitPoint> Dataset::initial_points(std::size_t fallback_count, std::uint64_t seed) const {
  if (!points.empty()) return points;
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  Vec3 color;
  std::size_t pixels = 0;
  for (auto i : train) {
    const Vec3 c = frames[i].camera.center();
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], c[k]);
      hi[k] = std::max(hi[k], c[k]);
    }
    const Image& img = frames[i].image;
    for (std::size_t p = 0; p < img.pixel_count(); ++p) color += img.rgb(p);
    pixels += img.pixel_count();
  }
  if (pixels) color = color / double(pixels);
  std::mt19937_64 rng(seed);
  std::vector<InitPoint> out(fallback_count);
  for (auto& p : out) {
    for (int k = 0; k < 3; ++k) p.position[k] = std::uniform_real_distribution<double>(lo[k], hi[k])(rng);
    p.color = color;
  }
  return out;
}

static Dataset load_dataset_impl(const std::filesystem::path& dir, bool load_images) {
  const auto path = dir / "cameras.json";
  std::ifstream in(path);
  if (!in) throw LoadError("missing " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError("malformed JSON in " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("frames") || !doc["frames"].is_array() || doc["frames"].empty())
    throw LoadError(path.string() + " needs a non-empty frames array");

  Dataset ds;
  ds.root = dir;
  const json& frames = doc["frames"];
  int width = -1, height = -1;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& f = frames[i];
    const std::string where = "frame " + std::to_string(i);
    if (!f.is_object() || !f.contains("image") || !f["image"].is_string())
      throw LoadError(where + ": missing image filename");
    CameraFrame fr;
    fr.camera = parse_camera(f, where);
    fr.camera.time = f.contains("time") ? number(f["time"], where + " time") : 0.0;
    fr.image_path = dir / f["image"].get<std::string>();
    if (f.contains("normal")) fr.normal_path = dir / f["normal"].get<std::string>();
    if (f.contains("depth")) fr.depth_path = dir / f["depth"].get<std::string>();
    if (!std::filesystem::exists(fr.image_path))
      throw LoadError(where + ": image not found: " + f["image"].get<std::string>());
    if (f.contains("width")) fr.camera.width = f["width"].get<int>();
    if (f.contains("height")) fr.camera.height = f["height"].get<int>();
    if (load_images) {
      try {
        fr.image = read_image(fr.image_path);
      } catch (const Error& e) {
        throw LoadError(where + ": " + e.what());
      }
      fr.camera.width = fr.image.width;
      fr.camera.height = fr.image.height;
    }
    if (width < 0) {
      width = fr.camera.width;
      height = fr.camera.height;
    } else if (fr.camera.width != width || fr.camera.height != height) {
      throw LoadError(where + ": image size " + std::to_string(fr.camera.width) + "x" +
                      std::to_string(fr.camera.height) + " differs from " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
    if (i > 0 && fr.camera.time < ds.frames.back().camera.time)
      throw LoadError(where + ": times must be non-decreasing");
    ds.frames.push_back(std::move(fr));
  }

  const double t0 = ds.frames.front().camera.time, t1 = ds.frames.back().camera.time;
  if (t0 < 0 || t1 > 1) {
    for (auto& f : ds.frames) f.camera.time = t1 > t0 ? (f.camera.time - t0) / (t1 - t0) : 0.0;
  }

  const std::size_t n = ds.frames.size();
  if (doc.contains("train")) ds.train = parse_indices(doc["train"], n, "train");
  if (doc.contains("test")) ds.test = parse_indices(doc["test"], n, "test");
  if (!doc.contains("train") && !doc.contains("test")) {
    for (std::size_t i = 0; i < n; ++i) (i % 8 == 0 ? ds.test : ds.train).push_back(i);
    if (ds.train.empty()) ds.train = ds.test;
  }
  if (ds.train.empty()) throw LoadError("dataset has no training frames");

  if (doc.contains("points")) {
    const auto ppath = dir / doc["points"].get<std::string>();
    std::ifstream pin(ppath);
    if (!pin) throw LoadError("missing point file " + ppath.string());
    try {
      const json pts = json::parse(pin);
      for (const auto& p : pts.at("points")) {
        if (!p.is_array() || p.size() != 6) throw LoadError("points must be [x,y,z,r,g,b] rows");
        ds.points.push_back({{p[0].get<double>(), p[1].get<double>(), p[2].get<double>()},
                             {p[3].get<double>(), p[4].get<double>(), p[5].get<double>()}});
      }
    } catch (const json::exception& e) {
      throw LoadError("malformed point file " + ppath.string() + ": " + e.what());
    }
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& dir, bool load_images) {
  try {
    return load_dataset_impl(dir, load_images);
  } catch (const json::exception& e) {
    throw LoadError("malformed cameras.json in " + dir.string() + ": " + e.what());
  }
}

}  // namespace glint
