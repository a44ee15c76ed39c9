#pragma once

#include <filesystem>
#include <vector>

#include "glint/camera.hpp"
#include "glint/image.hpp"
#include "glint/model.hpp"

namespace glint {

struct CameraFrame {
  Camera camera;  // camera.time in [0,1]
  std::filesystem::path image_path;
  Image image;
  std::filesystem::path normal_path;  // optional camera-space ground truth (PFM)
  std::filesystem::path depth_path;   // optional camera depth ground truth (PFM)
};

struct Dataset {
  std::filesystem::path root;
  std::vector<CameraFrame> frames;
  std::vector<std::size_t> train, test;
  std::vector<InitPoint> points;

  /// 1.1 x the largest distance of a training camera center from their mean.
  double scene_extent() const;
  /// Init points, or uniform samples in the camera bounding box with the mean image color.
  std::vector<InitPoint> initial_points(std::size_t fallback_count, std::uint64_t seed) const;
};

/// Reads <dir>/cameras.json and the referenced images. Every failure is a
/// LoadError naming the offending frame or file.
Dataset load_dataset(const std::filesystem::path& dir, bool load_images = true);

}  // namespace glint
