#pragma once

#include <filesystem>
#include <optional>

#include "glint/model.hpp"
#include "glint/optim.hpp"

namespace glint {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::optional<Adam> optimizer;
  int iteration = 0;
};

/// Little-endian "SPMO" container: version, then tagged length-prefixed
/// sections (config, Gaussians, both networks, cube map, optimizer, schedule).
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Adam* optimizer = nullptr,
                     int iteration = 0);

/// LoadError on bad magic, version mismatch or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads into an already configured model; LoadError when the stored network
/// or cube map shapes differ from the model's.
void load_checkpoint_into(const std::filesystem::path& path, Model& model, Adam* optimizer = nullptr,
                          int* iteration = nullptr);

}  // namespace glint
