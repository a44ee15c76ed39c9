#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "glint/gaussian.hpp"

namespace glint {

struct DensifyConfig {
  double grad_threshold = 2e-4;  // mean |dL/d mean| in NDC units
  double opacity_floor = 0.005;
  double percent_dense = 0.01;   // clone/split boundary as a fraction of the scene extent
  int interval = 100;
  int start = 500;               // at schedule scale 1
  std::size_t max_gaussians = 200000;
};

/// Screen-gradient statistics gathered between densification steps.
struct DensifyStats {
  std::vector<double> grad_sum;
  std::vector<std::uint32_t> count;

  void reset(std::size_t n);
  void accumulate(const std::vector<double>& screen_grad, const std::vector<std::uint8_t>& visible);
};

struct DensifyResult {
  std::size_t cloned = 0, split = 0, pruned = 0;
  /// Row i of the new set came from old row source[i]; -1 marks a new child.
  std::vector<std::int64_t> source;
  bool changed() const { return cloned || split || pruned; }
};

/// Clone small high-gradient Gaussians (shifted by a sample of their own
/// density), split large ones into two children with scale / 1.6, prune
/// opacity below the floor. Disabled: no-op. Accumulators are reset either
/// way. Throws NumericalError if nothing would survive.
DensifyResult densify_and_prune(GaussianSet& g, DensifyStats& stats, const DensifyConfig& cfg, double scene_extent,
                                bool enabled, std::mt19937_64& rng);

}  // namespace glint
