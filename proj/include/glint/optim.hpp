#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace glint {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-15;
};

/// First/second moments of one parameter group with its own step count.
struct AdamMoments {
  std::vector<double> m, v;
  std::uint64_t step = 0;
};

/// Adam with bias correction; groups are created on first use and stepped
/// only when updated, so frozen groups keep their counts.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  template <typename T>
  void step(const std::string& group, std::span<T> params, std::span<const T> grads, double lr);

  /// Reindexes a per-row group: row i takes old row source[i], or zeros when negative.
  void remap(const std::string& group, int width, std::span<const std::int64_t> source);

  const std::map<std::string, AdamMoments>& groups() const { return groups_; }
  std::map<std::string, AdamMoments>& mutable_groups() { return groups_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::map<std::string, AdamMoments> groups_;
};

/// exp(lerp(log lr0, log lr1, clamp(step / steps, 0, 1))).
double exponential_lr(double lr0, double lr1, double step, double steps);

template <typename T>
bool all_finite(std::span<const T> values);

}  // namespace glint
