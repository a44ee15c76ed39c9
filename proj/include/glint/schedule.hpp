#pragma once

#include "glint/loss.hpp"

namespace glint {

/// Stage lengths at scale 1; every length is divided by `divisor`.
struct StageSchedule {
  int static_iters = 3000;
  int dynamic_warmup_iters = 3000;
  int dynamic_normal_iters = 3000;
  int specular_frozen_iters = 6000;
  int canonical_env_only_iters = 2000;
  int densify_resume_len = 3000;
  int total_iters = 40000;
  int divisor = 1;

  /// Lengths after the divisor.
  StageSchedule scaled() const;
  /// ConfigError unless the scaled boundaries are monotone and fit in total_iters.
  void validate() const;

  // Boundaries (scaled iteration indices).
  int dynamic_start() const;
  int normal_start() const;
  int specular_start() const;
  int reflection_start() const;  // reflection network unfrozen
  int unfreeze_at() const;       // end of the frozen specular window
  int densify_stop() const;      // densification off for good
  int total() const;

  Stage stage_at(int iteration) const;
  bool in_frozen_window(int iteration) const;
  bool reflection_trainable(int iteration) const;
};

}  // namespace glint
