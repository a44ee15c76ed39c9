#include "glint/schedule.hpp"

#include <string>

#include "glint/error.hpp"

namespace glint {

StageSchedule StageSchedule::scaled() const {
  if (divisor < 1) throw ConfigError("schedule.divisor must be at least 1");
  StageSchedule s = *this;
  for (int* v : {&s.static_iters, &s.dynamic_warmup_iters, &s.dynamic_normal_iters, &s.specular_frozen_iters,
                 &s.canonical_env_only_iters, &s.densify_resume_len, &s.total_iters})
    *v /= divisor;
  s.divisor = 1;
  return s;
}

void StageSchedule::validate() const {
  const StageSchedule s = scaled();
  for (int v : {s.static_iters, s.dynamic_warmup_iters, s.dynamic_normal_iters, s.specular_frozen_iters,
                s.canonical_env_only_iters, s.densify_resume_len, s.total_iters})
    if (v < 0) throw ConfigError("schedule lengths must be non-negative");
  if (s.canonical_env_only_iters > s.specular_frozen_iters)
    throw ConfigError("canonical_env_only_iters exceeds the frozen specular window");
  if (densify_stop() > s.total_iters)
    throw ConfigError("schedule needs " + std::to_string(densify_stop()) + " iterations but total_iters is " +
                      std::to_string(s.total_iters));
}

int StageSchedule::dynamic_start() const { return scaled().static_iters; }
int StageSchedule::normal_start() const { return dynamic_start() + scaled().dynamic_warmup_iters; }
int StageSchedule::specular_start() const { return normal_start() + scaled().dynamic_normal_iters; }
int StageSchedule::reflection_start() const { return specular_start() + scaled().canonical_env_only_iters; }
int StageSchedule::unfreeze_at() const { return specular_start() + scaled().specular_frozen_iters; }
int StageSchedule::densify_stop() const { return unfreeze_at() + scaled().densify_resume_len; }
int StageSchedule::total() const { return scaled().total_iters; }

Stage StageSchedule::stage_at(int it) const {
  if (it < dynamic_start()) return Stage::Static;
  if (it < normal_start()) return Stage::DynamicWarmup;
  if (it < specular_start()) return Stage::DynamicNormal;
  return Stage::Specular;
}

bool StageSchedule::in_frozen_window(int it) const { return it >= specular_start() && it < unfreeze_at(); }
bool StageSchedule::reflection_trainable(int it) const { return it >= reflection_start(); }

}  // namespace glint
