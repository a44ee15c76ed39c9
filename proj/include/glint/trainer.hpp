#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "glint/dataset.hpp"
#include "glint/densify.hpp"
#include "glint/frame.hpp"
#include "glint/optim.hpp"
#include "glint/schedule.hpp"

namespace glint {

struct LearningRates {
  double position_init = 1.6e-4;  // times the scene extent
  double position_final = 1.6e-6;
  double sh_dc = 2.5e-3;
  double sh_rest = 2.5e-3 / 20;
  double opacity = 5e-2;
  double scale = 5e-3;
  double rotation = 1e-3;
  double tint = 2.5e-3;
  double roughness = 2.5e-3;
  double normal_residual = 2.5e-3;
  double mlp_init = 8e-4;
  double mlp_final = 1.6e-6;
  double env = 1e-2;
};

struct TrainConfig {
  StageSchedule schedule;
  DensifyConfig densify;
  LearningRates lr;
  AdamConfig adam;
  EnvMode env_mode = EnvMode::DeformableEnv;
  NormalMode normal_mode = NormalMode::Physical;
  int k = 5;
  double lambda_normal = kDefaultNormalWeight;
  double lambda_ssim = kDefaultSsimWeight;
  std::uint64_t seed = 0;
  Vec3 background;
  double near_plane = kDefaultNearPlane;
  int log_every = 50;

  /// ConfigError on an invalid schedule or hyperparameter.
  void validate() const;
};

struct LogRow {
  int iteration = 0;
  Stage stage = Stage::Static;
  LossTerms terms;
  double total = 0;
  double heldout_psnr = 0;
  std::size_t gaussians = 0;
};

struct IterationReport {
  int iteration = 0;
  Stage stage = Stage::Static;
  LossTerms terms;
  double total = 0;
  bool aborted = false;  // non-finite gradient, nothing was updated
  DensifyResult densify;
};

/// Render options used at `iteration` under `cfg` (also used for evaluation).
FrameOptions frame_options(const TrainConfig& cfg, int iteration);

/// Model with networks from `rng` and Gaussians from the dataset points
/// (or the uniform fallback cloud).
Model initial_model(const Dataset& data, const ModelConfig& cfg, std::uint64_t seed,
                    std::size_t fallback_points = 10000);

class Trainer {
 public:
  /// `data` must outlive the trainer. ConfigError before any work when the
  /// configuration is invalid.
  Trainer(const Dataset& data, Model model, TrainConfig cfg);

  IterationReport step();
  /// Runs until the schedule total.
  void run();

  int iteration() const { return iteration_; }
  bool finished() const { return iteration_ >= total_; }
  const Model& model() const { return model_; }
  Model& model() { return model_; }
  const Adam& optimizer() const { return adam_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<LogRow>& log() const { return log_; }
  std::size_t aborted_iterations() const { return aborted_; }

  /// Resume point: schedule position and optimizer moments.
  void restore(int iteration, Adam optimizer);

  /// Called after every iteration with its report.
  std::function<void(const Trainer&, const IterationReport&)> on_iteration;

  /// Header plus one line per log row.
  std::string log_csv() const;
  void write_log(const std::filesystem::path& path) const;

 private:
  double heldout_psnr() const;
  void apply_updates(const ModelGradients& grad, int it);
  bool densify_window(int it) const;

  const Dataset& data_;
  Model model_;
  TrainConfig cfg_;
  StageSchedule sched_;
  int total_ = 0;
  int iteration_ = 0;
  double extent_ = 1;
  Adam adam_;
  std::mt19937_64 rng_;
  DensifyStats stats_;
  std::vector<LogRow> log_;
  std::size_t aborted_ = 0;
  int consecutive_aborts_ = 0;
};

}  // namespace glint
