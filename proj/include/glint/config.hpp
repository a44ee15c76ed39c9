#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glint/model.hpp"
#include "glint/trainer.hpp"

namespace glint {

enum class Precision { Float, Double };

/// Everything a command can be configured with. Keys are flat and dotted
/// ("schedule.divisor", "lr.env"). Defaults are the full-scale configuration
/// except the schedule divisor, which starts at desk scale (10).
struct RunConfig {
  RunConfig() { train.schedule.divisor = 10; }

  std::string dataset;
  std::string output = "out";
  ModelConfig model;
  TrainConfig train;
  Precision precision = Precision::Double;  // scalar type of the gradient check
  int threads = 0;
  int init_points = 10000;     // fallback cloud size without points.json
  int checkpoint_every = 0;    // 0: final checkpoint only
};

const char* env_mode_name(EnvMode m);
EnvMode parse_env_mode(const std::string& s);
const char* normal_mode_name(NormalMode m);
NormalMode parse_normal_mode(const std::string& s);

/// Every recognized key in registry order.
std::vector<std::string> config_keys();

/// Flat object of every key with its current value.
nlohmann::json config_to_json(const RunConfig& c);

/// Applies a JSON object; nested objects are flattened with dots. ConfigError
/// on unknown keys or ill-typed values.
void apply_config(RunConfig& c, const nlohmann::json& j);
/// `value` is parsed as JSON when possible, otherwise taken as a string.
void apply_override(RunConfig& c, const std::string& key, const std::string& value);

/// default <- file <- flags.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, std::string>>& flags);

}  // namespace glint
