#include "glint/config.hpp"

#include <fstream>
#include <functional>

#include "glint/error.hpp"

namespace glint {

using nlohmann::json;

const char* env_mode_name(EnvMode m) {
  switch (m) {
    case EnvMode::ShOnly: return "sh-only";
    case EnvMode::StaticEnv: return "static-env";
    case EnvMode::DeformableEnv: return "deformable-env";
  }
  return "?";
}

EnvMode parse_env_mode(const std::string& s) {
  for (EnvMode m : {EnvMode::ShOnly, EnvMode::StaticEnv, EnvMode::DeformableEnv})
    if (s == env_mode_name(m)) return m;
  throw ConfigError("env.mode must be sh-only, static-env or deformable-env (got '" + s + "')");
}

const char* normal_mode_name(NormalMode m) { return m == NormalMode::Physical ? "physical" : "shortest-axis"; }

NormalMode parse_normal_mode(const std::string& s) {
  if (s == "physical") return NormalMode::Physical;
  if (s == "shortest-axis") return NormalMode::ShortestAxis;
  throw ConfigError("normal.mode must be physical or shortest-axis (got '" + s + "')");
}

namespace {

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw ConfigError("config key " + key + " expects " + want);
}

template <typename T>
T convert(const std::string& key, const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) bad_type(key, "a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) bad_type(key, "an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.get<std::int64_t>() < 0) bad_type(key, "a non-negative integer");
    }
    return v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) bad_type(key, "a number");
    return v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) bad_type(key, "a string");
    return v.get<std::string>();
  } else if constexpr (std::is_same_v<T, Vec3>) {
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
      bad_type(key, "an array of three numbers");
    return Vec3{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }
}

template <typename T>
json to_json_value(const T& v) {
  if constexpr (std::is_same_v<T, Vec3>)
    return json::array({v.x, v.y, v.z});
  else
    return json(v);
}

template <typename F>
Entry field(std::string key, F ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<RunConfig&>()))>;
  return {key, [ref, key](RunConfig& c, const json& v) { ref(c) = convert<T>(key, v); },
          [ref](const RunConfig& c) { return to_json_value(ref(const_cast<RunConfig&>(c))); }};
}

#define GLINT_FIELD(key, expr) field(key, [](RunConfig& c) -> auto& { return c.expr; })

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e = {
        GLINT_FIELD("dataset", dataset),
        GLINT_FIELD("output", output),
        GLINT_FIELD("seed", train.seed),
        GLINT_FIELD("threads", threads),
        {"precision",
         [](RunConfig& c, const json& v) {
           const std::string s = convert<std::string>("precision", v);
           if (s == "float")
             c.precision = Precision::Float;
           else if (s == "double")
             c.precision = Precision::Double;
           else
             throw ConfigError("precision must be float or double (got '" + s + "')");
         },
         [](const RunConfig& c) { return json(c.precision == Precision::Float ? "float" : "double"); }},
        GLINT_FIELD("schedule.static_iters", train.schedule.static_iters),
        GLINT_FIELD("schedule.dynamic_warmup_iters", train.schedule.dynamic_warmup_iters),
        GLINT_FIELD("schedule.dynamic_normal_iters", train.schedule.dynamic_normal_iters),
        GLINT_FIELD("schedule.specular_frozen_iters", train.schedule.specular_frozen_iters),
        GLINT_FIELD("schedule.canonical_env_only_iters", train.schedule.canonical_env_only_iters),
        GLINT_FIELD("schedule.densify_resume_len", train.schedule.densify_resume_len),
        GLINT_FIELD("schedule.total_iters", train.schedule.total_iters),
        GLINT_FIELD("schedule.divisor", train.schedule.divisor),
        {"env.mode", [](RunConfig& c, const json& v) { c.train.env_mode = parse_env_mode(convert<std::string>("env.mode", v)); },
         [](const RunConfig& c) { return json(env_mode_name(c.train.env_mode)); }},
        {"normal.mode",
         [](RunConfig& c, const json& v) { c.train.normal_mode = parse_normal_mode(convert<std::string>("normal.mode", v)); },
         [](const RunConfig& c) { return json(normal_mode_name(c.train.normal_mode)); }},
        GLINT_FIELD("loss.k", train.k),
        GLINT_FIELD("loss.lambda_normal", train.lambda_normal),
        GLINT_FIELD("loss.lambda_ssim", train.lambda_ssim),
        GLINT_FIELD("env.resolution", model.env_resolution),
        GLINT_FIELD("env.mips", model.env_mips),
        GLINT_FIELD("env.samples", model.env_samples),
        GLINT_FIELD("encoding.position_frequencies", model.encoding.position_frequencies),
        GLINT_FIELD("encoding.time_frequencies", model.encoding.time_frequencies),
        GLINT_FIELD("encoding.direction_frequencies", model.encoding.direction_frequencies),
        GLINT_FIELD("net.gaussian.width", model.gaussian_net.width),
        GLINT_FIELD("net.gaussian.depth", model.gaussian_net.depth),
        GLINT_FIELD("net.gaussian.skip_layer", model.gaussian_net.skip_layer),
        GLINT_FIELD("net.reflection.width", model.reflection_net.width),
        GLINT_FIELD("net.reflection.depth", model.reflection_net.depth),
        GLINT_FIELD("net.reflection.skip_layer", model.reflection_net.skip_layer),
        GLINT_FIELD("init.opacity", model.init_opacity),
        GLINT_FIELD("init.roughness", model.init_roughness),
        GLINT_FIELD("init.points", init_points),
        GLINT_FIELD("lr.position_init", train.lr.position_init),
        GLINT_FIELD("lr.position_final", train.lr.position_final),
        GLINT_FIELD("lr.sh_dc", train.lr.sh_dc),
        GLINT_FIELD("lr.sh_rest", train.lr.sh_rest),
        GLINT_FIELD("lr.opacity", train.lr.opacity),
        GLINT_FIELD("lr.scale", train.lr.scale),
        GLINT_FIELD("lr.rotation", train.lr.rotation),
        GLINT_FIELD("lr.tint", train.lr.tint),
        GLINT_FIELD("lr.roughness", train.lr.roughness),
        GLINT_FIELD("lr.normal_residual", train.lr.normal_residual),
        GLINT_FIELD("lr.mlp_init", train.lr.mlp_init),
        GLINT_FIELD("lr.mlp_final", train.lr.mlp_final),
        GLINT_FIELD("lr.env", train.lr.env),
        GLINT_FIELD("densify.grad_threshold", train.densify.grad_threshold),
        GLINT_FIELD("densify.opacity_floor", train.densify.opacity_floor),
        GLINT_FIELD("densify.percent_dense", train.densify.percent_dense),
        GLINT_FIELD("densify.interval", train.densify.interval),
        GLINT_FIELD("densify.start", train.densify.start),
        GLINT_FIELD("densify.max_gaussians", train.densify.max_gaussians),
        GLINT_FIELD("train.log_every", train.log_every),
        GLINT_FIELD("train.background", train.background),
        GLINT_FIELD("render.near_plane", train.near_plane),
        GLINT_FIELD("train.checkpoint_every", checkpoint_every),
    };
    return e;
  }();
  return entries;
}

#undef GLINT_FIELD

const Entry& find(const std::string& key) {
  for (const Entry& e : registry())
    if (e.key == key) return e;
  throw ConfigError("unknown config key " + key);
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out.emplace_back(key, *it);
  }
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : registry()) keys.push_back(e.key);
  return keys;
}

json config_to_json(const RunConfig& c) {
  json j = json::object();
  for (const Entry& e : registry()) j[e.key] = e.get(c);
  return j;
}

void apply_config(RunConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::pair<std::string, json>> flat;
  flatten(j, "", flat);
  for (const auto& [key, value] : flat) find(key).set(c, value);
}

void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
  const Entry& e = find(key);
  json v = json::parse(value, nullptr, false);
  if (v.is_discarded()) v = value;
  e.set(c, v);
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, std::string>>& flags) {
  RunConfig c;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config " + file->string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config " + file->string() + " is not valid JSON");
    apply_config(c, j);
  }
  for (const auto& [k, v] : flags) apply_override(c, k, v);
  return c;
}

}  // namespace glint
