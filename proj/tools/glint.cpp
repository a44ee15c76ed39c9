// glint command-line front end: synth, train, render, eval, gradcheck, inspect.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "glint/checkpoint.hpp"
#include "glint/config.hpp"
#include "glint/dataset.hpp"
#include "glint/error.hpp"
#include "glint/gradcheck.hpp"
#include "glint/metrics.hpp"
#include "glint/parallel.hpp"
#include "glint/synth.hpp"
#include "glint/trainer.hpp"

namespace fs = std::filesystem;
using namespace glint;

namespace {

struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_config_flags(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.file, "JSON config with flat dotted keys");
  app->add_option("--set", f.sets, "Override as key=value (repeatable)");
  for (const std::string& key : config_keys())
    f.options[key] = app->add_option("--" + key, f.values[key], "Config key " + key)->group("Config keys");
}

RunConfig resolve(const ConfigFlags& f, const std::optional<fs::path>& fallback_file = std::nullopt) {
  std::vector<std::pair<std::string, std::string>> flags;
  for (const std::string& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    flags.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [key, opt] : f.options)
    if (opt->count()) flags.emplace_back(key, f.values.at(key));
  std::optional<fs::path> file;
  if (!f.file.empty())
    file = f.file;
  else if (fallback_file && fs::exists(*fallback_file))
    file = fallback_file;
  RunConfig c = resolve_config(file, flags);
  set_thread_count(unsigned(std::max(c.threads, 0)));
  return c;
}

int stage_iteration(const RunConfig& c, int iteration) {
  return std::clamp(iteration - 1, 0, std::max(c.train.schedule.total() - 1, 0));
}

int cmd_synth(const SynthConfig& cfg, const std::string& out) {
  generate_synthetic(cfg, out);
  std::printf("wrote %s recipe=%s\n", out.c_str(), recipe_name(cfg.recipe));
  return 0;
}

int cmd_train(const ConfigFlags& flags, const std::string& resume) {
  const RunConfig c = resolve(flags);
  if (c.dataset.empty()) throw UsageError("train needs a dataset (--dataset)");
  const Dataset data = load_dataset(c.dataset);
  fs::create_directories(c.output);
  std::ofstream(fs::path(c.output) / "config.json") << config_to_json(c).dump(2) << "\n";

  Model model;
  Adam adam(c.train.adam);
  int start = 0;
  if (!resume.empty()) {
    Checkpoint ck = load_checkpoint(resume);
    model = std::move(ck.model);
    if (ck.optimizer) adam = std::move(*ck.optimizer);
    start = ck.iteration;
  } else {
    model = initial_model(data, c.model, c.train.seed, std::size_t(std::max(c.init_points, 1)));
  }
  Trainer trainer(data, std::move(model), c.train);
  if (start) trainer.restore(start, std::move(adam));
  const fs::path ckpt = fs::path(c.output) / "checkpoint.spmo";
  std::size_t rows_seen = 0;
  trainer.on_iteration = [&](const Trainer& t, const IterationReport&) {
    if (c.checkpoint_every > 0 && t.iteration() % c.checkpoint_every == 0)
      save_checkpoint(ckpt, t.model(), &t.optimizer(), t.iteration());
    if (t.log().size() == rows_seen) return;
    rows_seen = t.log().size();
    const LogRow& r = t.log().back();
    std::fprintf(stderr, "iter %d %s loss=%.5f psnr_heldout=%.3f gaussians=%zu\n", r.iteration, stage_name(r.stage),
                 r.total, r.heldout_psnr, r.gaussians);
  };
  trainer.run();
  save_checkpoint(ckpt, trainer.model(), &trainer.optimizer(), trainer.iteration());
  trainer.write_log(fs::path(c.output) / "metrics.csv");
  const double last = trainer.log().empty() ? 0.0 : trainer.log().back().heldout_psnr;
  std::printf("trained iterations=%d gaussians=%zu psnr_heldout=%.4f aborted=%zu\n", trainer.iteration(),
              trainer.model().gaussians.size(), last, trainer.aborted_iterations());
  return 0;
}

std::vector<std::size_t> split_indices(const Dataset& d, const std::string& split) {
  if (split == "test") return d.test.empty() ? d.train : d.test;
  if (split == "train") return d.train;
  if (split == "all") {
    std::vector<std::size_t> all(d.frames.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  throw UsageError("split must be test, train or all");
}

int cmd_render(const ConfigFlags& flags, const std::string& checkpoint, const std::string& out,
               const std::vector<double>& times, const std::string& split) {
  const RunConfig c = resolve(flags, fs::path(checkpoint).parent_path() / "config.json");
  if (c.dataset.empty()) throw UsageError("render needs a dataset (--dataset) for the cameras");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(c.dataset, false);
  const FrameOptions opt = frame_options(c.train, stage_iteration(c, ck.iteration));
  fs::create_directories(out);
  std::size_t written = 0;
  for (std::size_t idx : split_indices(data, split)) {
    std::vector<double> ts = times;
    if (ts.empty()) ts.push_back(data.frames[idx].camera.time);
    for (double t : ts) {
      if (!(t >= 0 && t <= 1)) throw UsageError("render times must lie in [0,1]");
      Camera cam = data.frames[idx].camera;
      cam.time = t;
      const FrameState s = render_frame(ck.model, cam, opt);
      char stem[64];
      std::snprintf(stem, sizeof stem, "view%04zu_t%.4f", idx, t);
      write_png(fs::path(out) / (std::string(stem) + "_color.png"), s.buffers.color);
      write_pfm(fs::path(out) / (std::string(stem) + "_depth.pfm"), s.buffers.depth);
      write_pfm(fs::path(out) / (std::string(stem) + "_normal.pfm"), s.buffers.normal);
      ++written;
    }
  }
  std::printf("rendered views=%zu out=%s\n", written, out.c_str());
  return 0;
}

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint, const std::string& image,
             const std::string& reference) {
  if (!image.empty() || !reference.empty()) {
    if (image.empty() || reference.empty()) throw UsageError("eval needs both --image and --reference");
    const Image a = read_image(image), b = read_image(reference);
    std::printf("psnr=%.6f ssim=%.6f views=1\n", metric_psnr(a, b), metric_ssim(a, b));
    return 0;
  }
  if (checkpoint.empty()) throw UsageError("eval needs --checkpoint or --image/--reference");
  const RunConfig c = resolve(flags, fs::path(checkpoint).parent_path() / "config.json");
  if (c.dataset.empty()) throw UsageError("eval needs a dataset (--dataset)");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(c.dataset);
  const FrameOptions opt = frame_options(c.train, stage_iteration(c, ck.iteration));
  const auto views = split_indices(data, "test");
  double p = 0, s = 0;
  for (std::size_t idx : views) {
    const FrameState st = render_frame(ck.model, data.frames[idx].camera, opt);
    p += metric_psnr(st.buffers.color, data.frames[idx].image);
    s += metric_ssim(st.buffers.color, data.frames[idx].image);
  }
  std::printf("psnr=%.6f ssim=%.6f views=%zu\n", p / views.size(), s / views.size(), views.size());
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& opt) {
  const auto results = run_gradcheck(opt);
  std::string failed;
  for (const auto& r : results) {
    std::printf("op=%s instances=%d max_rel_err=%.3e tol=%.0e seconds=%.2f status=%s\n", r.name.c_str(), r.instances,
                r.max_error, r.tolerance, r.seconds, r.passed ? "pass" : "FAIL");
    if (!r.passed) failed += (failed.empty() ? "" : ",") + r.name;
  }
  std::fflush(stdout);
  if (!failed.empty()) throw NumericalError("gradcheck failed: " + failed);
  return 0;
}

int cmd_inspect(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  const Model& m = ck.model;
  const GaussianSet& g = m.gaussians;
  std::printf("iteration=%d\n", ck.iteration);
  std::printf("gaussians=%zu\n", g.size());
  std::printf("gaussian_net=%dx%d params=%zu\n", m.gaussian_net.shape().depth, m.gaussian_net.shape().width,
              m.gaussian_net.parameters().size());
  std::printf("reflection_net=%dx%d params=%zu\n", m.reflection_net.shape().depth, m.reflection_net.shape().width,
              m.reflection_net.parameters().size());

  // log10 of the largest extent, half-decade bins over [-4, 1).
  const int bins = 10;
  std::vector<std::size_t> hist(bins + 2, 0);
  double opacity = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3 ls = g.scale_log(i);
    const double e = std::max({ls.x, ls.y, ls.z}) / std::log(10.0);
    const int b = e < -4 ? 0 : e >= 1 ? bins + 1 : 1 + int((e + 4) / 0.5);
    ++hist[std::size_t(b)];
    opacity += g.opacity(i);
  }
  std::printf("mean_opacity=%.6f\n", g.empty() ? 0.0 : opacity / g.size());
  std::printf("scale_histogram_log10=<-4:%zu", hist[0]);
  for (int b = 0; b < bins; ++b) std::printf(" [%.1f,%.1f):%zu", -4 + 0.5 * b, -3.5 + 0.5 * b, hist[b + 1]);
  std::printf(" >=1:%zu\n", hist[bins + 1]);

  const CubeImage base = m.env.base_radiance();
  Vec3 energy;
  double total_weight = 0;
  const int r = base.resolution;
  for (int f = 0; f < kCubeFaces; ++f)
    for (int row = 0; row < r; ++row)
      for (int col = 0; col < r; ++col) {
        const double w = texel_solid_angle(row, col, r);
        energy += base.at(base.texel(f, row, col)) * w;
        total_weight += w;
      }
  energy = energy * (1 / total_weight);
  std::printf("cubemap_resolution=%d mips=%d\n", m.env.base_resolution(), m.env.mip_levels());
  std::printf("cubemap_energy=%.6f,%.6f,%.6f\n", energy.x, energy.y, energy.z);
  std::printf("optimizer_groups=%zu\n", ck.optimizer ? ck.optimizer->groups().size() : 0);
  return 0;
}

int fail(const char* kind, const std::string& msg, int code) {
  std::string line = msg;
  for (char& ch : line)
    if (ch == '\n') ch = ' ';
  std::fprintf(stderr, "error: %s: %s\n", kind, line.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic specular Gaussian splatting on the CPU"};
  app.require_subcommand(1);

  SynthConfig synth;
  std::string synth_recipe, synth_out;
  auto* s = app.add_subcommand("synth", "Generate an analytic synthetic dataset");
  s->add_option("--recipe", synth_recipe, "STATIC_MIRROR_SPHERE, MOVING_SPHERE or ROTATING_LIGHT")->required();
  s->add_option("--out", synth_out, "Output directory")->required();
  s->add_option("--width", synth.width);
  s->add_option("--height", synth.height);
  s->add_option("--views", synth.views, "Frame count (0: recipe default)");
  s->add_option("--test-views", synth.test_views, "Extra held-out views (static recipe)");
  s->add_option("--seed", synth.seed);
  s->add_option("--format", synth.image_format, "png, ppm or pfm");
  s->add_option("--supersample", synth.supersample);
  s->add_option("--env-resolution", synth.env_resolution);
  s->add_option("--points", synth.points);
  s->add_option("--amplitude", synth.amplitude);
  s->add_option("--light-rotation", synth.light_rotation);

  ConfigFlags train_flags, render_flags, eval_flags;
  std::string resume;
  auto* t = app.add_subcommand("train", "Train a model on a dataset");
  add_config_flags(t, train_flags);
  t->add_option("--resume", resume, "Continue from a checkpoint");

  std::string render_ckpt, render_out, render_split = "test";
  std::vector<double> render_times;
  auto* r = app.add_subcommand("render", "Render color, depth and normal images");
  add_config_flags(r, render_flags);
  r->add_option("--checkpoint", render_ckpt)->required();
  r->add_option("--out", render_out)->required();
  r->add_option("--times", render_times, "Render times in [0,1] (default: each frame's own)")->delimiter(',');
  r->add_option("--split", render_split, "test, train or all");

  std::string eval_ckpt, eval_image, eval_reference;
  auto* e = app.add_subcommand("eval", "Mean PSNR and SSIM over the test split, or of one image pair");
  add_config_flags(e, eval_flags);
  e->add_option("--checkpoint", eval_ckpt);
  e->add_option("--image", eval_image);
  e->add_option("--reference", eval_reference);

  GradcheckOptions gc;
  ConfigFlags gc_flags;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every adjoint");
  add_config_flags(g, gc_flags);
  g->add_option("--check-seed", gc.seed, "Seed for the random instances");
  g->add_option("--instances", gc.instances);
  g->add_option("--only", gc.only, "Check one operation");
  g->add_option("--inject-fault", gc.inject_fault, "Deliberately break one operation's adjoint");

  std::string inspect_path;
  auto* in = app.add_subcommand("inspect", "Print checkpoint statistics");
  in->add_option("checkpoint", inspect_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    return fail("usage", err.what(), 2);
  }

  try {
    if (s->parsed()) {
      synth.recipe = parse_recipe(synth_recipe);
      return cmd_synth(synth, synth_out);
    }
    if (t->parsed()) return cmd_train(train_flags, resume);
    if (r->parsed()) return cmd_render(render_flags, render_ckpt, render_out, render_times, render_split);
    if (e->parsed()) return cmd_eval(eval_flags, eval_ckpt, eval_image, eval_reference);
    if (g->parsed()) {
      gc.float_networks = resolve(gc_flags).precision == Precision::Float;
      return cmd_gradcheck(gc);
    }
    if (in->parsed()) return cmd_inspect(inspect_path);
  } catch (const UsageError& err) {
    return fail("usage", err.what(), 2);
  } catch (const ConfigError& err) {
    return fail("usage", err.what(), 2);
  } catch (const NumericalError& err) {
    return fail("numerical", err.what(), 4);
  } catch (const Error& err) {
    return fail("data", err.what(), 3);
  } catch (const std::exception& err) {
    return fail("data", err.what(), 3);
  }
  return 2;
}
