#include "glint/densify.hpp"

#include <algorithm>
#include <cmath>

#include "glint/error.hpp"

namespace glint {

void DensifyStats::reset(std::size_t n) {
  grad_sum.assign(n, 0.0);
  count.assign(n, 0);
}

void DensifyStats::accumulate(const std::vector<double>& screen_grad, const std::vector<std::uint8_t>& visible) {
  if (grad_sum.size() != screen_grad.size()) reset(screen_grad.size());
  for (std::size_t i = 0; i < screen_grad.size(); ++i) {
    if (!visible[i]) continue;
    grad_sum[i] += screen_grad[i];
    ++count[i];
  }
}

namespace {

Vec3 sample_offset(const GaussianSet& g, std::size_t i, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0, 1);
  const Vec3 s = g.scale_log(i);
  const Vec3 local{std::exp(s.x) * nd(rng), std::exp(s.y) * nd(rng), std::exp(s.z) * nd(rng)};
  return quat_to_rotmat(g.rot(i)) * local;
}

}  // namespace

DensifyResult densify_and_prune(GaussianSet& g, DensifyStats& stats, const DensifyConfig& cfg, double scene_extent,
                                bool enabled, std::mt19937_64& rng) {
  const std::size_t n = g.size();
  DensifyResult r;
  if (!enabled || stats.grad_sum.size() != n) {
    stats.reset(n);
    return r;
  }
  const double boundary = cfg.percent_dense * scene_extent;
  std::vector<std::size_t> source;
  std::vector<Vec3> shift;
  std::vector<char> shrink;
  std::vector<char> keep(n, 1);
  source.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    source.push_back(i);
    shift.push_back({});
    shrink.push_back(0);
  }
  std::size_t budget = cfg.max_gaussians > n ? cfg.max_gaussians - n : 0;
  for (std::size_t i = 0; i < n && budget > 0; ++i) {
    if (stats.count[i] == 0) continue;
    if (stats.grad_sum[i] / stats.count[i] < cfg.grad_threshold) continue;
    const Vec3 s = g.scale_log(i);
    const double largest = std::exp(std::max({s.x, s.y, s.z}));
    if (largest <= boundary) {
      source.push_back(i);
      shift.push_back(sample_offset(g, i, rng));
      shrink.push_back(0);
      ++r.cloned;
      --budget;
    } else {
      keep[i] = 0;
      for (int c = 0; c < 2; ++c) {
        source.push_back(i);
        shift.push_back(sample_offset(g, i, rng));
        shrink.push_back(1);
      }
      ++r.split;
      --budget;
    }
  }

  std::vector<std::size_t> rows;
  std::vector<std::int64_t> origin;
  for (std::size_t k = 0; k < source.size(); ++k) {
    const std::size_t i = source[k];
    const bool child = k >= n;
    if (!child && !keep[i]) continue;
    if (g.opacity(i) < cfg.opacity_floor) {
      ++r.pruned;
      continue;
    }
    rows.push_back(k);
    origin.push_back(child ? -1 : std::int64_t(i));
  }
  if (rows.empty()) throw NumericalError("densify_and_prune would remove every Gaussian");

  std::vector<std::size_t> gather_rows(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) gather_rows[k] = source[rows[k]];
  GaussianSet out = g.gather(gather_rows);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t row = rows[k];
    if (row < n) continue;
    out.add_pos(k, shift[row]);
    if (shrink[row]) out.set_scale_log(k, out.scale_log(k) - Vec3{1, 1, 1} * std::log(1.6));
  }
  g = std::move(out);
  r.source = std::move(origin);
  stats.reset(g.size());
  return r;
}

}  // namespace glint
