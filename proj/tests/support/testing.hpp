#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "glint/math.hpp"

namespace glint::testing {

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  for (;;) {
    const Vec3 v{n(rng), n(rng), n(rng)};
    if (norm(v) > 1e-3) return normalize(v);
  }
}

inline Quat random_unit_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Quat q{n(rng), n(rng), n(rng), n(rng)};
  return q * (1.0 / norm(q));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Central differences of a scalar function of a flat parameter vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x);
    x[i] = keep - h;
    const double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-300 ? 0 : std::sqrt(diff) / scale;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("glint_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace glint::testing
