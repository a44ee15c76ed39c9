#include "glint/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>

#include "glint/deform.hpp"
#include "glint/encoding.hpp"
#include "glint/environment.hpp"
#include "glint/error.hpp"
#include "glint/gaussian.hpp"
#include "glint/loss.hpp"
#include "glint/normals.hpp"
#include "glint/raster.hpp"
#include "glint/shading.hpp"

namespace glint {

namespace {

using Rng = std::mt19937_64;
using Vector = std::vector<double>;
using Func = std::function<double(const Vector&)>;

double uni(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Vec3 unit(Rng& rng) {
  std::normal_distribution<double> n(0, 1);
  for (;;) {
    const Vec3 v{n(rng), n(rng), n(rng)};
    if (norm(v) > 1e-3) return normalize(v);
  }
}

Quat unit_quat(Rng& rng) {
  std::normal_distribution<double> n(0, 1);
  Quat q{n(rng), n(rng), n(rng), n(rng)};
  return q * (1.0 / norm(q));
}

Vector numeric(const Func& f, Vector x, double h) {
  Vector g(x.size());
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

double rel_error(const Vector& a, const Vector& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-300 ? 0 : std::sqrt(diff) / scale;
}

/// One instance: fills analytic and numeric gradients; false asks for a redraw.
using Instance = std::function<bool(Rng&, Vector& analytic, Vector& numerical)>;

struct Operation {
  std::string name;
  double tolerance;
  std::function<Instance(const GradcheckOptions&)> make;
};

template <typename T>
void randomize_net(Mlp<T>& net, Rng& rng, double spread) {
  std::normal_distribution<double> n(0, spread);
  for (T& p : net.mutable_parameters()) p = T(n(rng));
}

template <typename T>
Instance mlp_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    MlpShape s;
    s.input_dim = 6;
    s.width = 12;
    s.depth = 4;
    s.skip_layer = 2;
    s.heads = {3, 4};
    Mlp<T> net(s);
    randomize_net(net, rng, 0.4);
    using M = typename Mlp<T>::Matrix;
    const int batch = 2;
    M x(6, batch), w(7, batch);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = T(uni(rng, -1, 1));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = T(uni(rng, -1, 1));
    typename Mlp<T>::Cache cache;
    net.forward(x, &cache);
    const auto pattern = net.activation_pattern(cache);
    ParamVector<T> g(net.parameters().size(), T(0));
    M d_in;
    net.backward(cache, w, g, &d_in);

    Vector p0(net.parameters().begin(), net.parameters().end());
    for (Eigen::Index i = 0; i < x.size(); ++i) p0.push_back(double(x.data()[i]));
    const std::size_t np = net.parameters().size();
    bool crossed = false;
    auto f = [&](const Vector& p) {
      Mlp<T> n2 = net;
      auto dst = n2.mutable_parameters();
      for (std::size_t i = 0; i < np; ++i) dst[i] = T(p[i]);
      M xi(6, batch);
      for (Eigen::Index i = 0; i < xi.size(); ++i) xi.data()[i] = T(p[np + i]);
      typename Mlp<T>::Cache c;
      const double v = double((n2.forward(xi, &c).array() * w.array()).sum());
      crossed |= n2.activation_pattern(c) != pattern;
      return v;
    };
    num = numeric(f, p0, std::is_same_v<T, float> ? 1e-2 : 1e-6);
    if (crossed) return false;
    ana.assign(g.begin(), g.end());
    for (Eigen::Index i = 0; i < d_in.size(); ++i) ana.push_back(double(d_in.data()[i]));
    return true;
  };
}

Instance encoding_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    const int lv = 4, lt = 3;
    const int dim = encoded_dim(lv, 3) + encoded_dim(lt, 1);
    const Vec3 v{uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1)};
    const double t = uni(rng, 0, 1);
    Vector w(dim);
    for (double& x : w) x = uni(rng, -1, 1);
    auto f = [&](const Vector& p) {
      Vector out(dim);
      encode_vector_time({p[0], p[1], p[2]}, t, lv, lt, out);
      double s = 0;
      for (int i = 0; i < dim; ++i) s += out[i] * w[i];
      return s;
    };
    num = numeric(f, {v.x, v.y, v.z}, 1e-6);
    Vec3 d;
    encode_vector_time_backward(v, lv, std::span<const double>(w).first(encoded_dim(lv, 3)), d);
    ana = {d.x, d.y, d.z};
    return true;
  };
}

template <typename T>
Instance reflection_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    EncodingConfig enc;
    enc.direction_frequencies = 2;
    enc.time_frequencies = 2;
    NetworkConfig nc;
    nc.width = 12;
    nc.depth = 3;
    nc.skip_layer = 1;
    Mlp<T> net(reflection_net_shape(enc, nc));
    randomize_net(net, rng, 0.3);
    const int m = 3;
    const double t = uni(rng, 0, 1);
    std::vector<Vec3> dirs(m), w(m);
    for (int i = 0; i < m; ++i) {
      dirs[i] = unit(rng);
      w[i] = unit(rng);
    }
    typename Mlp<T>::Cache cache;
    const auto r = reflection_residuals(net, enc, std::span<const Vec3>(dirs), t, &cache);
    const auto pattern = net.activation_pattern(cache);
    for (const Vec3& x : r)
      if (norm(x) < 1e-3) return false;
    bool crossed = false;
    auto f = [&](const Vector& p) {
      std::vector<Vec3> d(m);
      for (int i = 0; i < m; ++i) d[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
      typename Mlp<T>::Cache c;
      const auto rr = reflection_residuals(net, enc, std::span<const Vec3>(d), t, &c);
      crossed |= net.activation_pattern(c) != pattern;
      double s = 0;
      for (int i = 0; i < m; ++i) s += dot(apply_reflection_residual(d[i], rr[i]), w[i]);
      return s;
    };
    Vector p0;
    for (const Vec3& d : dirs) p0.insert(p0.end(), {d.x, d.y, d.z});
    num = numeric(f, p0, std::is_same_v<T, float> ? 1e-2 : 1e-6);
    if (crossed) return false;
    std::vector<Vec3> d_dir(m), d_res(m);
    for (int i = 0; i < m; ++i) apply_reflection_residual_backward(dirs[i], r[i], w[i], d_dir[i], d_res[i]);
    ParamVector<T> dp(net.parameters().size(), T(0));
    reflection_residuals_backward(net, enc, cache, std::span<const Vec3>(dirs), std::span<const Vec3>(d_res),
                                  std::span<T>(dp), std::span<Vec3>(d_dir));
    ana.clear();
    for (const Vec3& d : d_dir) ana.insert(ana.end(), {d.x, d.y, d.z});
    return true;
  };
}

Instance covariance_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    const Vec3 ls{uni(rng, -2, 0.5), uni(rng, -2, 0.5), uni(rng, -2, 0.5)};
    const Quat q = unit_quat(rng) * uni(rng, 0.7, 1.3);
    Mat3 w;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) w(i, j) = uni(rng, -1, 1);
    auto f = [&](const Vector& p) {
      const Mat3 s = build_covariance({p[0], p[1], p[2]}, {p[3], p[4], p[5], p[6]});
      double v = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v += s(i, j) * w(i, j);
      return v;
    };
    num = numeric(f, {ls.x, ls.y, ls.z, q.w, q.x, q.y, q.z}, 1e-6);
    Vec3 dls;
    Quat dq{0, 0, 0, 0};
    build_covariance_backward(ls, q, w, dls, dq);
    ana = {dls.x, dls.y, dls.z, dq.w, dq.x, dq.y, dq.z};
    return true;
  };
}

Instance projection_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    const Camera cam = look_at(unit(rng) * 4, {0, 0, 0}, {0, -1, 0}, 0.8, 32, 24, 0);
    const Vec3 pos{uni(rng, -0.5, 0.5), uni(rng, -0.5, 0.5), uni(rng, -0.5, 0.5)};
    const Vec3 ls{uni(rng, -2.5, -1), uni(rng, -2.5, -1), uni(rng, -2.5, -1)};
    const Quat q = unit_quat(rng) * uni(rng, 0.7, 1.3);
    const ProjectionAdjoint w{{uni(rng, -1, 1), uni(rng, -1, 1)},
                              {uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1)},
                              uni(rng, -1, 1)};
    // Through the covariance parameterization: the adjoint is taken on symmetric Sigma.
    auto f = [&](const Vector& p) {
      const Mat3 s = build_covariance({p[3], p[4], p[5]}, {p[6], p[7], p[8], p[9]});
      const ProjectedGaussian g = project_covariance(s, cam, {p[0], p[1], p[2]});
      return g.mean.x * w.mean.x + g.mean.y * w.mean.y + g.conic.xx * w.conic.xx + g.conic.xy * w.conic.xy +
             g.conic.yy * w.conic.yy + g.depth * w.depth;
    };
    num = numeric(f, {pos.x, pos.y, pos.z, ls.x, ls.y, ls.z, q.w, q.x, q.y, q.z}, 1e-6);
    const Mat3 sigma = build_covariance(ls, q);
    const ProjectedGaussian g = project_covariance(sigma, cam, pos);
    if (g.culled) return false;
    Vec3 dp, dls;
    Mat3 ds;
    Quat dq{0, 0, 0, 0};
    project_covariance_backward(sigma, cam, g, w, dp, ds);
    build_covariance_backward(ls, q, ds, dls, dq);
    ana = {dp.x, dp.y, dp.z, dls.x, dls.y, dls.z, dq.w, dq.x, dq.y, dq.z};
    return true;
  };
}

Vector pack_normal(const NormalInputs& v) {
  return {v.log_scale.x, v.log_scale.y, v.log_scale.z, v.rotation.w, v.rotation.x, v.rotation.y,
          v.rotation.z, v.deformed_log_scale.x, v.deformed_log_scale.y, v.deformed_log_scale.z,
          v.deformed_rotation.w, v.deformed_rotation.x, v.deformed_rotation.y, v.deformed_rotation.z,
          v.residual.x, v.residual.y, v.residual.z};
}

Instance normal_chain_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    auto log_scale = [&] {
      // Distinct extents keep the axis choice stable.
      return Vec3{uni(rng, -3, 0), uni(rng, -3, 0), uni(rng, -3, 0)};
    };
    NormalInputs in;
    in.log_scale = log_scale();
    in.rotation = unit_quat(rng) * uni(rng, 0.7, 1.3);
    in.deformed_log_scale = log_scale();
    in.deformed_rotation = unit_quat(rng) * uni(rng, 0.7, 1.3);
    in.residual = unit(rng) * uni(rng, 0, 0.5);
    in.view_dir = unit(rng);
    const Vec3 w = unit(rng);
    const NormalFrame f0 = physical_normal(in);
    bool same = true;
    auto f = [&](const Vector& p) {
      NormalInputs v = in;
      v.log_scale = {p[0], p[1], p[2]};
      v.rotation = {p[3], p[4], p[5], p[6]};
      v.deformed_log_scale = {p[7], p[8], p[9]};
      v.deformed_rotation = {p[10], p[11], p[12], p[13]};
      v.residual = {p[14], p[15], p[16]};
      const NormalFrame fr = physical_normal(v);
      same &= fr.sign_short == f0.sign_short && fr.sign_long == f0.sign_long && fr.orientation == f0.orientation &&
              fr.collapsed == f0.collapsed && fr.canonical.shortest_index == f0.canonical.shortest_index &&
              fr.canonical.longest_index == f0.canonical.longest_index &&
              fr.deformed.shortest_index == f0.deformed.shortest_index &&
              fr.deformed.longest_index == f0.deformed.longest_index &&
              (fr.beta_t > kOblatenessEpsilon) == (f0.beta_t > kOblatenessEpsilon);
      return dot(fr.normal, w);
    };
    num = numeric(f, pack_normal(in), 1e-6);
    if (!same) return false;
    NormalGradients g;
    physical_normal_backward(in, f0, NormalMode::Physical, w, g);
    NormalInputs gi;
    gi.log_scale = g.log_scale;
    gi.rotation = g.rotation;
    gi.deformed_log_scale = g.deformed_log_scale;
    gi.deformed_rotation = g.deformed_rotation;
    gi.residual = g.residual;
    ana = pack_normal(gi);
    return true;
  };
}

std::vector<std::size_t> distinct_indices(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> all(n), out;
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

void randomize_env(EnvironmentMap& env, Rng& rng) {
  for (double& r : env.mutable_raw()) r = uni(rng, -1.5, 1.5);
}

std::vector<long> query_signature(const EnvironmentMap& env, const Vec3& dir, double rough) {
  std::vector<long> s;
  for (int m = 0; m <= env.mip_levels(); ++m) {
    if (env.level_resolution(m) < 1) break;
    const CubeCoord c = cube_coord(dir, env.level_resolution(m));
    s.insert(s.end(), {c.face, long(std::floor(c.col)), long(std::floor(c.row))});
  }
  s.push_back(long(std::floor(rough * env.mip_levels())));
  return s;
}

Instance shading_instance() {
  auto env = std::make_shared<EnvironmentMap>(8, 3);
  auto lut = std::make_shared<EnvBrdfLut>();
  return [env, lut](Rng& rng, Vector& ana, Vector& num) {
    randomize_env(*env, rng);
    SpecularInputs in;
    in.sh_dc = {uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1)};
    in.tint = {uni(rng, 0, 1), uni(rng, 0, 1), uni(rng, 0, 1)};
    in.roughness = uni(rng, 0.05, 0.95);
    in.normal = unit(rng);
    in.view_dir = unit(rng);
    if (dot(in.normal, in.view_dir) < 0.1) return false;
    const Vec3 residual = unit(rng) * 0.2;
    const Vec3 w = unit(rng);
    const SpecularRecord rec = shade_with_residual(in, residual, *env, *lut);
    auto signature = [&](const SpecularRecord& r, double rough) {
      auto s = query_signature(*env, r.query_dir, rough);
      s.push_back(long(std::floor(r.cos_nv * (EnvBrdfLut::kSize - 1))));
      s.push_back(long(std::floor(rough * (EnvBrdfLut::kSize - 1))));
      for (int k = 0; k < 3; ++k) s.push_back(r.diffuse[k] > 0);
      for (int k = 0; k < 3; ++k) s.push_back(r.specular[k] > 0);
      return s;
    };
    const auto sig = signature(rec, in.roughness);
    bool same = true;
    auto f = [&](const Vector& p) {
      SpecularInputs s;
      s.sh_dc = {p[0], p[1], p[2]};
      s.tint = {p[3], p[4], p[5]};
      s.roughness = p[6];
      s.normal = {p[7], p[8], p[9]};
      s.view_dir = {p[10], p[11], p[12]};
      const SpecularRecord out = shade_with_residual(s, {p[13], p[14], p[15]}, *env, *lut);
      same &= signature(out, s.roughness) == sig;
      return dot(out.color, w);
    };
    num = numeric(f,
                  {in.sh_dc.x, in.sh_dc.y, in.sh_dc.z, in.tint.x, in.tint.y, in.tint.z, in.roughness, in.normal.x,
                   in.normal.y, in.normal.z, in.view_dir.x, in.view_dir.y, in.view_dir.z, residual.x, residual.y,
                   residual.z},
                  1e-6);
    if (!same) return false;
    EnvironmentGradient eg = env->make_gradient();
    SpecularGradients g;
    shade_backward(in, residual, rec, *env, w, eg, g);
    ana = {g.sh_dc.x, g.sh_dc.y, g.sh_dc.z, g.tint.x, g.tint.y, g.tint.z, g.roughness, g.normal.x,
           g.normal.y, g.normal.z, g.view_dir.x, g.view_dir.y, g.view_dir.z, g.residual.x, g.residual.y,
           g.residual.z};
    return true;
  };
}

Instance env_query_instance() {
  auto env = std::make_shared<EnvironmentMap>(8, 3);
  return [env](Rng& rng, Vector& ana, Vector& num) {
    randomize_env(*env, rng);
    const Vec3 dir = unit(rng) * uni(rng, 0.5, 2);
    const double rough = uni(rng, 0.02, 0.98);
    const Vec3 w = unit(rng);
    const auto sig = query_signature(*env, dir, rough);
    bool same = true;
    auto f = [&](const Vector& p) {
      const Vec3 d{p[0], p[1], p[2]};
      same &= query_signature(*env, d, p[3]) == sig;
      return dot(env->query(d, p[3]), w);
    };
    num = numeric(f, {dir.x, dir.y, dir.z, rough}, 1e-7);
    if (!same) return false;

    // Texel adjoints through the prefilter chain, on a random subset of texels.
    EnvironmentGradient g = env->make_gradient();
    Vec3 dd;
    double dr = 0;
    env->query_backward(dir, rough, w, g, dd, dr);
    std::vector<double> d_raw(env->raw().size(), 0.0);
    env->levels_backward(g, d_raw);
    ana = {dd.x, dd.y, dd.z, dr};
    const auto pick = distinct_indices(rng, d_raw.size(), 24);
    const Vector raw0 = env->raw();
    auto fr = [&](const Vector& p) {
      auto& raw = env->mutable_raw();
      for (std::size_t k = 0; k < pick.size(); ++k) raw[pick[k]] = p[k];
      return dot(env->query(dir, rough), w);
    };
    Vector p0;
    for (std::size_t i : pick) p0.push_back(raw0[i]);
    const Vector nr = numeric(fr, p0, 1e-6);
    env->mutable_raw() = raw0;
    num.insert(num.end(), nr.begin(), nr.end());
    for (std::size_t i : pick) ana.push_back(d_raw[i]);
    return true;
  };
}

Instance prefilter_instance() {
  auto env = std::make_shared<EnvironmentMap>(8, 3);
  return [env](Rng& rng, Vector& ana, Vector& num) {
    randomize_env(*env, rng);
    EnvironmentGradient g = env->make_gradient();
    for (auto& level : g.levels)
      for (double& v : level) v = uni(rng, -1, 1);
    std::vector<double> d_raw(env->raw().size(), 0.0);
    env->levels_backward(g, d_raw);
    const auto pick = distinct_indices(rng, d_raw.size(), 32);
    const Vector raw0 = env->raw();
    auto f = [&](const Vector& p) {
      auto& raw = env->mutable_raw();
      for (std::size_t k = 0; k < pick.size(); ++k) raw[pick[k]] = p[k];
      double s = 0;
      for (int m = 0; m < int(g.levels.size()); ++m) {
        const CubeImage& img = env->level(m);
        for (std::size_t i = 0; i < img.data.size(); ++i) s += img.data[i] * g.levels[m][i];
      }
      return s;
    };
    Vector p0;
    for (std::size_t i : pick) p0.push_back(raw0[i]);
    num = numeric(f, p0, 1e-6);
    env->mutable_raw() = raw0;
    ana.clear();
    for (std::size_t i : pick) ana.push_back(d_raw[i]);
    return true;
  };
}

std::vector<Splat2D> random_splats(Rng& rng, int count, int w, int h) {
  std::vector<Splat2D> out;
  for (int i = 0; i < count; ++i) {
    const double l1 = uni(rng, 0.5, 9), l2 = uni(rng, 0.5, 9), th = uni(rng, 0, kPi);
    const double c = std::cos(th), s = std::sin(th);
    ProjectedGaussian p;
    p.culled = false;
    p.cov = {c * c * l1 + s * s * l2, c * s * (l1 - l2), s * s * l1 + c * c * l2};
    const double det = p.cov.det();
    p.conic = {p.cov.yy / det, -p.cov.xy / det, p.cov.xx / det};
    p.mean = {uni(rng, -2, w + 1), uni(rng, -2, h + 1)};
    p.depth = uni(rng, 1, 5);
    out.push_back(make_splat(p, uni(rng, 0.05, 0.95), {uni(rng, 0, 1), uni(rng, 0, 1), uni(rng, 0, 1)}, unit(rng),
                             std::uint32_t(i)));
  }
  return out;
}

/// Per pixel: which splats contribute, clipped or not, in order.
std::vector<long> composite_signature(const std::vector<Splat2D>& splats, int w, int h) {
  std::vector<std::uint32_t> order(splats.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return splats[a].depth != splats[b].depth ? splats[a].depth < splats[b].depth : splats[a].index < splats[b].index;
  });
  std::vector<long> sig;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double T = 1;
      for (std::uint32_t i : order) {
        if (T < kMinTransmittance) break;
        const Splat2D& s = splats[i];
        const double dx = x - s.mean.x, dy = y - s.mean.y;
        const double power = 0.5 * (s.conic.xx * dx * dx + s.conic.yy * dy * dy) + s.conic.xy * dx * dy;
        if (power < 0 || power > kCutoffPower) continue;
        const double raw = s.opacity * std::exp(-power);
        const double a = std::min(kMaxAlpha, raw);
        if (a < kMinAlpha) continue;
        sig.push_back(long(i) * 2 + (raw >= kMaxAlpha));
        T *= 1 - a;
      }
      sig.push_back(-1);
    }
  return sig;
}

Instance composite_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    const int w = 20, h = 18;
    const auto base = random_splats(rng, 1 + int(rng() % 8), w, h);
    PixelAdjoints adj;
    adj.color = Image(w, h, 3);
    adj.depth = Image(w, h, 1);
    adj.normal = Image(w, h, 3);
    adj.alpha = Image(w, h, 1);
    for (auto* img : {&adj.color, &adj.depth, &adj.normal, &adj.alpha})
      for (double& v : img->data) v = uni(rng, -1, 1);
    const Vec3 bg{0.3, 0.1, 0.7};
    const auto sig = composite_signature(base, w, h);
    bool same = true;
    auto unpack = [&](const Vector& p) {
      std::vector<Splat2D> s = base;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double* q = &p[13 * i];
        s[i].mean = {q[0], q[1]};
        s[i].conic = {q[2], q[3], q[4]};
        s[i].opacity = q[5];
        s[i].color = {q[6], q[7], q[8]};
        s[i].depth = q[9];
        s[i].normal = {q[10], q[11], q[12]};
      }
      return s;
    };
    auto f = [&](const Vector& p) {
      const auto s = unpack(p);
      same &= composite_signature(s, w, h) == sig;
      const RenderBuffers r = composite_forward(s, bin_and_sort(s, w, h), bg);
      double l = 0;
      for (std::size_t i = 0; i < r.color.data.size(); ++i) l += r.color.data[i] * adj.color.data[i];
      for (std::size_t i = 0; i < r.depth.data.size(); ++i) l += r.depth.data[i] * adj.depth.data[i];
      for (std::size_t i = 0; i < r.normal.data.size(); ++i) l += r.normal.data[i] * adj.normal.data[i];
      for (std::size_t i = 0; i < r.alpha.data.size(); ++i) l += r.alpha.data[i] * adj.alpha.data[i];
      return l;
    };
    Vector p0;
    for (const auto& sp : base)
      p0.insert(p0.end(), {sp.mean.x, sp.mean.y, sp.conic.xx, sp.conic.xy, sp.conic.yy, sp.opacity, sp.color.x,
                           sp.color.y, sp.color.z, sp.depth, sp.normal.x, sp.normal.y, sp.normal.z});
    num = numeric(f, p0, 1e-5);
    if (!same) return false;
    const TileBins bins = bin_and_sort(base, w, h);
    const RenderBuffers r = composite_forward(base, bins, bg);
    const auto g = composite_backward(base, bins, r, adj);
    ana.clear();
    for (const auto& d : g)
      ana.insert(ana.end(), {d.mean.x, d.mean.y, d.conic.xx, d.conic.xy, d.conic.yy, d.opacity, d.color.x,
                             d.color.y, d.color.z, d.depth, d.normal.x, d.normal.y, d.normal.z});
    return true;
  };
}

Image random_image(Rng& rng, int w, int h, int c, double lo, double hi) {
  Image img(w, h, c);
  for (double& v : img.data) v = uni(rng, lo, hi);
  return img;
}

Instance photometric_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    const Image gt = random_image(rng, 8, 8, 3, 0, 1);
    Image r = random_image(rng, 8, 8, 3, 0, 1);
    for (std::size_t i = 0; i < r.data.size(); ++i)
      if (std::abs(r.data[i] - gt.data[i]) < 1e-4) return false;
    auto f = [&](const Vector& p) {
      Image x = r;
      x.data = p;
      return photometric_loss(x, gt).value;
    };
    num = numeric(f, r.data, 1e-6);
    ana = photometric_loss(r, gt).adjoint.data;
    return true;
  };
}

Instance normal_loss_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    const int w = 6, h = 5;
    Image n(w, h, 3), t(w, h, 3);
    std::vector<std::uint8_t> valid(w * h);
    for (int p = 0; p < w * h; ++p) {
      const Vec3 a = unit(rng), b = unit(rng);
      for (int k = 0; k < 3; ++k) {
        n.data[3 * p + k] = a[k];
        t.data[3 * p + k] = b[k];
      }
      valid[p] = rng() % 4 != 0;
    }
    auto f = [&](const Vector& p) {
      Image x = n;
      x.data = p;
      return normal_loss(x, t, valid).value;
    };
    num = numeric(f, n.data, 1e-6);
    ana = normal_loss(n, t, valid).adjoint.data;
    return true;
  };
}

Instance reg_loss_instance() {
  return [](Rng& rng, Vector& ana, Vector& num) {
    const int m = 1 + int(rng() % 10);
    std::vector<Vec3> r(m);
    std::vector<double> wt(m);
    for (int i = 0; i < m; ++i) {
      r[i] = unit(rng) * uni(rng, 0, 0.5);
      wt[i] = gamma_weight(uni(rng, 0.01, 1), 1, 5);
    }
    auto f = [&](const Vector& p) {
      std::vector<Vec3> x(m);
      for (int i = 0; i < m; ++i) x[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
      return reg_loss(x, wt).value;
    };
    Vector p0;
    for (const Vec3& v : r) p0.insert(p0.end(), {v.x, v.y, v.z});
    num = numeric(f, p0, 1e-6);
    const RegLoss g = reg_loss(r, wt);
    ana.clear();
    for (const Vec3& v : g.d_residual) ana.insert(ana.end(), {v.x, v.y, v.z});
    return true;
  };
}

const std::vector<Operation>& operations() {
  static const std::vector<Operation> ops = {
      {"mlp", 1e-5,
       [](const GradcheckOptions& o) { return o.float_networks ? mlp_instance<float>() : mlp_instance<double>(); }},
      {"encoding", 1e-5, [](const GradcheckOptions&) { return encoding_instance(); }},
      {"reflection_residual", 1e-5,
       [](const GradcheckOptions& o) {
         return o.float_networks ? reflection_instance<float>() : reflection_instance<double>();
       }},
      {"covariance", 1e-5, [](const GradcheckOptions&) { return covariance_instance(); }},
      {"normal_chain", 1e-5, [](const GradcheckOptions&) { return normal_chain_instance(); }},
      {"shading", 1e-5, [](const GradcheckOptions&) { return shading_instance(); }},
      {"photometric_loss", 1e-5, [](const GradcheckOptions&) { return photometric_instance(); }},
      {"normal_loss", 1e-5, [](const GradcheckOptions&) { return normal_loss_instance(); }},
      {"reg_loss", 1e-5, [](const GradcheckOptions&) { return reg_loss_instance(); }},
      {"projection", 1e-4, [](const GradcheckOptions&) { return projection_instance(); }},
      {"composite", 1e-4, [](const GradcheckOptions&) { return composite_instance(); }},
      {"env_query", 1e-4, [](const GradcheckOptions&) { return env_query_instance(); }},
      {"prefilter", 1e-4, [](const GradcheckOptions&) { return prefilter_instance(); }},
  };
  return ops;
}

}  // namespace

std::vector<std::string> gradcheck_operations() {
  std::vector<std::string> names;
  for (const auto& op : operations()) names.push_back(op.name);
  return names;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opt) {
  if (opt.instances < 1) throw UsageError("gradcheck needs at least one instance");
  const auto names = gradcheck_operations();
  for (const std::string* n : {&opt.only, &opt.inject_fault})
    if (!n->empty() && std::find(names.begin(), names.end(), *n) == names.end())
      throw UsageError("unknown gradcheck operation " + *n);

  std::vector<GradcheckResult> results;
  std::uint64_t salt = 0;
  for (const Operation& op : operations()) {
    ++salt;
    if (!opt.only.empty() && op.name != opt.only) continue;
    const auto start = std::chrono::steady_clock::now();
    GradcheckResult r;
    r.name = op.name;
    r.tolerance = opt.float_networks && (op.name == "mlp" || op.name == "reflection_residual") ? 2e-2 : op.tolerance;
    Rng rng(opt.seed * 1000003 + salt);
    Instance inst = op.make(opt);
    const int max_trials = 50 * opt.instances;
    for (int trial = 0; r.instances < opt.instances && trial < max_trials; ++trial) {
      Vector ana, num;
      if (!inst(rng, ana, num)) continue;
      if (op.name == opt.inject_fault && !ana.empty()) {
        double scale = 0;
        for (double v : ana) scale = std::max(scale, std::abs(v));
        ana[0] += 0.05 * scale + 1e-3;
      }
      r.max_error = std::max(r.max_error, rel_error(ana, num));
      ++r.instances;
    }
    r.passed = r.instances == opt.instances && r.max_error <= r.tolerance;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(r);
  }
  return results;
}

}  // namespace glint
