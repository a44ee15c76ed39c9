#include <cmath>

#include "glint/error.hpp"
#include "glint/optim.hpp"

namespace glint {

template <typename T>
void Adam::step(const std::string& group, std::span<T> params, std::span<const T> grads, double lr) {
  if (params.size() != grads.size()) throw ContractError("Adam group '" + group + "' shape mismatch");
  AdamMoments& s = groups_[group];
  if (s.m.size() != params.size()) {
    if (!s.m.empty()) throw ContractError("Adam moments for '" + group + "' do not mirror the parameters");
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  ++s.step;
  const double c1 = 1 - std::pow(cfg_.beta1, double(s.step));
  const double c2 = 1 - std::pow(cfg_.beta2, double(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = cfg_.beta1 * s.m[i] + (1 - cfg_.beta1) * g;
    s.v[i] = cfg_.beta2 * s.v[i] + (1 - cfg_.beta2) * g * g;
    const double mh = s.m[i] / c1, vh = s.v[i] / c2;
    params[i] = static_cast<T>(params[i] - lr * mh / (std::sqrt(vh) + cfg_.epsilon));
  }
}

void Adam::remap(const std::string& group, int width, std::span<const std::int64_t> source) {
  auto it = groups_.find(group);
  if (it == groups_.end()) return;
  AdamMoments& s = it->second;
  std::vector<double> m(source.size() * width, 0.0), v(source.size() * width, 0.0);
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] < 0) continue;
    for (int k = 0; k < width; ++k) {
      m[i * width + k] = s.m[std::size_t(source[i]) * width + k];
      v[i * width + k] = s.v[std::size_t(source[i]) * width + k];
    }
  }
  s.m = std::move(m);
  s.v = std::move(v);
}

double exponential_lr(double lr0, double lr1, double step, double steps) {
  const double t = steps > 0 ? std::clamp(step / steps, 0.0, 1.0) : 1.0;
  return std::exp(std::log(lr0) * (1 - t) + std::log(lr1) * t);
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

template void Adam::step<float>(const std::string&, std::span<float>, std::span<const float>, double);
template void Adam::step<double>(const std::string&, std::span<double>, std::span<const double>, double);
template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);

}  // namespace glint
