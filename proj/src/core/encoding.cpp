#include "glint/encoding.hpp"

#include <cmath>

#include "glint/error.hpp"
#include "glint/math.hpp"

namespace glint {

void positional_encoding(std::span<const double> v, int frequencies, std::span<double> out) {
  if (frequencies < 1) throw DomainError("positional encoding needs at least one frequency");
  const std::size_t n = v.size();
  if (out.size() != n * 2 * static_cast<std::size_t>(frequencies))
    throw ContractError("positional encoding output has the wrong length");
  double scale = kPi;
  for (int k = 0; k < frequencies; ++k, scale *= 2.0) {
    double* block = out.data() + 2 * n * static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < n; ++i) {
      block[i] = std::sin(scale * v[i]);
      block[n + i] = std::cos(scale * v[i]);
    }
  }
}

std::vector<double> positional_encoding(std::span<const double> v, int frequencies) {
  std::vector<double> out(v.size() * 2 * static_cast<std::size_t>(std::max(frequencies, 0)));
  positional_encoding(v, frequencies, out);
  return out;
}

void positional_encoding_backward(std::span<const double> v, int frequencies,
                                  std::span<const double> d_out, std::span<double> d_v) {
  const std::size_t n = v.size();
  double scale = kPi;
  for (int k = 0; k < frequencies; ++k, scale *= 2.0) {
    const double* block = d_out.data() + 2 * n * static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < n; ++i) {
      d_v[i] += scale * (std::cos(scale * v[i]) * block[i] - std::sin(scale * v[i]) * block[n + i]);
    }
  }
}

}  // namespace glint
