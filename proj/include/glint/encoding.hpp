#pragma once

#include <span>
#include <vector>

namespace glint {

/// Frequency encoding without the raw input: for k = 0..L-1 the block
/// [sin(2^k pi v_0..n), cos(2^k pi v_0..n)]. Output length dim(v) * 2L.
std::vector<double> positional_encoding(std::span<const double> v, int frequencies);

/// Writes the encoding into `out` (length dim(v) * 2L).
void positional_encoding(std::span<const double> v, int frequencies, std::span<double> out);

/// Accumulates dL/dv given dL/d(encoding).
void positional_encoding_backward(std::span<const double> v, int frequencies,
                                  std::span<const double> d_out, std::span<double> d_v);

}  // namespace glint
