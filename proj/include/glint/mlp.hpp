#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace glint {

/// Storage for network parameters and their gradients. Vectorized Eigen
/// kernels peel loops by address, so a fixed base alignment keeps results
/// independent of where the allocator puts the buffer.
template <typename T>
using ParamVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Trunk of `depth` ReLU layers of `width`; the raw input is concatenated to
/// the feature entering layer `skip_layer` (0-based, negative disables). A
/// single linear output layer produces all heads stacked in order.
struct MlpShape {
  int input_dim = 0;
  int width = 256;
  int depth = 8;
  int skip_layer = 4;
  std::vector<int> heads;

  int output_dim() const;
  int layer_count() const { return depth + 1; }
  int layer_input_dim(int layer) const;
  int layer_output_dim(int layer) const;
  std::size_t parameter_count() const;
  bool operator==(const MlpShape&) const = default;
};

/// Fully connected network with exact reverse-mode gradients. Parameters are
/// one flat array: per layer the column-major weight matrix (out x in) then
/// the bias. Batches are columns.
template <typename T>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  struct Cache {
    Matrix input;
    std::vector<Matrix> activations;  // post-ReLU output of every trunk layer
    std::uint64_t version = 0;
    const Mlp* owner = nullptr;
  };

  Mlp() = default;
  explicit Mlp(MlpShape shape);

  const MlpShape& shape() const { return shape_; }

  /// Hidden layers uniform in +-sqrt(6/(fan_in+fan_out)); output layer zero.
  void initialize(std::mt19937_64& rng);

  std::span<const T> parameters() const { return params_; }
  /// Mutable access invalidates outstanding caches.
  std::span<T> mutable_parameters() {
    ++version_;
    return params_;
  }
  std::uint64_t version() const { return version_; }

  /// True when the output layer is entirely zero (the net outputs exact zeros).
  bool output_is_zero() const;

  Matrix forward(const Matrix& input, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients into d_params (same layout as parameters)
  /// and, when d_input is non-null, writes input gradients. Throws
  /// ContractError if the cache does not match the current parameters.
  void backward(const Cache& cache, const Matrix& d_output, std::span<T> d_params,
                Matrix* d_input) const;

  /// Sign pattern of all ReLU pre-activations for the cached batch; equal
  /// patterns mean two evaluations lie on the same linear piece.
  std::vector<bool> activation_pattern(const Cache& cache) const;

 private:
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] +
           static_cast<std::size_t>(shape_.layer_input_dim(layer)) * shape_.layer_output_dim(layer);
  }

  MlpShape shape_;
  ParamVector<T> params_;
  std::vector<std::size_t> offsets_;
  std::uint64_t version_ = 1;
};

extern template class Mlp<float>;
extern template class Mlp<double>;

/// Converts parameters between precisions (shapes must match).
template <typename To, typename From>
void copy_parameters(const Mlp<From>& from, Mlp<To>& to) {
  auto src = from.parameters();
  auto dst = to.mutable_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<To>(src[i]);
}

}  // namespace glint
