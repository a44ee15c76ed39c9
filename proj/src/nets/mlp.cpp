#include "glint/mlp.hpp"

#include <cmath>

#include "glint/error.hpp"

namespace glint {

int MlpShape::output_dim() const {
  int n = 0;
  for (int h : heads) n += h;
  return n;
}

int MlpShape::layer_input_dim(int layer) const {
  if (layer == 0) return input_dim;
  return (layer == skip_layer && layer < depth) ? width + input_dim : width;
}

int MlpShape::layer_output_dim(int layer) const { return layer == depth ? output_dim() : width; }

std::size_t MlpShape::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l)
    n += static_cast<std::size_t>(layer_input_dim(l) + 1) * layer_output_dim(l);
  return n;
}

template <typename T>
Mlp<T>::Mlp(MlpShape shape) : shape_(std::move(shape)) {
  if (shape_.input_dim <= 0 || shape_.width <= 0 || shape_.depth < 0 || shape_.output_dim() <= 0)
    throw ConfigError("invalid MLP shape");
  std::size_t off = 0;
  for (int l = 0; l < shape_.layer_count(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(shape_.layer_input_dim(l) + 1) * shape_.layer_output_dim(l);
  }
  params_.assign(off, T(0));
}

template <typename T>
void Mlp<T>::initialize(std::mt19937_64& rng) {
  ++version_;
  std::fill(params_.begin(), params_.end(), T(0));
  for (int l = 0; l < shape_.depth; ++l) {
    const int in = shape_.layer_input_dim(l), out = shape_.layer_output_dim(l);
    const double bound = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    T* w = params_.data() + weight_offset(l);
    for (std::size_t i = 0; i < static_cast<std::size_t>(in) * out; ++i) w[i] = static_cast<T>(dist(rng));
  }
}

template <typename T>
bool Mlp<T>::output_is_zero() const {
  const int l = shape_.depth;
  const std::size_t begin = weight_offset(l);
  const std::size_t end = bias_offset(l) + shape_.layer_output_dim(l);
  for (std::size_t i = begin; i < end; ++i)
    if (params_[i] != T(0)) return false;
  return true;
}

template <typename T>
typename Mlp<T>::Matrix Mlp<T>::forward(const Matrix& input, Cache* cache) const {
  using Map = Eigen::Map<const Matrix>;
  using Vec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
  if (input.rows() != shape_.input_dim) throw ContractError("MLP input has the wrong dimension");
  const Eigen::Index batch = input.cols();
  std::vector<Matrix> local;
  std::vector<Matrix>& acts = cache ? cache->activations : local;
  acts.assign(shape_.depth, Matrix());

  const Matrix* h = &input;
  for (int l = 0; l < shape_.depth; ++l) {
    const int in = shape_.layer_input_dim(l), out = shape_.layer_output_dim(l);
    const Map w(params_.data() + weight_offset(l), out, in);
    const Vec b(params_.data() + bias_offset(l), out);
    Matrix& z = acts[l];
    if (l > 0 && l == shape_.skip_layer) {
      z.noalias() = w.leftCols(shape_.input_dim) * input;
      z.noalias() += w.rightCols(shape_.width) * (*h);
    } else {
      z.noalias() = w * (*h);
    }
    z.colwise() += b;
    z = z.cwiseMax(T(0));
    h = &z;
  }
  const int l = shape_.depth;
  const Map w(params_.data() + weight_offset(l), shape_.output_dim(), shape_.layer_input_dim(l));
  const Vec b(params_.data() + bias_offset(l), shape_.output_dim());
  Matrix y(shape_.output_dim(), batch);
  y.noalias() = w * (*h);
  y.colwise() += b;
  if (cache) {
    cache->input = input;
    cache->version = version_;
    cache->owner = this;
  }
  return y;
}

template <typename T>
void Mlp<T>::backward(const Cache& cache, const Matrix& d_output, std::span<T> d_params,
                      Matrix* d_input) const {
  using CMap = Eigen::Map<const Matrix>;
  using MMap = Eigen::Map<Matrix>;
  using MVec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
  if (cache.owner != this || cache.version != version_ ||
      static_cast<int>(cache.activations.size()) != shape_.depth)
    throw ContractError("MLP backward called with a stale forward cache");
  if (d_params.size() != params_.size()) throw ContractError("MLP gradient buffer has the wrong size");
  if (d_output.rows() != shape_.output_dim() || d_output.cols() != cache.input.cols())
    throw ContractError("MLP output adjoint has the wrong shape");

  if (d_input) d_input->setZero(shape_.input_dim, cache.input.cols());

  const Matrix& last = shape_.depth > 0 ? cache.activations.back() : cache.input;
  {
    const int l = shape_.depth;
    const int in = shape_.layer_input_dim(l), out = shape_.output_dim();
    MMap dw(d_params.data() + weight_offset(l), out, in);
    MVec db(d_params.data() + bias_offset(l), out);
    dw.noalias() += d_output * last.transpose();
    db += d_output.rowwise().sum();
  }
  if (shape_.depth == 0) {
    if (d_input) {
      const CMap w(params_.data() + weight_offset(0), shape_.output_dim(), shape_.input_dim);
      d_input->noalias() += w.transpose() * d_output;
    }
    return;
  }
  Matrix dh;
  {
    const int l = shape_.depth;
    const CMap w(params_.data() + weight_offset(l), shape_.output_dim(), shape_.layer_input_dim(l));
    dh.noalias() = w.transpose() * d_output;
  }
  for (int l = shape_.depth - 1; l >= 0; --l) {
    const int in = shape_.layer_input_dim(l), out = shape_.layer_output_dim(l);
    const Matrix& a = cache.activations[l];
    Matrix dz = (a.array() > T(0)).select(dh, T(0));
    const CMap w(params_.data() + weight_offset(l), out, in);
    MMap dw(d_params.data() + weight_offset(l), out, in);
    MVec db(d_params.data() + bias_offset(l), out);
    db += dz.rowwise().sum();
    if (l == 0) {
      dw.noalias() += dz * cache.input.transpose();
      if (d_input) d_input->noalias() += w.transpose() * dz;
    } else if (l == shape_.skip_layer) {
      const Matrix& prev = cache.activations[l - 1];
      dw.leftCols(shape_.input_dim).noalias() += dz * cache.input.transpose();
      dw.rightCols(shape_.width).noalias() += dz * prev.transpose();
      if (d_input) d_input->noalias() += w.leftCols(shape_.input_dim).transpose() * dz;
      dh.noalias() = w.rightCols(shape_.width).transpose() * dz;
    } else {
      dw.noalias() += dz * cache.activations[l - 1].transpose();
      dh.noalias() = w.transpose() * dz;
    }
  }
}

template <typename T>
std::vector<bool> Mlp<T>::activation_pattern(const Cache& cache) const {
  std::vector<bool> pattern;
  for (const Matrix& a : cache.activations)
    for (Eigen::Index i = 0; i < a.size(); ++i) pattern.push_back(a.data()[i] > T(0));
  return pattern;
}

template class Mlp<float>;
template class Mlp<double>;

}  // namespace glint
