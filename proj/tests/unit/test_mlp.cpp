#include <cmath>

#include "doctest.h"
#include "glint/error.hpp"
#include "glint/mlp.hpp"
#include "support/testing.hpp"

using namespace glint;

namespace {

// Layer-by-layer evaluation on plain vectors from the documented layout.
std::vector<double> dense_forward(const MlpShape& s, std::span<const double> p, std::vector<double> x) {
  const std::vector<double> input = x;
  std::size_t off = 0;
  std::vector<double> h = x;
  for (int l = 0; l <= s.depth; ++l) {
    std::vector<double> in = h;
    if (l > 0 && l == s.skip_layer) {
      in = input;
      in.insert(in.end(), h.begin(), h.end());
    }
    const int ni = static_cast<int>(in.size());
    const int no = l == s.depth ? s.output_dim() : s.width;
    std::vector<double> out(no);
    for (int r = 0; r < no; ++r) {
      double acc = p[off + static_cast<std::size_t>(ni) * no + r];
      for (int c = 0; c < ni; ++c) acc += p[off + static_cast<std::size_t>(c) * no + r] * in[c];
      out[r] = l == s.depth ? acc : std::max(acc, 0.0);
    }
    off += static_cast<std::size_t>(ni + 1) * no;
    h = out;
  }
  CHECK(off == p.size());
  return h;
}

MlpShape small_shape() {
  MlpShape s;
  s.input_dim = 5;
  s.width = 8;
  s.depth = 4;
  s.skip_layer = 2;
  s.heads = {3, 4};
  return s;
}

void randomize(Mlp<double>& net, std::mt19937_64& rng) {
  for (double& w : net.mutable_parameters()) w = testing::uniform(rng, -0.6, 0.6);
}

}  // namespace

TEST_CASE("parameter count follows the layer chain") {
  MlpShape s;
  s.input_dim = 76;
  s.heads = {3, 4, 3};
  // 4 plain hidden layers, skip layer, 3 more hidden, output
  const std::size_t expect = (76 + 1) * 256 + 3 * (257 * 256) + (256 + 76 + 1) * 256 +
                             3 * (257 * 256) + 257 * 10;
  CHECK(s.parameter_count() == expect);
  CHECK(Mlp<float>(s).parameters().size() == expect);
}

TEST_CASE("zero network outputs zeros") {
  Mlp<double> net(small_shape());
  Mlp<double>::Matrix x = Mlp<double>::Matrix::Random(5, 3);
  CHECK(net.forward(x).isZero(0));
  CHECK(net.output_is_zero());
}

TEST_CASE("initialization zeros the output layer only") {
  MlpShape s = small_shape();
  Mlp<double> net(s);
  std::mt19937_64 rng(1);
  net.initialize(rng);
  CHECK(net.output_is_zero());
  Mlp<double>::Matrix x = Mlp<double>::Matrix::Random(5, 4);
  CHECK(net.forward(x).isZero(0));
  double hidden = 0;
  for (double w : net.parameters()) hidden += std::abs(w);
  CHECK(hidden > 0);
}

TEST_CASE("output bias passes through a zero output layer") {
  const MlpShape s = small_shape();
  Mlp<double> net(s);
  std::mt19937_64 rng(2);
  net.initialize(rng);
  auto p = net.mutable_parameters();
  const std::size_t bias = p.size() - s.output_dim();
  for (int i = 0; i < s.output_dim(); ++i) p[bias + i] = 0.1 * (i + 1);
  const auto y = net.forward(Mlp<double>::Matrix::Random(5, 6));
  for (int c = 0; c < 6; ++c)
    for (int i = 0; i < s.output_dim(); ++i) CHECK(y(i, c) == doctest::Approx(0.1 * (i + 1)));
}

TEST_CASE("forward matches the dense oracle") {
  MlpShape s;
  s.input_dim = 76;
  s.heads = {3, 4, 3};
  Mlp<double> net(s);
  std::mt19937_64 rng(13);
  net.initialize(rng);
  for (double& w : net.mutable_parameters()) w += testing::uniform(rng, -0.01, 0.01);
  std::vector<double> x(76);
  for (double& v : x) v = testing::uniform(rng, -1, 1);
  const Eigen::Map<const Mlp<double>::Matrix> in(x.data(), 76, 1);
  const auto y = net.forward(in);
  const auto expect = dense_forward(s, net.parameters(), x);
  for (int i = 0; i < 10; ++i) CHECK(std::abs(y(i, 0) - expect[i]) <= 1e-10);
}

TEST_CASE("zero output adjoint gives zero gradients") {
  Mlp<double> net(small_shape());
  std::mt19937_64 rng(3);
  randomize(net, rng);
  Mlp<double>::Cache cache;
  net.forward(Mlp<double>::Matrix::Random(5, 3), &cache);
  std::vector<double> g(net.parameters().size(), 0.0);
  Mlp<double>::Matrix d_in;
  net.backward(cache, Mlp<double>::Matrix::Zero(7, 3), g, &d_in);
  for (double v : g) CHECK(v == 0);
  CHECK(d_in.isZero(0));
}

TEST_CASE("single linear layer weight gradient is input outer adjoint") {
  MlpShape s;
  s.input_dim = 3;
  s.depth = 0;
  s.heads = {2};
  Mlp<double> net(s);
  Mlp<double>::Cache cache;
  Mlp<double>::Matrix x(3, 1);
  x << 1, 2, 3;
  net.forward(x, &cache);
  std::vector<double> g(net.parameters().size(), 0.0);
  Mlp<double>::Matrix d(2, 1);
  d << 1, -1;
  net.backward(cache, d, g, nullptr);
  // column-major W (2x3) then bias
  const std::vector<double> expect{1, -1, 2, -2, 3, -3, 1, -1};
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(g[i] == expect[i]);
}

TEST_CASE("stale cache is a contract violation") {
  Mlp<double> net(small_shape());
  std::mt19937_64 rng(4);
  randomize(net, rng);
  Mlp<double>::Cache cache;
  net.forward(Mlp<double>::Matrix::Random(5, 2), &cache);
  net.mutable_parameters()[0] += 1;
  std::vector<double> g(net.parameters().size(), 0.0);
  CHECK_THROWS_AS(net.backward(cache, Mlp<double>::Matrix::Ones(7, 2), g, nullptr), ContractError);
  Mlp<double> other(small_shape());
  CHECK_THROWS_AS(other.backward(Mlp<double>::Cache{}, Mlp<double>::Matrix::Ones(7, 2), g, nullptr),
                  ContractError);
}

TEST_CASE("backward matches finite differences") {
  const MlpShape s = small_shape();
  Mlp<double> net(s);
  std::mt19937_64 rng(21);
  randomize(net, rng);
  const int batch = 3;
  Mlp<double>::Matrix x = Mlp<double>::Matrix::Random(5, batch);
  Mlp<double>::Matrix w = Mlp<double>::Matrix::Random(7, batch);

  Mlp<double>::Cache cache;
  net.forward(x, &cache);
  std::vector<double> g(net.parameters().size(), 0.0);
  Mlp<double>::Matrix d_in;
  net.backward(cache, w, g, &d_in);
  const auto pattern = net.activation_pattern(cache);

  std::vector<double> p0(net.parameters().begin(), net.parameters().end());
  bool crossed = false;
  auto f = [&](const std::vector<double>& p) {
    std::copy(p.begin(), p.end(), net.mutable_parameters().begin());
    Mlp<double>::Cache c;
    const double v = (net.forward(x, &c).array() * w.array()).sum();
    crossed |= net.activation_pattern(c) != pattern;
    return v;
  };
  const auto num = testing::numeric_gradient(f, p0, 1e-5);
  REQUIRE_FALSE(crossed);
  CHECK(testing::relative_error(g, num) <= 1e-5);

  std::copy(p0.begin(), p0.end(), net.mutable_parameters().begin());
  std::vector<double> xv(x.data(), x.data() + x.size());
  auto fx = [&](const std::vector<double>& v) {
    const Eigen::Map<const Mlp<double>::Matrix> in(v.data(), 5, batch);
    return (net.forward(in).array() * w.array()).sum();
  };
  const auto num_x = testing::numeric_gradient(fx, xv, 1e-5);
  std::vector<double> ana_x(d_in.data(), d_in.data() + d_in.size());
  CHECK(testing::relative_error(ana_x, num_x) <= 1e-5);
}
