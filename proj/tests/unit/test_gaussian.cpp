#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "glint/gaussian.hpp"
#include "support/testing.hpp"

using namespace glint;

namespace {

Eigen::Matrix3d to_eigen(const Mat3& m) {
  Eigen::Matrix3d e;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) e(r, c) = m(r, c);
  return e;
}

Camera random_camera(std::mt19937_64& rng) {
  const Vec3 eye = testing::random_unit(rng) * testing::uniform(rng, 2, 4);
  Camera cam = look_at(eye, Vec3{}, Vec3{0, 1, 0}, 0.8, 64, 48);
  cam.fx *= testing::uniform(rng, 0.8, 1.2);
  cam.cx += testing::uniform(rng, -2, 2);
  return cam;
}

}  // namespace

TEST_CASE("unit isotropic covariance is the identity") {
  CHECK(frobenius_norm(build_covariance(Vec3{}, Quat{}) - Mat3::identity()) <= 1e-15);
}

TEST_CASE("axis-aligned covariance is diagonal squared scales") {
  const Mat3 s = build_covariance({std::log(1.0), std::log(2.0), std::log(3.0)}, Quat{});
  CHECK(frobenius_norm(s - Mat3::diagonal({1, 4, 9})) <= 1e-12);
}

TEST_CASE("covariance eigenvalues are the squared scales") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 ls{testing::uniform(rng, -2, 1), testing::uniform(rng, -2, 1), testing::uniform(rng, -2, 1)};
    const Mat3 s = build_covariance(ls, testing::random_unit_quat(rng) * 1.4);
    CHECK(frobenius_norm(s - s.transposed()) <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(to_eigen(s));
    std::array<double, 3> expect{std::exp(2 * ls.x), std::exp(2 * ls.y), std::exp(2 * ls.z)};
    std::sort(expect.begin(), expect.end());
    for (int i = 0; i < 3; ++i) CHECK(std::abs(es.eigenvalues()(i) - expect[i]) <= 1e-9);
  }
}

TEST_CASE("covariance is PSD over many draws") {
  std::mt19937_64 rng(12);
  double lowest = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Vec3 ls{testing::uniform(rng, -6, 2), testing::uniform(rng, -6, 2), testing::uniform(rng, -6, 2)};
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(
        to_eigen(build_covariance(ls, testing::random_unit_quat(rng))), Eigen::EigenvaluesOnly);
    lowest = std::min(lowest, es.eigenvalues()(0));
  }
  CHECK(lowest >= -1e-12);
}

TEST_CASE("projection of the unit covariance") {
  Camera cam;
  cam.fx = cam.fy = 1;
  const auto p = project_covariance(Mat3::identity(), cam, Vec3{0, 0, 1});
  REQUIRE_FALSE(p.culled);
  CHECK(p.cov.xx == doctest::Approx(1.3));
  CHECK(p.cov.xy == doctest::Approx(0));
  CHECK(p.cov.yy == doctest::Approx(1.3));
  CHECK(p.depth == 1);

  cam.fx = 2;
  const auto q = project_covariance(Mat3::identity(), cam, Vec3{0, 0, 1});
  CHECK(q.cov.xx == doctest::Approx(4.3));
  CHECK(q.cov.yy == doctest::Approx(1.3));
}

TEST_CASE("centers behind the near plane are culled") {
  Camera cam;
  CHECK(project_covariance(Mat3::identity(), cam, Vec3{0, 0, -1}).culled);
  CHECK(project_covariance(Mat3::identity(), cam, Vec3{0, 0, 0.005}).culled);
}

TEST_CASE("projection matches dense J W Sigma W^T J^T") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Camera cam = random_camera(rng);
    const Vec3 pos{testing::uniform(rng, -0.5, 0.5), testing::uniform(rng, -0.5, 0.5), testing::uniform(rng, -0.5, 0.5)};
    const Mat3 sigma = build_covariance(
        {testing::uniform(rng, -3, -1), testing::uniform(rng, -3, -1), testing::uniform(rng, -3, -1)},
        testing::random_unit_quat(rng));
    const auto p = project_covariance(sigma, cam, pos);
    REQUIRE_FALSE(p.culled);
    const Vec3 c = cam.to_camera(pos);
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx / c.z, 0, -cam.fx * c.x / (c.z * c.z), 0, cam.fy / c.z, -cam.fy * c.y / (c.z * c.z);
    const Eigen::Matrix3d W = to_eigen(cam.rotation);
    Eigen::Matrix2d expect = J * W * to_eigen(sigma) * W.transpose() * J.transpose();
    expect += 0.3 * Eigen::Matrix2d::Identity();
    CHECK(std::abs(p.cov.xx - expect(0, 0)) <= 1e-10);
    CHECK(std::abs(p.cov.xy - expect(0, 1)) <= 1e-10);
    CHECK(std::abs(p.cov.yy - expect(1, 1)) <= 1e-10);
    CHECK(p.cov.det() > 0);
  }
}

TEST_CASE("projection and covariance adjoints match finite differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const Camera cam = random_camera(rng);
    const Vec3 pos{testing::uniform(rng, -0.5, 0.5), testing::uniform(rng, -0.5, 0.5), testing::uniform(rng, -0.5, 0.5)};
    const Vec3 ls{testing::uniform(rng, -3, -1), testing::uniform(rng, -3, -1), testing::uniform(rng, -3, -1)};
    const Quat q = testing::random_unit_quat(rng);
    ProjectionAdjoint w;
    w.mean = {testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1)};
    w.conic = {testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1)};
    w.depth = testing::uniform(rng, -1, 1);
    auto f = [&](const std::vector<double>& x) {
      const Mat3 s = build_covariance({x[3], x[4], x[5]}, Quat{x[6], x[7], x[8], x[9]});
      const auto p = project_covariance(s, cam, Vec3{x[0], x[1], x[2]});
      return w.mean.x * p.mean.x + w.mean.y * p.mean.y + w.conic.xx * p.conic.xx +
             w.conic.xy * p.conic.xy + w.conic.yy * p.conic.yy + w.depth * p.depth;
    };
    const std::vector<double> x{pos.x, pos.y, pos.z, ls.x, ls.y, ls.z, q.w, q.x, q.y, q.z};
    const Mat3 sigma = build_covariance(ls, q);
    const auto p = project_covariance(sigma, cam, pos);
    Vec3 d_pos, d_ls;
    Mat3 d_sigma;
    Quat d_q{0, 0, 0, 0};
    project_covariance_backward(sigma, cam, p, w, d_pos, d_sigma);
    build_covariance_backward(ls, q, d_sigma, d_ls, d_q);
    const std::vector<double> ana{d_pos.x, d_pos.y, d_pos.z, d_ls.x, d_ls.y, d_ls.z, d_q.w, d_q.x, d_q.y, d_q.z};
    CHECK(testing::relative_error(ana, testing::numeric_gradient(f, x, 1e-6)) <= 1e-6);
  }
}

TEST_CASE("axes of an axis-aligned Gaussian") {
  const auto a = gaussian_axes({std::log(0.1), std::log(0.5), std::log(1.0)}, Quat{});
  CHECK(a.shortest == Vec3{1, 0, 0});
  CHECK(a.shortest_length == doctest::Approx(0.1));
  CHECK(a.longest == Vec3{0, 0, 1});
  CHECK(a.longest_length == doctest::Approx(1.0));
  CHECK_FALSE(a.degenerate());
}

TEST_CASE("isotropic scales tie-break to column zero") {
  const auto a = gaussian_axes({0.2, 0.2, 0.2}, Quat{});
  CHECK(a.shortest_index == 0);
  CHECK(a.longest_index == 0);
  CHECK(a.degenerate());
}

TEST_CASE("axes are orthogonal and sorted") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 ls{testing::uniform(rng, -3, 1), testing::uniform(rng, -3, 1), testing::uniform(rng, -3, 1)};
    const auto a = gaussian_axes(ls, testing::random_unit_quat(rng));
    CHECK(std::abs(dot(a.shortest, a.longest)) <= 1e-9);
    const double lo = std::min({ls.x, ls.y, ls.z}), hi = std::max({ls.x, ls.y, ls.z});
    CHECK(a.shortest_length == doctest::Approx(std::exp(lo)));
    CHECK(a.longest_length == doctest::Approx(std::exp(hi)));
  }
}

TEST_CASE("gather keeps rows in source order") {
  GaussianSet g;
  g.resize(3);
  for (std::size_t i = 0; i < 3; ++i) {
    g.set_pos(i, {double(i), 0, 0});
    g.raw_opacity[i] = double(i) * 10;
  }
  const GaussianSet h = g.gather({2, 0, 2});
  REQUIRE(h.size() == 3);
  CHECK(h.pos(0).x == 2);
  CHECK(h.pos(1).x == 0);
  CHECK(h.raw_opacity[2] == 20);
}
