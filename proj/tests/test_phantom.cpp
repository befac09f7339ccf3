#include <doctest.h>

#include <cmath>
#include <numbers>

#include "redpsm/error.hpp"
#include "redpsm/log.hpp"
#include "redpsm/phantom.hpp"
#include "redpsm/tomo.hpp"
#include "test_util.hpp"

using namespace redpsm;
using namespace redpsm::phantom;
using namespace redpsm::testing;

TEST_CASE("shepp_logan: bounded, vanishes outside the inscribed disc") {
  const ImageFrame f = shepp_logan(64);
  CHECK(f.data.maxCoeff() == doctest::Approx(1.0));
  CHECK(f.data.minCoeff() >= 0.0);
  const double c = 31.5;
  for (Index i = 0; i < 64; ++i)
    for (Index j = 0; j < 64; ++j) {
      const double r = std::hypot(i - c, j - c);
      if (r > 32.0) CHECK(f.at(i, j) == 0.0);
    }
}

TEST_CASE("warp_phantom") {
  const ImageFrame base = shepp_logan(32);

  SUBCASE("c_max = 0 keeps every frame") {
    const DynamicObject f = warp_phantom(base, 6, 0.0);
    for (Index t = 0; t < 6; ++t) CHECK(f.data.col(t) == base.data);
  }
  SUBCASE("frame 0 is bit-exact for any c_max") {
    for (double c : {0.5, 1.6, 3.0}) CHECK(warp_phantom(base, 4, c).data.col(0) == base.data);
  }
  SUBCASE("a bright pixel's centroid follows the row shift") {
    const Index n = 32;
    const Index row = 11;
    ImageFrame dot = ImageFrame::zeros(n);
    dot.at(row, 16) = 1.0;
    const Index p = 5;
    const double c_max = 1.5;
    const DynamicObject f = warp_phantom(dot, p, c_max);
    for (Index t = 0; t < p; ++t) {
      double mass = 0.0;
      double moment = 0.0;
      for (Index i = 0; i < n; ++i) {
        mass += f.data(i * n + 16, t);
        moment += static_cast<double>(i) * f.data(i * n + 16, t);
      }
      const double ct = c_max * static_cast<double>(t) / static_cast<double>(p - 1);
      const double expected = row - ct * std::sin(3.0 * std::numbers::pi * row / n);
      REQUIRE(mass > 0.0);
      CHECK(std::abs(moment / mass - expected) < 0.5);
    }
  }
  SUBCASE("total mass is nearly conserved for in-frame warps") {
    const DynamicObject f = warp_phantom(shepp_logan(64), 8, 1.0);
    const double m0 = f.data.col(0).sum();
    for (Index t = 1; t < 8; ++t) CHECK(std::abs(f.data.col(t).sum() - m0) < 0.01 * m0);
  }
  SUBCASE("content pushed out of the frame warns") {
    ImageFrame edge = ImageFrame::zeros(16);
    edge.at(1, 5) = 1.0;
    log::ScopedCapture capture;
    warp_phantom(edge, 3, 4.0);
    CHECK(!capture.messages().empty());
  }
  SUBCASE("negative magnitude rejected") {
    CHECK_THROWS_AS(warp_phantom(base, 3, -1.0), ValidationError);
  }
}

TEST_CASE("affine_dynamic") {
  std::mt19937_64 rng(4);
  const ImageFrame base = smooth_frame(32, rng);

  SUBCASE("identity parameters give a static sequence") {
    const DynamicObject f = affine_dynamic(base, 3, std::vector<AffineParams>(3));
    for (Index t = 0; t < 3; ++t) CHECK((f.data.col(t) - base.data).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("integer translation is an exact shift") {
    AffineParams a;
    a.tx = 2.0;
    a.ty = 1.0;  // up one row
    const DynamicObject f = affine_dynamic(base, 1, {a});
    for (Index i = 0; i < 31; ++i)
      for (Index j = 2; j < 32; ++j) CHECK(f.data(i * 32 + j, 0) == base.at(i + 1, j - 2));
  }
  SUBCASE("small motion is low rank") {
    const Index p = 16;
    std::vector<AffineParams> params(p);
    for (Index t = 0; t < p; ++t) {
      params[static_cast<std::size_t>(t)].tx = 2.0 * std::sin(0.3 * t);
      params[static_cast<std::size_t>(t)].ty = 1.5 * t / (p - 1.0);
    }
    const DynamicObject f = affine_dynamic(base, p, params);
    const Eigen::JacobiSVD<Mat> svd(f.data);
    const Vec s2 = svd.singularValues().array().square();
    CHECK(s2.tail(p - 4).sum() / s2.sum() < 0.05);
  }
  SUBCASE("zero scale rejected") {
    AffineParams a;
    a.scale = 0.0;
    CHECK_THROWS_AS(affine_dynamic(base, 1, {a}), ValidationError);
  }
}

TEST_CASE("bit_reversed_angles") {
  SUBCASE("P = P_hat = 8") {
    const AngleSchedule s = bit_reversed_angles(8);
    // reverse each 3-bit index by hand
    const int order[8] = {0b000, 0b100, 0b010, 0b110, 0b001, 0b101, 0b011, 0b111};
    for (int t = 0; t < 8; ++t) CHECK(s.angles[t] == order[t] * std::numbers::pi / 8.0);
  }
  SUBCASE("P_hat = 1 is a constant zero angle") {
    const AngleSchedule s = bit_reversed_angles(5, 1);
    for (double a : s.angles) CHECK(a == 0.0);
  }
  SUBCASE("periodic extension") {
    const AngleSchedule s = bit_reversed_angles(16, 8);
    for (int t = 0; t < 8; ++t) CHECK(s.angles[t] == s.angles[t + 8]);
  }
  SUBCASE("a permutation of the uniform grid") {
    const AngleSchedule s = bit_reversed_angles(32);
    std::vector<double> sorted = s.angles;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < 32; ++k) CHECK(sorted[k] == k * std::numbers::pi / 32.0);
  }
  SUBCASE("non power of two rejected") {
    CHECK_THROWS_AS(bit_reversed_angles(12, 6), ValidationError);
    CHECK_THROWS_AS(bit_reversed_angles(4, 8), ValidationError);
  }
}

TEST_CASE("acquire") {
  std::mt19937_64 rng(8);
  const DynamicObject f(16, random_mat(256, 8, rng, 0, 1));
  const AngleSchedule s = bit_reversed_angles(8);

  CHECK(acquire(f, s, 0.0, 1).data == tomo::project_dynamic(f, s.angles).data);
  CHECK(acquire(f, s, 0.1, 42).data == acquire(f, s, 0.1, 42).data);
  CHECK(acquire(f, s, 0.1, 42).data != acquire(f, s, 0.1, 43).data);

  const DynamicObject big = DynamicObject::zeros(100, 100);
  const AngleSchedule sb = bit_reversed_angles(100, 64);
  const Sinogram g = acquire(big, sb, 5e-3, 3);
  const double mean = g.data.mean();
  const double sd = std::sqrt((g.data.array() - mean).square().sum() / (g.data.size() - 1));
  CHECK(std::abs(sd - 5e-3) < 0.03 * 5e-3);

  SUBCASE("linear without noise") {
    const DynamicObject f2(16, random_mat(256, 8, rng, 0, 1));
    const DynamicObject mix(16, 2.0 * f.data - f2.data);
    const Mat lhs = acquire(mix, s, 0.0, 0).data;
    const Mat rhs = 2.0 * acquire(f, s, 0.0, 0).data - acquire(f2, s, 0.0, 0).data;
    CHECK(rel_diff(lhs, rhs) < 1e-12);
  }
}
