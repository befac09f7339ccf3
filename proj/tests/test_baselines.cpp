#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "redpsm/baselines.hpp"
#include "redpsm/log.hpp"
#include "redpsm/phantom.hpp"
#include "test_util.hpp"

using namespace redpsm;
using namespace redpsm::baselines;
using namespace redpsm::testing;

namespace {

template <class F>
Mat fd_gradient(const F& value, const Mat& x, double h = 1e-5) {
  Mat g(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      Mat a = x, b = x;
      a(i, j) += h;
      b(i, j) -= h;
      g(i, j) = (value(a) - value(b)) / (2.0 * h);
    }
  return g;
}

std::vector<double> angles(Index p) {
  std::vector<double> a;
  for (Index t = 0; t < p; ++t) a.push_back(0.3 + 0.9 * static_cast<double>(t));
  return a;
}

}  // namespace

TEST_CASE("tv_s") {
  std::mt19937_64 rng(1);

  SUBCASE("constant frame sits on the smoothing floor") {
    const TvValue v = tv_s(ImageFrame::constant(8, 3.2), 1e-3);
    CHECK(v.value == doctest::Approx(64 * 1e-3).epsilon(1e-12));
    CHECK(v.gradient.isZero(0.0));
  }
  SUBCASE("vertical edge in a two-column image") {
    const Index rows = 6;
    const double h = 2.5, eps = 0.01;
    Mat img(rows, 2);
    img.col(0).setZero();
    img.col(1).setConstant(h);
    double expect = 0.0;
    for (Index i = 0; i < rows; ++i) expect += std::sqrt(h * h + eps * eps) + eps;
    CHECK(std::abs(tv_image(img, eps).value - expect) < 1e-10);
  }
  SUBCASE("gradient matches finite differences") {
    const ImageFrame f = random_frame(8, rng);
    const TvValue v = tv_s(f, 0.05);
    const Mat fd = fd_gradient([&](const Mat& x) { return tv_s(ImageFrame(8, x), 0.05).value; }, Mat(f.data));
    CHECK(rel_diff(v.gradient, fd) < 1e-5);
  }
  SUBCASE("invariant to constant shifts") {
    const ImageFrame f = random_frame(8, rng);
    const ImageFrame g(8, f.data.array() + 4.0);
    CHECK(tv_s(f, 1e-3).value == doctest::Approx(tv_s(g, 1e-3).value).epsilon(1e-12));
  }
  SUBCASE("epsilon must be positive") {
    CHECK_THROWS_AS(tv_s(ImageFrame::zeros(4), 0.0), ValidationError);
  }
}

TEST_CASE("tv_st") {
  std::mt19937_64 rng(2);
  const Index n = 6, p = 4;

  SUBCASE("static object: temporal term is the floor") {
    const ImageFrame fr = random_frame(n, rng);
    const DynamicObject f(n, fr.data.replicate(1, p));
    const double eps = 1e-3;
    const double spatial = tv_st(f, eps, 0.7, 0.0).value;
    const double both = tv_st(f, eps, 0.7, 2.0).value;
    CHECK(both - spatial == doctest::Approx(2.0 * (p - 1) * n * n * eps).epsilon(1e-10));
  }
  SUBCASE("P = 1 is lambda tv_s") {
    const ImageFrame fr = random_frame(n, rng);
    const DynamicObject f(n, fr.data);
    CHECK(tv_st(f, 1e-2, 0.5, 3.0).value == doctest::Approx(0.5 * tv_s(fr, 1e-2).value).epsilon(1e-14));
  }
  SUBCASE("lambda_tilde = 0 sums tv_s over frames") {
    DynamicObject f = DynamicObject::zeros(n, p);
    f.data = random_mat(n * n, p, rng);
    double sum = 0.0;
    for (Index t = 0; t < p; ++t) sum += tv_s(ImageFrame(n, f.data.col(t)), 1e-2).value;
    CHECK(std::abs(tv_st(f, 1e-2, 1.0, 0.0).value - sum) < 1e-12);
  }
  SUBCASE("gradient matches finite differences") {
    DynamicObject f = DynamicObject::zeros(n, p);
    f.data = random_mat(n * n, p, rng);
    const TvValue v = tv_st(f, 0.05, 0.8, 1.3);
    const Mat fd = fd_gradient([&](const Mat& x) { return tv_st(DynamicObject(n, x), 0.05, 0.8, 1.3).value; },
                               f.data);
    CHECK(rel_diff(v.gradient, fd) < 1e-5);
  }
}

TEST_CASE("solve_psm_tv") {
  SUBCASE("zero data gives zero") {
    TvConfig c;
    c.k = 2;
    c.d = 3;
    c.iters = 20;
    const TvResult r = solve_psm_tv(Sinogram{Mat::Zero(8, 4), angles(4)}, c, Variant::Spatial);
    CHECK(r.estimate.data.isZero(0.0));
  }

  SUBCASE("lambda = 0 is the ridge PSM fit") {
    std::mt19937_64 rng(3);
    const Index n = 8, p = 4;
    const Sinogram g{random_mat(n, p, rng), angles(p)};
    TvConfig c;
    c.k = 2;
    c.d = 3;
    c.lambda = 0.0;
    const tomo::DynamicProjector op(n, g.angles);
    const psm::Factors fac{random_mat(n * n, 2, rng), random_mat(3, 2, rng),
                           psm::temporal_basis(c.basis, p, 3)};
    const Mat x = fac.lambda * fac.psi().transpose();
    const double expect = (op.forward(x) - g.data).squaredNorm() +
                          c.xi * (fac.lambda.squaredNorm() + fac.psi().squaredNorm());
    CHECK(psm_tv_objective(op, g, fac, c, Variant::Spatial, 1e-3) ==
          doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("rank-1 static object, noiseless") {
    std::mt19937_64 rng(4);
    const Index n = 16, p = 8;
    const ImageFrame frame = smooth_frame(n, rng);
    const DynamicObject f(n, frame.data.replicate(1, p));
    const Sinogram g = phantom::acquire(f, phantom::bit_reversed_angles(p), 0.0, 0);
    TvConfig c;
    c.k = 1;
    c.d = 2;
    c.lambda = 1e-4;
    c.xi = 1e-6;
    c.iters = 800;
    c.step = 2e-2;
    const TvResult r = solve_psm_tv(g, c, Variant::Spatial);
    const tomo::DynamicProjector op(n, g.angles);
    CHECK((op.forward(r.estimate.data) - g.data).norm() / g.data.norm() < 1e-2);
    for (std::size_t i = 1; i < r.diagnostics.size(); ++i) {
      CHECK(r.diagnostics[i].objective <= r.diagnostics[i - 1].objective);
    }
  }

  SUBCASE("spatio-temporal variant keeps rank <= K") {
    std::mt19937_64 rng(5);
    const Index n = 8, p = 8;
    const DynamicObject f = phantom::warp_phantom(phantom::shepp_logan(n), p, 0.5);
    const Sinogram g = phantom::acquire(f, phantom::bit_reversed_angles(p), 1e-3, 2);
    TvConfig c;
    c.k = 2;
    c.d = 4;
    c.lambda_tilde = 1e-2;
    c.iters = 50;
    const TvResult r = solve_psm_tv(g, c, Variant::SpatioTemporal);
    const Vec s = Eigen::JacobiSVD<Mat>(r.estimate.data).singularValues();
    CHECK(s[2] < 1e-10 * s[0]);
    CHECK(r.epsilon > 0.0);
  }

  SUBCASE("walnut PSM-TV-S configuration is accepted") {
    TvConfig c;
    c.k = 3;
    c.d = 4;
    c.lambda = 5e-2;
    CHECK_NOTHROW(c.validate());
    c.d = 2;
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
}

TEST_CASE("fbp_per_view matches single-view FBP frame by frame") {
  std::mt19937_64 rng(6);
  const Sinogram g{random_mat(12, 5, rng), angles(5)};
  log::ScopedCapture cap;
  const DynamicObject f = fbp_per_view(g);
  CHECK(cap.messages().size() == 1);
  for (Index t = 0; t < g.p(); ++t) {
    const ImageFrame one = tomo::fbp(Sinogram{g.data.col(t), {g.angles[static_cast<std::size_t>(t)]}}).image;
    CHECK(rel_diff(f.data.col(t), one.data) < 1e-14);
  }
}
