#include "redpsm/tomo.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "redpsm/error.hpp"
#include "redpsm/log.hpp"
#include "redpsm/parallel.hpp"

namespace redpsm::tomo {
namespace {

// CDF of the sum of U(-w1/2, w1/2) and U(-w2/2, w2/2) with w1 >= w2 >= 0,
// i.e. the running integral of the pixel shadow.
double trapezoid_cdf(double x, double w1, double w2) {
  const double outer = 0.5 * (w1 + w2);
  const double inner = 0.5 * (w1 - w2);
  if (x <= -outer) return 0.0;
  if (x >= outer) return 1.0;
  if (x < -inner) {
    const double d = x + outer;
    return d * d / (2.0 * w1 * w2);
  }
  if (x <= inner) return w2 / (2.0 * w1) + (x + inner) / w1;
  const double d = outer - x;
  return 1.0 - d * d / (2.0 * w1 * w2);
}

void check_side(Index n) {
  if (n <= 0) throw ValidationError("image side must be positive, got " + std::to_string(n));
}

}  // namespace

double footprint_weight(double offset, double cos_t, double sin_t) {
  const double a = std::abs(cos_t);
  const double b = std::abs(sin_t);
  const double w1 = std::max(a, b);
  const double w2 = std::min(a, b);
  return trapezoid_cdf(offset + 0.5, w1, w2) - trapezoid_cdf(offset - 0.5, w1, w2);
}

SparseRowMat system_matrix(Index n, double angle) {
  check_side(n);
  if (!std::isfinite(angle)) throw ValidationError("projection angle is not finite");
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double centre = 0.5 * static_cast<double>(n - 1);
  const double reach = 0.5 + 0.5 * (std::abs(c) + std::abs(s));

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n * n * 3));
  for (Index i = 0; i < n; ++i) {
    const double y = centre - static_cast<double>(i);
    for (Index j = 0; j < n; ++j) {
      const double x = static_cast<double>(j) - centre;
      const double sp = x * c + y * s;  // detector coordinate of the pixel centre
      const auto first = static_cast<Index>(std::ceil(sp + centre - reach));
      const auto last = static_cast<Index>(std::floor(sp + centre + reach));
      for (Index b = std::max<Index>(first, 0); b <= std::min<Index>(last, n - 1); ++b) {
        const double w = footprint_weight(static_cast<double>(b) - centre - sp, c, s);
        if (w > 0.0) triplets.emplace_back(b, i * n + j, w);
      }
    }
  }
  SparseRowMat a(n, n * n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return a;
}

Projection project(const ImageFrame& frame, double angle) {
  frame.validate();
  const SparseRowMat a = system_matrix(frame.n, angle);
  return Projection{angle, a * frame.data};
}

ImageFrame backproject(const Projection& proj, Index n) {
  check_side(n);
  proj.validate();
  if (proj.n_det() != n) {
    throw DimensionError("projection has " + std::to_string(proj.n_det()) +
                         " bins but the image grid has side " + std::to_string(n));
  }
  const SparseRowMat a = system_matrix(n, proj.angle);
  return ImageFrame(n, a.transpose() * proj.data);
}

DynamicProjector::DynamicProjector(Index n, std::vector<double> angles)
    : n_(n), angles_(std::move(angles)) {
  check_side(n_);
  per_time_.reserve(angles_.size());
  for (double a : angles_) {
    if (!std::isfinite(a)) throw ValidationError("projection angle is not finite");
    auto it = unique_.find(a);
    if (it == unique_.end()) {
      it = unique_.emplace(a, std::make_shared<const SparseRowMat>(system_matrix(n_, a))).first;
    }
    per_time_.push_back(it->second.get());
  }
}

Mat DynamicProjector::forward(const Mat& f) const {
  if (f.rows() != n_ * n_ || f.cols() != p()) {
    throw DimensionError("forward operator expects an n^2 x P object");
  }
  Mat g(n_, p());
  parallel_for(p(), [&](Index t) { g.col(t) = matrix(t) * f.col(t); });
  return g;
}

Mat DynamicProjector::adjoint(const Mat& g) const {
  if (g.rows() != n_ || g.cols() != p()) {
    throw DimensionError("adjoint operator expects an n x P sinogram");
  }
  Mat f(n_ * n_, p());
  parallel_for(p(), [&](Index t) { f.col(t) = matrix(t).transpose() * g.col(t); });
  return f;
}

Sinogram project_dynamic(const DynamicObject& f, const std::vector<double>& angles) {
  f.validate();
  if (static_cast<Index>(angles.size()) != f.p()) {
    throw DimensionError("object has " + std::to_string(f.p()) + " frames but " +
                         std::to_string(angles.size()) + " angles were given");
  }
  const DynamicProjector op(f.n, angles);
  return Sinogram{op.forward(f.data), angles};
}

DynamicObject adjoint_dynamic(const Sinogram& g) {
  g.validate();
  const DynamicProjector op(g.n_det(), g.angles);
  return DynamicObject(g.n_det(), op.adjoint(g.data));
}

Vec ramp_filter(const Vec& projection) {
  const Index n = projection.size();
  if (n == 0) return projection;
  Index m = 1;
  while (m < 2 * n) m *= 2;

  // Band-limited ramp sampled at unit spacing: 1/4 at 0, -1/(pi k)^2 at odd k.
  std::vector<double> kernel(static_cast<std::size_t>(m), 0.0);
  kernel[0] = 0.25;
  for (Index k = 1; k <= m / 2; ++k) {
    if (k % 2 == 1) {
      const double v = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(k * k));
      kernel[static_cast<std::size_t>(k)] = v;
      kernel[static_cast<std::size_t>(m - k)] = v;
    }
  }
  std::vector<double> padded(static_cast<std::size_t>(m), 0.0);
  for (Index i = 0; i < n; ++i) padded[static_cast<std::size_t>(i)] = projection[i];

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> kf;
  std::vector<std::complex<double>> pf;
  fft.fwd(kf, kernel);
  fft.fwd(pf, padded);
  for (std::size_t i = 0; i < pf.size(); ++i) pf[i] *= kf[i];
  std::vector<double> out;
  fft.inv(out, pf);

  Vec filtered(n);
  for (Index i = 0; i < n; ++i) filtered[i] = out[static_cast<std::size_t>(i)];
  return filtered;
}

FbpResult fbp(const Sinogram& g) {
  g.validate();
  const Index views = g.p();
  if (views == 0) throw ValidationError("filtered backprojection needs at least one view");
  FbpResult result{ImageFrame::zeros(g.n_det()), views < 2};
  if (result.degenerate) {
    log::warn("filtered backprojection from a single view is degenerate");
  }
  const DynamicProjector op(g.n_det(), g.angles);
  Mat filtered(g.n_det(), views);
  for (Index t = 0; t < views; ++t) filtered.col(t) = ramp_filter(g.data.col(t));
  const Mat back = op.adjoint(filtered);
  result.image.data = back.rowwise().sum() * (std::numbers::pi / static_cast<double>(views));
  return result;
}

ImageFrame fbp_static(const Sinogram& g) { return fbp(g).image; }

}  // namespace redpsm::tomo
