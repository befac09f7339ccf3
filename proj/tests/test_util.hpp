#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "redpsm/denoise.hpp"
#include "redpsm/types.hpp"

namespace redpsm::testing {

inline Vec random_vec(Index size, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec v(size);
  for (Index i = 0; i < size; ++i) v[i] = dist(rng);
  return v;
}

inline Mat random_mat(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0,
                      double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

inline ImageFrame random_frame(Index n, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return ImageFrame(n, random_vec(n * n, rng, lo, hi));
}

/// Sum of a few isotropic Gaussian bumps, well inside the inscribed disc.
inline ImageFrame smooth_frame(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-0.2, 0.2);
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  const double c = 0.5 * static_cast<double>(n - 1);
  ImageFrame f = ImageFrame::zeros(n);
  for (int k = 0; k < 3; ++k) {
    const double cx = pos(rng) * static_cast<double>(n);
    const double cy = pos(rng) * static_cast<double>(n);
    const double a = amp(rng);
    const double w = 0.12 * static_cast<double>(n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        const double x = static_cast<double>(j) - c - cx;
        const double y = c - static_cast<double>(i) - cy;
        f.at(i, j) += a * std::exp(-(x * x + y * y) / (2.0 * w * w));
      }
  }
  return f;
}

inline double rel_diff(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b) {
  const double denom = std::max(a.norm(), b.norm());
  return denom == 0.0 ? 0.0 : (a - b).norm() / denom;
}

/// D(f) = c f.
class ScaledIdentity final : public denoise::Denoiser {
 public:
  explicit ScaledIdentity(double c) : c_(c) {}
  ImageFrame apply(const ImageFrame& frame) const override { return ImageFrame(frame.n, c_ * frame.data); }
  std::string name() const override { return "scaled-identity"; }
  std::optional<double> exact_lipschitz() const override { return std::abs(c_); }

 private:
  double c_;
};

}  // namespace redpsm::testing
