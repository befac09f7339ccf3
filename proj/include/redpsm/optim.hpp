#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "redpsm/types.hpp"

// Small first-order optimisers shared by the solver and the baselines.
namespace redpsm::optim {

inline double dot(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

// Conjugate gradients on the quadratic with Hessian `apply` and gradient
// `apply(x) - b`, warm-started at x. Each step is an exact line search, so the
// quadratic never increases.
template <class Apply>
void conjugate_gradient(Mat& x, const Mat& b, const Apply& apply, Index iters) {
  Mat r = b - apply(x);
  Mat p = r;
  double rr = r.squaredNorm();
  const double stop = 1e-28 * std::max(b.squaredNorm(), 1e-300);
  for (Index it = 0; it < iters && rr > stop; ++it) {
    const Mat ap = apply(p);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rr / pap;
    x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
}

/// Adam over a list of blocks with step halving whenever a step would raise the
/// objective, so accepted iterates never increase it. `on_step(it, x, value)` runs
/// after every accepted step. Returns the final objective value.
template <class Objective, class Gradient, class OnStep>
double adam_minimize(std::vector<Mat>& x, const Objective& objective, const Gradient& gradient,
                     Index iters, double lr, const OnStep& on_step) {
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  constexpr double eps = 1e-8;
  std::vector<Mat> m;
  std::vector<Mat> v;
  for (const Mat& b : x) {
    m.push_back(Mat::Zero(b.rows(), b.cols()));
    v.push_back(Mat::Zero(b.rows(), b.cols()));
  }
  double current = objective(x);
  for (Index it = 1; it <= iters; ++it) {
    const std::vector<Mat> g = gradient(x);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(it));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(it));
    std::vector<Mat> dir(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i].cwiseProduct(g[i]);
      dir[i] = ((m[i] / c1).array() / ((v[i] / c2).array().sqrt() + eps)).matrix();
    }
    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      std::vector<Mat> trial = x;
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] -= lr * dir[i];
      const double value = objective(trial);
      if (value <= current) {
        x = std::move(trial);
        current = value;
        accepted = true;
        on_step(it, x, current);
      } else {
        lr *= 0.5;
      }
    }
    if (!accepted) break;
  }
  return current;
}

template <class Objective, class Gradient>
double adam_minimize(std::vector<Mat>& x, const Objective& objective, const Gradient& gradient,
                     Index iters, double lr) {
  return adam_minimize(x, objective, gradient, iters, lr,
                       [](Index, const std::vector<Mat>&, double) {});
}

}  // namespace redpsm::optim
