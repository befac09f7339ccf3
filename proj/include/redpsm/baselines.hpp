#pragma once

#include <cstdint>

#include "redpsm/psm.hpp"
#include "redpsm/solver.hpp"
#include "redpsm/types.hpp"

// PSM baselines with a smoothed total-variation prior in place of RED, the
// constraint f = Lambda Psi^T substituted into the objective.
namespace redpsm::baselines {

struct TvValue {
  double value = 0.0;
  Mat gradient;  // same shape as the input
};

/// sum over pixels of sqrt(dx^2 + dy^2 + eps^2) with forward differences.
/// Differences that would reach past the last row/column are zero, so a
/// constant image scores rows * cols * eps. `image` is rows x cols.
TvValue tv_image(const Mat& image, double eps);

/// tv_image on an N x N frame; the gradient is returned as an N^2 vector.
TvValue tv_s(const ImageFrame& frame, double eps);

/// lambda * sum_t tv_s(f_t) + lambda_tilde * sum_{t < P-1} sum_x sqrt((f_{t+1} - f_t)^2 + eps^2).
/// The gradient is N^2 x P.
TvValue tv_st(const DynamicObject& f, double eps, double lambda, double lambda_tilde);

enum class Variant { Spatial, SpatioTemporal };

struct TvConfig {
  Index k = 4;
  Index d = 8;
  double lambda = 1e-2;
  double lambda_tilde = 0.0;  // temporal weight, spatio-temporal variant only
  double epsilon = 0.0;       // 0 = 1e-6 * max |initial estimate|
  double xi = 1e-3;
  Index iters = 500;
  double step = 1e-2;  // Adam learning rate, halved on any increase
  psm::BasisKind basis = psm::BasisKind::Dct2;
  solver::Init init = solver::Init::Svd;
  Index init_window = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TvResult {
  psm::Factors factors;
  DynamicObject estimate;
  solver::Diagnostics diagnostics;  // objective and fit per iteration; ADMM-only columns are zero
  double epsilon = 0.0;
};

/// Objective of the substituted problem at the given factors.
double psm_tv_objective(const tomo::DynamicProjector& op, const Sinogram& g, const psm::Factors& fac,
                        const TvConfig& cfg, Variant variant, double eps);

TvResult solve_psm_tv(const Sinogram& g, const TvConfig& cfg, Variant variant);

/// Frame t reconstructed by FBP from its own single view. Degenerate by design;
/// warns once.
DynamicObject fbp_per_view(const Sinogram& g);

}  // namespace redpsm::baselines
