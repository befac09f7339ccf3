#include "redpsm/baselines.hpp"

#include <cmath>
#include <numbers>

#include "redpsm/error.hpp"
#include "redpsm/log.hpp"
#include "redpsm/optim.hpp"
#include "redpsm/parallel.hpp"

namespace redpsm::baselines {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("TV smoothing epsilon must be > 0");
}

// Adds the spatial TV of each column (an n x n frame) times `weight`.
double spatial_tv(const Mat& frames, Index n, double eps, double weight, Mat& grad) {
  std::vector<double> parts(static_cast<std::size_t>(frames.cols()), 0.0);
  parallel_for(frames.cols(), [&](Index t) {
    const TvValue v = tv_s(ImageFrame(n, frames.col(t)), eps);
    parts[static_cast<std::size_t>(t)] = v.value;
    grad.col(t) += weight * v.gradient;
  });
  double total = 0.0;
  for (double v : parts) total += v;
  return weight * total;
}

double temporal_tv(const Mat& f, double eps, double weight, Mat& grad) {
  double total = 0.0;
  for (Index t = 0; t + 1 < f.cols(); ++t) {
    const Vec diff = f.col(t + 1) - f.col(t);
    const Vec phi = (diff.array().square() + eps * eps).sqrt();
    total += phi.sum();
    const Vec g = weight * (diff.array() / phi.array()).matrix();
    grad.col(t + 1) += g;
    grad.col(t) -= g;
  }
  return weight * total;
}

}  // namespace

TvValue tv_image(const Mat& image, double eps) {
  check_eps(eps);
  const Index rows = image.rows();
  const Index cols = image.cols();
  TvValue out{0.0, Mat::Zero(rows, cols)};
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      const double dx = j + 1 < cols ? image(i, j + 1) - image(i, j) : 0.0;
      const double dy = i + 1 < rows ? image(i + 1, j) - image(i, j) : 0.0;
      const double phi = std::sqrt(dx * dx + dy * dy + eps * eps);
      out.value += phi;
      const double gx = dx / phi;
      const double gy = dy / phi;
      out.gradient(i, j) -= gx + gy;
      if (j + 1 < cols) out.gradient(i, j + 1) += gx;
      if (i + 1 < rows) out.gradient(i + 1, j) += gy;
    }
  return out;
}

TvValue tv_s(const ImageFrame& frame, double eps) {
  frame.validate();
  const Index n = frame.n;
  const Mat img = Eigen::Map<const RowMat>(frame.data.data(), n, n);
  TvValue v = tv_image(img, eps);
  const RowMat g = v.gradient;
  v.gradient = Eigen::Map<const Vec>(g.data(), n * n);
  return v;
}

TvValue tv_st(const DynamicObject& f, double eps, double lambda, double lambda_tilde) {
  f.validate();
  check_eps(eps);
  TvValue out{0.0, Mat::Zero(f.data.rows(), f.data.cols())};
  out.value = spatial_tv(f.data, f.n, eps, lambda, out.gradient);
  if (lambda_tilde != 0.0) out.value += temporal_tv(f.data, eps, lambda_tilde, out.gradient);
  return out;
}

void TvConfig::validate() const {
  if (k < 1 || d < k) throw ValidationError("TV baseline needs 1 <= k <= d");
  if (!(lambda >= 0.0) || !(lambda_tilde >= 0.0)) throw ValidationError("TV weights must be >= 0");
  if (!(epsilon >= 0.0)) throw ValidationError("TV epsilon must be >= 0 (0 selects the default)");
  if (!(xi > 0.0)) throw ValidationError("xi must be > 0");
  if (iters < 0) throw ValidationError("iters must be >= 0");
  if (!(step > 0.0)) throw ValidationError("step must be > 0");
  if (init_window < 1) throw ValidationError("init_window must be >= 1");
}

namespace {

struct Evaluation {
  double value = 0.0;
  Mat grad_x;  // d objective / d (Lambda Psi^T), data and TV terms only
};

Evaluation evaluate(const tomo::DynamicProjector& op, const Sinogram& g, const Mat& x,
                    const TvConfig& cfg, Variant variant, double eps, bool want_grad) {
  Evaluation e;
  const Mat r = op.forward(x) - g.data;
  e.value = r.squaredNorm();
  Mat grad = Mat::Zero(x.rows(), x.cols());
  if (cfg.lambda != 0.0) e.value += spatial_tv(x, op.n(), eps, cfg.lambda, grad);
  if (variant == Variant::SpatioTemporal && cfg.lambda_tilde != 0.0) {
    e.value += temporal_tv(x, eps, cfg.lambda_tilde, grad);
  }
  if (want_grad) e.grad_x = grad + 2.0 * op.adjoint(r);
  return e;
}

}  // namespace

double psm_tv_objective(const tomo::DynamicProjector& op, const Sinogram& g, const psm::Factors& fac,
                        const TvConfig& cfg, Variant variant, double eps) {
  const Mat psi = fac.psi();
  return evaluate(op, g, fac.lambda * psi.transpose(), cfg, variant, eps, false).value +
         cfg.xi * (fac.lambda.squaredNorm() + psi.squaredNorm());
}

TvResult solve_psm_tv(const Sinogram& g, const TvConfig& cfg, Variant variant) {
  g.validate();
  cfg.validate();
  if (cfg.d > g.p()) throw ValidationError("temporal dimension d exceeds the number of frames");
  const tomo::DynamicProjector op(g.n_det(), g.angles);
  const Mat u = psm::temporal_basis(cfg.basis, g.p(), cfg.d);

  TvResult result;
  result.factors = solver::initial_factors(g, cfg.init, cfg.k, u, cfg.init_window, cfg.seed);
  double eps = cfg.epsilon;
  if (eps == 0.0) {
    const double peak = (result.factors.lambda * result.factors.psi().transpose()).cwiseAbs().maxCoeff();
    eps = 1e-6 * (peak > 0.0 ? peak : 1.0);
  }
  result.epsilon = eps;

  auto objective = [&](const std::vector<Mat>& v) {
    const Mat psi = u * v[1];
    return evaluate(op, g, v[0] * psi.transpose(), cfg, variant, eps, false).value +
           cfg.xi * (v[0].squaredNorm() + psi.squaredNorm());
  };
  auto gradient = [&](const std::vector<Mat>& v) {
    const Mat psi = u * v[1];
    const Evaluation e = evaluate(op, g, v[0] * psi.transpose(), cfg, variant, eps, true);
    Mat gl = e.grad_x * psi + 2.0 * cfg.xi * v[0];
    Mat gp = e.grad_x.transpose() * v[0] + 2.0 * cfg.xi * psi;
    return std::vector<Mat>{std::move(gl), u.transpose() * gp};
  };

  std::vector<Mat> x{result.factors.lambda, result.factors.z};
  Mat prev_lambda = x[0];
  Mat prev_psi = u * x[1];
  auto record = [&](Index it, const std::vector<Mat>& v, double value) {
    if (!std::isfinite(value)) {
      throw solver::SolverAbort("TV baseline diverged at iteration " + std::to_string(it),
                                result.diagnostics);
    }
    const Mat psi = u * v[1];
    const Mat xp = v[0] * psi.transpose();
    solver::DiagnosticsRow row;
    row.iter = it;
    row.objective = value;
    row.lagrangian = value;
    row.fit = (op.forward(xp) - g.data).norm();
    row.d_lambda = (v[0] - prev_lambda).norm();
    row.d_psi = (psi - prev_psi).norm();
    row.norm_f = xp.norm();
    row.norm_lambda = v[0].norm();
    row.norm_psi = psi.norm();
    prev_lambda = v[0];
    prev_psi = psi;
    result.diagnostics.push_back(row);
  };
  optim::adam_minimize(x, objective, gradient, cfg.iters, cfg.step, record);

  result.factors.lambda = std::move(x[0]);
  result.factors.z = std::move(x[1]);
  result.estimate = psm::compose(result.factors);
  return result;
}

DynamicObject fbp_per_view(const Sinogram& g) {
  g.validate();
  const Index n = g.n_det();
  if (g.p() == 0) throw ValidationError("sinogram has no projections");
  log::warn("per-view FBP: every frame is reconstructed from a single projection");
  const tomo::DynamicProjector op(n, g.angles);
  DynamicObject out = DynamicObject::zeros(n, g.p());
  parallel_for(g.p(), [&](Index t) {
    const Vec filtered = tomo::ramp_filter(g.data.col(t));
    out.data.col(t) = std::numbers::pi * (op.matrix(t).transpose() * filtered);
  });
  return out;
}

}  // namespace redpsm::baselines
