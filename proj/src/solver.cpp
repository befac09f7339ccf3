#include "redpsm/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "redpsm/log.hpp"
#include "redpsm/optim.hpp"
#include "redpsm/parallel.hpp"

namespace redpsm::solver {
namespace {

double dot(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double max_norm(const DiagnosticsRow& r) {
  return std::max({r.norm_f, r.norm_lambda, r.norm_psi, r.norm_gamma});
}

bool finite_row(const DiagnosticsRow& r) {
  for (double v : {r.objective, r.lagrangian, r.gap, r.residuals.f, r.residuals.lambda,
                   r.residuals.psi, r.fit, max_norm(r)}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

// ---- enums -------------------------------------------------------------------

FStep parse_f_step(const std::string& s) {
  if (s == "efficient") return FStep::Efficient;
  if (s == "exact") return FStep::Exact;
  throw ValidationError("unknown f_step '" + s + "' (expected efficient or exact)");
}

InnerMethod parse_inner_method(const std::string& s) {
  if (s == "cg") return InnerMethod::ConjugateGradient;
  if (s == "adam") return InnerMethod::Adam;
  throw ValidationError("unknown inner_method '" + s + "' (expected cg or adam)");
}

Init parse_init(const std::string& s) {
  if (s == "svd") return Init::Svd;
  if (s == "random") return Init::Random;
  if (s == "zero") return Init::Zero;
  throw ValidationError("unknown init '" + s + "' (expected svd, random or zero)");
}

std::string to_string(FStep v) { return v == FStep::Efficient ? "efficient" : "exact"; }
std::string to_string(InnerMethod v) { return v == InnerMethod::Adam ? "adam" : "cg"; }
std::string to_string(Init v) {
  switch (v) {
    case Init::Svd: return "svd";
    case Init::Random: return "random";
    case Init::Zero: return "zero";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (k < 1) throw ValidationError("PSM order k must be at least 1");
  if (d < k) {
    throw ValidationError("temporal dimension d=" + std::to_string(d) + " must be at least k=" +
                          std::to_string(k));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be >= 0");
  if (!(xi > 0.0) || !std::isfinite(xi)) throw ValidationError("xi must be > 0");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be > 0");
  if (outer_iters < 0) throw ValidationError("outer_iters must be >= 0");
  if (inner_iters < 1) throw ValidationError("inner_iters must be >= 1");
  if (!(inner_step > 0.0)) throw ValidationError("inner_step must be > 0");
  if (!(f_exact_tol >= 0.0)) throw ValidationError("f_exact_tol must be >= 0");
  if (init_window < 1) throw ValidationError("init_window must be >= 1");
  if (!(stop_tol >= 0.0)) throw ValidationError("stop_tol must be >= 0");
}

void SolverState::validate() const {
  factors.validate();
  const Index n2 = factors.lambda.rows();
  const Index p = factors.u.rows();
  if (f.rows() != n2 || f.cols() != p || gamma.rows() != n2 || gamma.cols() != p) {
    throw DimensionError("solver state shapes are inconsistent");
  }
  if (!f.allFinite() || !gamma.allFinite()) throw ValidationError("solver state is not finite");
}

// ---- diagnostics CSV ---------------------------------------------------------

namespace {
const char* const kColumns[] = {"iter",      "objective", "lagrangian", "gap",     "res_f",
                                "res_lambda", "res_psi",  "res_gap",    "fit",     "d_f",
                                "d_lambda",  "d_psi",     "d_gamma",    "norm_f",  "norm_lambda",
                                "norm_psi",  "norm_gamma"};
}

void write_diagnostics_csv(std::ostream& os, const Diagnostics& rows) {
  for (std::size_t i = 0; i < std::size(kColumns); ++i) os << (i ? "," : "") << kColumns[i];
  os << '\n';
  for (const DiagnosticsRow& r : rows) {
    os << r.iter;
    for (double v : {r.objective, r.lagrangian, r.gap, r.residuals.f, r.residuals.lambda,
                     r.residuals.psi, r.residuals.gap, r.fit, r.d_f, r.d_lambda, r.d_psi,
                     r.d_gamma, r.norm_f, r.norm_lambda, r.norm_psi, r.norm_gamma}) {
      os << ',' << num(v);
    }
    os << '\n';
  }
}

void write_timing_csv(std::ostream& os, const Diagnostics& rows) {
  os << "iter,wall_ms\n";
  for (const DiagnosticsRow& r : rows) os << r.iter << ',' << num(r.wall_ms) << '\n';
}

Diagnostics read_diagnostics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("diagnostics file is empty");
  std::map<std::string, std::size_t> col;
  {
    std::istringstream hs(line);
    std::string name;
    for (std::size_t i = 0; std::getline(hs, name, ','); ++i) col[name] = i;
  }
  for (const char* c : kColumns) {
    if (!col.count(c)) throw FormatError(std::string("diagnostics file lacks column ") + c);
  }
  Diagnostics rows;
  Index line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("diagnostics line " + std::to_string(line_no) + ": bad number '" +
                          cell + "'");
      }
    }
    if (cells.size() < col.size()) {
      throw FormatError("diagnostics line " + std::to_string(line_no) + " is short");
    }
    auto at = [&](const char* name) { return cells[col.at(name)]; };
    DiagnosticsRow r;
    r.iter = static_cast<Index>(at("iter"));
    r.objective = at("objective");
    r.lagrangian = at("lagrangian");
    r.gap = at("gap");
    r.residuals = {at("res_f"), at("res_lambda"), at("res_psi"), at("res_gap")};
    r.fit = at("fit");
    r.d_f = at("d_f");
    r.d_lambda = at("d_lambda");
    r.d_psi = at("d_psi");
    r.d_gamma = at("d_gamma");
    r.norm_f = at("norm_f");
    r.norm_lambda = at("norm_lambda");
    r.norm_psi = at("norm_psi");
    r.norm_gamma = at("norm_gamma");
    rows.push_back(r);
  }
  return rows;
}

// ---- problem -------------------------------------------------------------------

Problem::Problem(Sinogram g, SolverConfig cfg) : Problem(std::move(g), std::move(cfg), nullptr) {}

Problem::Problem(Sinogram g, SolverConfig cfg, denoise::DenoiserPtr denoiser)
    : g_((g.validate(), std::move(g))),
      cfg_((cfg.validate(), std::move(cfg))),
      op_(g_.n_det(), g_.angles),
      denoiser_(denoiser ? std::move(denoiser) : denoise::make_denoiser(cfg_.denoiser)) {
  if (g_.p() == 0) throw ValidationError("sinogram has no projections");
  if (cfg_.d > g_.p()) {
    throw ValidationError("temporal dimension d=" + std::to_string(cfg_.d) +
                          " exceeds the number of frames " + std::to_string(g_.p()));
  }
  if (cfg_.k > std::min(g_.p(), op_.n() * op_.n())) {
    throw ValidationError("PSM order k exceeds min(N^2, P)");
  }
  u_ = psm::temporal_basis(cfg_.basis, g_.p(), cfg_.d);
  backprojected_data_ = op_.adjoint(g_.data);
  if (auto exact = denoiser_->exact_lipschitz()) {
    lipschitz_d_ = *exact;
  } else if (cfg_.denoiser.lipschitz_hint) {
    lipschitz_d_ = *cfg_.denoiser.lipschitz_hint;
  } else {
    lipschitz_d_ = denoise::estimate_lipschitz(*denoiser_, op_.n(), 8, cfg_.seed).sampled;
  }
}

Mat Problem::data_residual(const Mat& product) const { return op_.forward(product) - g_.data; }

double Problem::rho_bar(const Mat& f) const {
  return 0.5 * dot(f, f - denoise::apply_frames(*denoiser_, f, n()));
}

Mat Problem::grad_rho_bar(const Mat& f) const {
  return f - denoise::apply_frames(*denoiser_, f, n());
}

double Problem::s_lambda(const SolverState& s, const Mat& lambda) const {
  const Mat psi = s.psi();
  const Mat x = lambda * psi.transpose();
  return data_residual(x).squaredNorm() + cfg_.xi * lambda.squaredNorm() +
         0.5 * cfg_.beta * (x - s.f + s.gamma).squaredNorm();
}

Mat Problem::grad_lambda(const SolverState& s, const Mat& lambda) const {
  const Mat psi = s.psi();
  const Mat x = lambda * psi.transpose();
  return 2.0 * op_.adjoint(data_residual(x)) * psi + 2.0 * cfg_.xi * lambda +
         cfg_.beta * (x - s.f + s.gamma) * psi;
}

double Problem::s_z(const SolverState& s, const Mat& z) const {
  const Mat psi = s.factors.u * z;
  const Mat x = s.factors.lambda * psi.transpose();
  return data_residual(x).squaredNorm() + cfg_.xi * psi.squaredNorm() +
         0.5 * cfg_.beta * (x - s.f + s.gamma).squaredNorm();
}

Mat Problem::grad_z(const SolverState& s, const Mat& z) const {
  const Mat& lambda = s.factors.lambda;
  const Mat psi = s.factors.u * z;
  const Mat x = lambda * psi.transpose();
  const Mat grad_psi = 2.0 * op_.adjoint(data_residual(x)).transpose() * lambda +
                       2.0 * cfg_.xi * psi + cfg_.beta * (x - s.f + s.gamma).transpose() * lambda;
  return s.factors.u.transpose() * grad_psi;
}

double Problem::s_f(const SolverState& s, const Mat& f) const {
  const double reg = cfg_.lambda == 0.0 ? 0.0 : cfg_.lambda * rho_bar(f);
  return reg + 0.5 * cfg_.beta * (s.product() + s.gamma - f).squaredNorm();
}

Mat Problem::grad_f(const SolverState& s, const Mat& f) const {
  Mat g = -cfg_.beta * (s.product() + s.gamma - f);
  if (cfg_.lambda != 0.0) g += cfg_.lambda * grad_rho_bar(f);
  return g;
}

void Problem::lambda_step(SolverState& s) const {
  if (cfg_.inner_method == InnerMethod::Adam) {
    std::vector<Mat> x{s.factors.lambda};
    optim::adam_minimize(
        x, [&](const std::vector<Mat>& v) { return s_lambda(s, v[0]); },
        [&](const std::vector<Mat>& v) { return std::vector<Mat>{grad_lambda(s, v[0])}; },
        cfg_.inner_iters, cfg_.inner_step);
    s.factors.lambda = std::move(x[0]);
    return;
  }
  const Mat psi = s.psi();
  const Mat gram = psi.transpose() * psi;
  const Mat b = 2.0 * backprojected_data_ * psi + cfg_.beta * (s.f - s.gamma) * psi;
  auto hessian = [&](const Mat& x) -> Mat {
    return 2.0 * op_.adjoint(op_.forward(x * psi.transpose())) * psi + 2.0 * cfg_.xi * x +
           cfg_.beta * x * gram;
  };
  optim::conjugate_gradient(s.factors.lambda, b, hessian, cfg_.inner_iters);
}

void Problem::psi_step(SolverState& s) const {
  if (cfg_.inner_method == InnerMethod::Adam) {
    std::vector<Mat> x{s.factors.z};
    optim::adam_minimize(
        x, [&](const std::vector<Mat>& v) { return s_z(s, v[0]); },
        [&](const std::vector<Mat>& v) { return std::vector<Mat>{grad_z(s, v[0])}; },
        cfg_.inner_iters, cfg_.inner_step);
    s.factors.z = std::move(x[0]);
    return;
  }
  const Mat& lambda = s.factors.lambda;
  const Mat& u = s.factors.u;
  const Mat gram = lambda.transpose() * lambda;
  const Mat b = u.transpose() * (2.0 * backprojected_data_.transpose() * lambda +
                                 cfg_.beta * (s.f - s.gamma).transpose() * lambda);
  auto hessian = [&](const Mat& y) -> Mat {
    const Mat psi = u * y;
    const Mat data = op_.adjoint(op_.forward(lambda * psi.transpose())).transpose() * lambda;
    return u.transpose() * (2.0 * data + 2.0 * cfg_.xi * psi + cfg_.beta * psi * gram);
  };
  optim::conjugate_gradient(s.factors.z, b, hessian, cfg_.inner_iters);
}

void Problem::joint_step(SolverState& s) const {
  auto value = [&](const std::vector<Mat>& v) {
    const Mat psi = s.factors.u * v[1];
    const Mat x = v[0] * psi.transpose();
    return data_residual(x).squaredNorm() + cfg_.xi * (v[0].squaredNorm() + psi.squaredNorm()) +
           0.5 * cfg_.beta * (x - s.f + s.gamma).squaredNorm();
  };
  auto gradient = [&](const std::vector<Mat>& v) {
    const Mat psi = s.factors.u * v[1];
    const Mat x = v[0] * psi.transpose();
    const Mat back = op_.adjoint(data_residual(x));
    const Mat coupling = x - s.f + s.gamma;
    Mat gl = 2.0 * back * psi + 2.0 * cfg_.xi * v[0] + cfg_.beta * coupling * psi;
    Mat gp = 2.0 * back.transpose() * v[0] + 2.0 * cfg_.xi * psi +
             cfg_.beta * coupling.transpose() * v[0];
    return std::vector<Mat>{std::move(gl), s.factors.u.transpose() * gp};
  };
  std::vector<Mat> x{s.factors.lambda, s.factors.z};
  optim::adam_minimize(x, value, gradient, cfg_.inner_iters, cfg_.inner_step);
  s.factors.lambda = std::move(x[0]);
  s.factors.z = std::move(x[1]);
}

void Problem::f_step_efficient(SolverState& s) const {
  const double total = cfg_.lambda + cfg_.beta;
  if (total == 0.0) throw ValidationError("efficient f-step needs lambda + beta > 0");
  const double wd = cfg_.lambda / total;
  const double wc = cfg_.beta / total;
  const Mat target = s.product() + s.gamma;
  if (wd == 0.0) {
    s.f = target;
    return;
  }
  s.f = wd * denoise::apply_frames(*denoiser_, s.f, n()) + wc * target;
}

void Problem::f_step_exact(SolverState& s) const {
  const double step = 1.0 / (cfg_.lambda * (1.0 + lipschitz_d_) + cfg_.beta);
  for (Index it = 0; it < cfg_.inner_iters; ++it) {
    const Mat g = grad_f(s, s.f);
    if (g.norm() < cfg_.f_exact_tol) break;
    s.f -= step * g;
  }
}

void Problem::dual_step(SolverState& s) const { s.gamma += s.product() - s.f; }

double Problem::objective_h(const SolverState& s) const {
  const Mat x = s.product();
  double h = data_residual(x).squaredNorm() + cfg_.xi * s.factors.lambda.squaredNorm() +
             cfg_.xi * s.psi().squaredNorm();
  if (cfg_.lambda != 0.0) h += cfg_.lambda * rho_bar(x);
  return h;
}

double Problem::augmented_lagrangian(const SolverState& s) const {
  const Mat x = s.product();
  const Mat gap = x - s.f;
  double value = data_residual(x).squaredNorm() + cfg_.xi * s.factors.lambda.squaredNorm() +
                 cfg_.xi * s.psi().squaredNorm() + cfg_.beta * dot(s.gamma, gap) +
                 0.5 * cfg_.beta * gap.squaredNorm();
  if (cfg_.lambda != 0.0) value += cfg_.lambda * rho_bar(s.f);
  return value;
}

Residuals Problem::stationarity_residuals(const SolverState& s) const {
  Residuals r;
  Mat rf = -cfg_.beta * s.gamma;
  if (cfg_.lambda != 0.0) rf += cfg_.lambda * grad_rho_bar(s.f);
  r.f = rf.norm();
  r.lambda = grad_lambda(s, s.factors.lambda).norm();
  r.psi = grad_z(s, s.factors.z).norm();
  r.gap = (s.product() - s.f).norm();
  return r;
}

double Problem::data_fit(const SolverState& s) const { return data_residual(s.product()).norm(); }

SolverState Problem::initial_state() const {
  SolverState s;
  s.factors = initial_factors(g_, cfg_.init, cfg_.k, u_, cfg_.init_window, cfg_.seed);
  s.f = s.product();
  s.gamma = Mat::Zero(n() * n(), p());
  return s;
}

// ---- driver --------------------------------------------------------------------

DynamicObject sliding_window_fbp(const Sinogram& g, Index window) {
  g.validate();
  const Index p = g.p();
  const Index n = g.n_det();
  if (p == 0) throw ValidationError("sinogram has no projections");
  window = std::clamp<Index>(window, std::min<Index>(2, p), p);
  const tomo::DynamicProjector op(n, g.angles);
  Mat filtered(n, p);
  for (Index t = 0; t < p; ++t) filtered.col(t) = tomo::ramp_filter(g.data.col(t));
  Mat back(n * n, p);
  parallel_for(p, [&](Index t) { back.col(t) = op.matrix(t).transpose() * filtered.col(t); });

  DynamicObject out = DynamicObject::zeros(n, p);
  const double scale = std::numbers::pi / static_cast<double>(window);
  for (Index t = 0; t < p; ++t) {
    const Index first = std::clamp<Index>(t - window / 2, 0, p - window);
    out.data.col(t) = scale * back.middleCols(first, window).rowwise().sum();
  }
  return out;
}

psm::Factors initial_factors(const Sinogram& g, Init init, Index k, const Mat& u, Index window,
                             std::uint64_t seed) {
  const Index n2 = g.n_det() * g.n_det();
  switch (init) {
    case Init::Svd:
      return psm::svd_init(sliding_window_fbp(g, window), k, u);
    case Init::Random: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      Mat z(u.cols(), k);
      for (Index j = 0; j < z.cols(); ++j)
        for (Index i = 0; i < z.rows(); ++i) z(i, j) = normal(rng);
      return psm::Factors{Mat::Zero(n2, k), z, u};
    }
    case Init::Zero:
      break;
  }
  return psm::Factors{Mat::Zero(n2, k), Mat::Zero(u.cols(), k), u};
}

RunResult run(const Sinogram& g, const SolverConfig& cfg, IterationCallback cb) {
  return run(Problem(g, cfg), std::move(cb));
}

RunResult run(const Problem& problem, IterationCallback cb) {
  const SolverConfig& cfg = problem.config();
  RunResult result;
  result.lipschitz_d = problem.lipschitz_d();
  result.beta_condition_met = cfg.beta > 2.0 * problem.lipschitz();
  if (!result.beta_condition_met) {
    log::warn("beta = " + num(cfg.beta) + " does not exceed 2 lambda (1 + L_D) = " +
              num(2.0 * problem.lipschitz()) + "; convergence guarantees do not apply");
  }

  SolverState s = problem.initial_state();
  s.validate();
  for (Index it = 1; it <= cfg.outer_iters; ++it) {
    const auto start = std::chrono::steady_clock::now();
    const SolverState prev = s;
    if (cfg.joint) {
      problem.joint_step(s);
    } else {
      problem.lambda_step(s);
      problem.psi_step(s);
    }
    if (cfg.f_step == FStep::Exact) {
      problem.f_step_exact(s);
    } else {
      problem.f_step_efficient(s);
    }
    problem.dual_step(s);
    s.iter = it;

    DiagnosticsRow row;
    row.iter = it;
    const bool finite = s.factors.lambda.allFinite() && s.factors.z.allFinite() &&
                        s.f.allFinite() && s.gamma.allFinite();
    if (finite) {
      row.objective = problem.objective_h(s);
      row.lagrangian = problem.augmented_lagrangian(s);
      row.residuals = problem.stationarity_residuals(s);
      row.gap = row.residuals.gap;
      row.fit = problem.data_fit(s);
      row.d_f = (s.f - prev.f).norm();
      row.d_lambda = (s.factors.lambda - prev.factors.lambda).norm();
      row.d_psi = (s.psi() - prev.psi()).norm();
      row.d_gamma = (s.gamma - prev.gamma).norm();
      row.norm_f = s.f.norm();
      row.norm_lambda = s.factors.lambda.norm();
      row.norm_psi = s.psi().norm();
      row.norm_gamma = s.gamma.norm();
    }
    if (!finite || !finite_row(row)) {
      throw SolverAbort("solver state became non-finite at iteration " + std::to_string(it),
                        result.diagnostics);
    }
    row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.diagnostics.push_back(row);
    if (cb) cb(s, row);

    if (cfg.stop_tol > 0.0) {
      const double scale = std::max(row.norm_f, 1e-300);
      if (row.gap <= cfg.stop_tol * scale && row.d_f <= cfg.stop_tol * scale) break;
    }
  }
  result.factors = s.factors;
  result.estimate = psm::compose(s.factors);
  result.state = std::move(s);
  return result;
}

}  // namespace redpsm::solver
