// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "redpsm/baselines.hpp"
#include "redpsm/log.hpp"
#include "redpsm/metrics.hpp"
#include "redpsm/phantom.hpp"
#include "redpsm/red.hpp"
#include "redpsm/solver.hpp"
#include "redpsm/tomo.hpp"

using namespace redpsm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Mat random_mat(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

double rel_diff(const Mat& a, const Mat& b) {
  const double d = std::max(a.norm(), b.norm());
  return d == 0.0 ? 0.0 : (a - b).norm() / d;
}

template <class F>
Mat fd_gradient(const F& value, const Mat& x, double h) {
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

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const Outcome& o, double secs) {
  std::printf("[%s] criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rank_ratio(const Mat& f, Index k) {
  const Vec s = Eigen::JacobiSVD<Mat>(f).singularValues();
  if (k >= s.size()) return 0.0;
  return s[0] > 0.0 ? s[k] / s[0] : 0.0;
}

// Every factorised output seen by the run, for the rank criterion.
struct RankRecord {
  std::string what;
  double ratio;
};
std::vector<RankRecord> rank_records;

void record_rank(const std::string& what, const Mat& f, Index k) {
  rank_records.push_back({what, rank_ratio(f, k)});
}

// ---- 1 ---------------------------------------------------------------------

Outcome adjoint() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ang(0.0, std::numbers::pi);
  const Index n = 64;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double theta = ang(rng);
    const ImageFrame f(n, random_mat(n * n, 1, rng).col(0));
    const Projection g{theta, random_mat(n, 1, rng).col(0)};
    const double lhs = tomo::project(f, theta).data.dot(g.data);
    const double rhs = f.data.dot(tomo::backproject(g, n).data);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
  }
  return {worst < 1e-10, fmt("100 dot tests at N=64, worst relative error %.2e (< 1e-10)", worst)};
}

// ---- 2 ---------------------------------------------------------------------

Outcome gradients() {
  std::mt19937_64 rng(202);
  const Index n = 8, p = 4;
  std::vector<double> angles;
  for (Index t = 0; t < p; ++t) angles.push_back(0.2 + 0.8 * static_cast<double>(t));
  solver::SolverConfig c;
  c.k = 2;
  c.d = 3;
  c.lambda = 0.3;
  c.xi = 0.05;
  c.beta = 2.0;
  const solver::Problem pr(Sinogram{random_mat(n, p, rng), angles}, c);
  solver::SolverState s;
  s.factors = psm::Factors{random_mat(n * n, 2, rng), random_mat(3, 2, rng),
                           psm::temporal_basis(c.basis, p, 3)};
  s.f = random_mat(n * n, p, rng);
  s.gamma = random_mat(n * n, p, rng, -0.1, 0.1);

  const double e_lambda = rel_diff(pr.grad_lambda(s, s.factors.lambda),
                                   fd_gradient([&](const Mat& l) { return pr.s_lambda(s, l); }, s.factors.lambda, 1e-4));
  const double e_z = rel_diff(pr.grad_z(s, s.factors.z),
                              fd_gradient([&](const Mat& z) { return pr.s_z(s, z); }, s.factors.z, 1e-4));

  const denoise::Gaussian gauss(1.0);
  const ImageFrame fr(n, random_mat(n * n, 1, rng, 0.0, 1.0).col(0));
  const double e_rho = rel_diff(
      red::grad_rho(fr, gauss).data,
      fd_gradient([&](const Mat& x) { return red::rho(ImageFrame(n, x.col(0)), gauss); }, Mat(fr.data), 1e-4));

  DynamicObject f = DynamicObject::zeros(n, p);
  f.data = random_mat(n * n, p, rng);
  const double e_tv = rel_diff(
      baselines::tv_st(f, 0.05, 0.8, 1.3).gradient,
      fd_gradient([&](const Mat& x) { return baselines::tv_st(DynamicObject(n, x), 0.05, 0.8, 1.3).value; }, f.data,
                  1e-5));
  const double worst = std::max({e_lambda, e_z, e_rho, e_tv});
  return {worst < 1e-4, fmt("relative FD errors: Lambda %.1e, Z %.1e, rho %.1e, TV %.1e (< 1e-4)", e_lambda, e_z,
                            e_rho, e_tv)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome theorem_observables() {
  const Index n = 16, p = 8;
  const DynamicObject truth = phantom::warp_phantom(phantom::shepp_logan(n), p, 1.0);
  const Sinogram g = phantom::acquire(truth, phantom::bit_reversed_angles(p), 0.0, 0);
  solver::SolverConfig c;
  c.k = 2;
  c.d = 8;
  c.lambda = 0.5;
  const double big_l = 2.0 * c.lambda;  // gaussian: L_D = 1
  c.beta = 4.0 * big_l;
  c.xi = 1e-2;
  c.inner_iters = 50;
  c.outer_iters = 300;
  c.f_step = solver::FStep::Exact;
  c.init = solver::Init::Random;
  c.seed = 1;
  const solver::RunResult r = solver::run(g, c);
  record_rank("RED-PSM (criterion 3)", r.estimate.data, c.k);
  const auto& rows = r.diagnostics;

  double worst_rise = 0.0, min_l = rows.front().lagrangian, worst_dual = -1e300;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) worst_rise = std::max(worst_rise, rows[i].lagrangian - rows[i - 1].lagrangian);
    min_l = std::min(min_l, rows[i].lagrangian);
    worst_dual = std::max(worst_dual, rows[i].d_gamma - (big_l / c.beta * rows[i].d_f + 1e-9));
  }
  const bool a = worst_rise <= 1e-8;
  const bool b = min_l >= 0.0;
  const bool cc = worst_dual <= 0.0;
  const double gap_rel = rows.back().gap / rows.back().norm_f;
  const bool d = gap_rel < 1e-3;

  // A residual already at the f-step solve tolerance cannot fall 100x further;
  // it counts as decreased when it stays at that floor.
  constexpr double floor = 1e-9;
  auto decreased = [&](double first, double last) { return last <= first / 100.0 || (first <= floor && last <= floor); };
  const solver::Residuals r1 = rows.front().residuals, rn = rows.back().residuals;
  const bool e = decreased(r1.f, rn.f) && decreased(r1.lambda, rn.lambda) && decreased(r1.psi, rn.psi) &&
                 decreased(r1.gap, rn.gap);

  return {a && b && cc && d && e,
          fmt("(a) max rise %.1e %s (b) min L %.3g %s (c) max dual-bound excess %.1e %s (d) gap/||f|| %.1e %s "
              "(e) res f %.1e->%.1e, Lambda %.1e->%.1e, Psi %.1e->%.1e, gap %.1e->%.1e %s",
              worst_rise, a ? "ok" : "X", min_l, b ? "ok" : "X", worst_dual, cc ? "ok" : "X", gap_rel, d ? "ok" : "X",
              r1.f, rn.f, r1.lambda, rn.lambda, r1.psi, rn.psi, r1.gap, rn.gap, e ? "ok" : "X")};
}

// ---- 5, 6, 7 -----------------------------------------------------------------

struct DeskScale {
  DynamicObject truth;
  Sinogram g;
};

DeskScale desk_scale(Index p_hat) {
  const Index n = 64, p = 32;
  DeskScale s;
  s.truth = phantom::warp_phantom(phantom::shepp_logan(n), p, 0.05 * static_cast<double>(n));
  s.g = phantom::acquire(s.truth, phantom::bit_reversed_angles(p, p_hat), 5e-3, 7);
  return s;
}

solver::SolverConfig desk_red_config() {
  solver::SolverConfig c;
  c.k = 2;
  c.d = 3;
  c.lambda = 0.1;
  c.beta = 8.0 * c.lambda;
  c.xi = 1e-3;
  c.outer_iters = 100;
  c.inner_iters = 20;
  return c;
}

baselines::TvConfig desk_tv_config() {
  baselines::TvConfig c;
  c.k = 2;
  c.d = 3;
  c.lambda = 0.1;
  c.xi = 1e-3;
  c.iters = 500;
  return c;
}

double mean_psnr(const DynamicObject& truth, const DynamicObject& est) {
  return metrics::evaluate(truth, est).mean.psnr;
}

double full_frame_red_psnr = 0.0;

Outcome quality_ordering() {
  const DeskScale s = desk_scale(0);
  const solver::SolverConfig rc = desk_red_config();
  const solver::RunResult red = solver::run(s.g, rc);
  record_rank("RED-PSM (criterion 5)", red.estimate.data, rc.k);
  const baselines::TvResult tv = solve_psm_tv(s.g, desk_tv_config(), baselines::Variant::Spatial);
  record_rank("PSM-TV-S (criterion 5)", tv.estimate.data, desk_tv_config().k);
  DynamicObject fbp1;
  {
    log::ScopedCapture quiet;
    fbp1 = baselines::fbp_per_view(s.g);
  }
  const double p_red = mean_psnr(s.truth, red.estimate);
  const double p_tv = mean_psnr(s.truth, tv.estimate);
  const double p_fbp = mean_psnr(s.truth, fbp1);
  full_frame_red_psnr = p_red;
  const bool order = p_red >= p_tv + 0.5;
  const bool margin = p_red >= p_fbp + 5.0 && p_tv >= p_fbp + 5.0;
  return {order && margin, fmt("mean PSNR RED-PSM %.2f, PSM-TV-S %.2f, per-view FBP %.2f dB; RED >= TV + 0.5 %s, "
                               "both >= FBP + 5 %s",
                               p_red, p_tv, p_fbp, order ? "ok" : "X", margin ? "ok" : "X")};
}

Outcome patch_parity() {
  const DeskScale s = desk_scale(0);
  solver::SolverConfig c = desk_red_config();
  c.denoiser.patch = 8;
  c.denoiser.stride = 2;
  const solver::RunResult r = solver::run(s.g, c);
  record_rank("RED-PSM patched (criterion 6)", r.estimate.data, c.k);
  const double p = mean_psnr(s.truth, r.estimate);
  const double diff = std::abs(p - full_frame_red_psnr);
  return {diff <= 0.5, fmt("patched %.2f vs full-frame %.2f dB, |diff| %.2f (<= 0.5)", p, full_frame_red_psnr, diff)};
}

Outcome reduced_views() {
  const DeskScale s = desk_scale(4);
  const solver::SolverConfig c = desk_red_config();
  const solver::RunResult r = solver::run(s.g, c);
  record_rank("RED-PSM P^=4 (criterion 7)", r.estimate.data, c.k);
  const double p = mean_psnr(s.truth, r.estimate);
  const double loss = full_frame_red_psnr - p;
  return {loss < 1.0, fmt("P^=4 %.2f vs P^=32 %.2f dB, loss %.2f (< 1)", p, full_frame_red_psnr, loss)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome rank_constraint() {
  // A spatio-temporal TV run as well, so every method has been seen.
  const Index n = 16, p = 8;
  const DynamicObject truth = phantom::warp_phantom(phantom::shepp_logan(n), p, 1.0);
  const Sinogram g = phantom::acquire(truth, phantom::bit_reversed_angles(p), 5e-3, 3);
  baselines::TvConfig c;
  c.k = 3;
  c.d = 5;
  c.lambda_tilde = 1e-2;
  c.iters = 100;
  record_rank("PSM-TV-ST", baselines::solve_psm_tv(g, c, baselines::Variant::SpatioTemporal).estimate.data, c.k);

  double worst = 0.0;
  std::string worst_what;
  for (const auto& rec : rank_records) {
    if (rec.ratio >= worst) {
      worst = rec.ratio;
      worst_what = rec.what;
    }
  }
  return {worst < 1e-10, fmt("%zu outputs, worst sigma_{K+1}/sigma_1 %.1e (%s) (< 1e-10)", rank_records.size(),
                             worst, worst_what.c_str())};
}

// ---- 8 ---------------------------------------------------------------------

Outcome schedules_and_metrics() {
  const phantom::AngleSchedule sched = phantom::bit_reversed_angles(8);
  const int order[] = {0, 4, 2, 6, 1, 5, 3, 7};
  bool angles_ok = sched.angles.size() == 8;
  for (int i = 0; i < 8 && angles_ok; ++i) angles_ok = sched.angles[i] == order[i] * std::numbers::pi / 8.0;

  std::mt19937_64 rng(808);
  const ImageFrame a(16, random_mat(256, 1, rng, 0.0, 1.0).col(0));
  const ImageFrame b(16, random_mat(256, 1, rng, 0.0, 1.0).col(0));
  const bool identity = metrics::hfen(a, a) == 0.0 && std::abs(metrics::ssim(a, a) - 1.0) < 1e-12 &&
                        metrics::mae(a, a) == 0.0;

  double mse = 0.0, abs_sum = 0.0;
  for (Index i = 0; i < 256; ++i) {
    mse += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]) / 256.0;
    abs_sum += std::abs(a.data[i] - b.data[i]);
  }
  const double peak = a.data.maxCoeff();
  const bool psnr_ok = std::abs(metrics::psnr(a, b) - 10.0 * std::log10(peak * peak / mse)) < 1e-10;
  const bool mae_ok = std::abs(metrics::mae(a, b) - abs_sum / 256.0) < 1e-12;
  const bool hfen_dc = metrics::hfen(a, ImageFrame(16, a.data.array() + 0.5)) < 1e-8;
  const bool ok = angles_ok && identity && psnr_ok && mae_ok && hfen_dc;
  return {ok, fmt("bit-reversed P^=8 %s, identities %s, PSNR oracle %s, MAE oracle %s, HFEN(DC) %s",
                  angles_ok ? "ok" : "X", identity ? "ok" : "X", psnr_ok ? "ok" : "X", mae_ok ? "ok" : "X",
                  hfen_dc ? "ok" : "X")};
}

// ---- 9 ---------------------------------------------------------------------

Outcome determinism() {
  const Index n = 16, p = 8;
  const DynamicObject truth = phantom::warp_phantom(phantom::shepp_logan(n), p, 1.0);
  const Sinogram g = phantom::acquire(truth, phantom::bit_reversed_angles(p), 5e-3, 11);
  solver::SolverConfig c;
  c.k = 2;
  c.d = 4;
  c.lambda = 0.2;
  c.beta = 1.6;
  c.outer_iters = 30;
  c.init = solver::Init::Random;
  c.seed = 42;
  auto red_csv = [&] {
    std::ostringstream os;
    solver::write_diagnostics_csv(os, solver::run(g, c).diagnostics);
    return os.str();
  };
  baselines::TvConfig t;
  t.k = 2;
  t.d = 4;
  t.iters = 50;
  auto tv_csv = [&] {
    std::ostringstream os;
    solver::write_diagnostics_csv(os, baselines::solve_psm_tv(g, t, baselines::Variant::Spatial).diagnostics);
    return os.str();
  };
  const std::string r1 = red_csv(), r2 = red_csv(), t1 = tv_csv(), t2 = tv_csv();
  const bool ok = r1 == r2 && t1 == t2;
  return {ok, fmt("RED-PSM diagnostics identical %s (%zu bytes), PSM-TV-S identical %s", r1 == r2 ? "yes" : "no",
                  r1.size(), t1 == t2 ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, adjoint},         {2, gradients},     {3, theorem_observables},   {5, quality_ordering},
      {6, patch_parity},    {7, reduced_views}, {4, rank_constraint},       {8, schedules_and_metrics},
      {9, determinism}};
  for (const auto& [id, fn] : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(id, o, seconds_since(t0));
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
