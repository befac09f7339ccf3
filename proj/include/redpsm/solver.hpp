#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "redpsm/denoise.hpp"
#include "redpsm/error.hpp"
#include "redpsm/psm.hpp"
#include "redpsm/tomo.hpp"
#include "redpsm/types.hpp"

// Bilinear ADMM for RED-PSM.
//
//   min  sum_t ||R_t Lambda Psi^T e_t - g_t||^2 + lambda rho_bar(f)
//        + xi ||Lambda||^2 + xi ||Psi||^2     s.t.  f = Lambda Psi^T,  Psi = U Z
//
// with scaled dual gamma and penalty beta.
namespace redpsm::solver {

enum class FStep { Efficient, Exact };
enum class InnerMethod { ConjugateGradient, Adam };
enum class Init { Svd, Random, Zero };

FStep parse_f_step(const std::string& s);
InnerMethod parse_inner_method(const std::string& s);
Init parse_init(const std::string& s);
std::string to_string(FStep v);
std::string to_string(InnerMethod v);
std::string to_string(Init v);

struct SolverConfig {
  Index k = 4;
  Index d = 8;
  double lambda = 1e-2;
  double xi = 1e-3;
  double beta = 1.0;
  Index outer_iters = 200;
  Index inner_iters = 20;
  InnerMethod inner_method = InnerMethod::ConjugateGradient;
  double inner_step = 1e-2;  // Adam learning rate
  bool joint = false;        // Lambda and Z minimised together (Adam)
  FStep f_step = FStep::Efficient;
  double f_exact_tol = 1e-10;
  psm::BasisKind basis = psm::BasisKind::Dct2;
  Init init = Init::Svd;
  Index init_window = 8;  // views per sliding-window FBP frame for the svd start
  std::uint64_t seed = 0;
  denoise::DenoiserSpec denoiser;
  double stop_tol = 0.0;  // 0 runs all outer iterations

  void validate() const;
};

struct SolverState {
  psm::Factors factors;
  Mat f;
  Mat gamma;
  Index iter = 0;

  Mat psi() const { return factors.psi(); }
  Mat product() const { return factors.lambda * factors.psi().transpose(); }
  void validate() const;
};

struct Residuals {
  double f = 0.0;       // ||lambda grad rho_bar(f) - beta gamma||
  double lambda = 0.0;  // ||grad_Lambda L||
  double psi = 0.0;     // ||U^T grad_Psi L|| (stationarity in the Z parametrisation)
  double gap = 0.0;     // ||Lambda Psi^T - f||
};

struct DiagnosticsRow {
  Index iter = 0;
  double objective = 0.0;   // H
  double lagrangian = 0.0;  // L_beta
  double gap = 0.0;
  Residuals residuals;
  double fit = 0.0;  // ||R Lambda Psi^T - g||
  double d_f = 0.0, d_lambda = 0.0, d_psi = 0.0, d_gamma = 0.0;
  double norm_f = 0.0, norm_lambda = 0.0, norm_psi = 0.0, norm_gamma = 0.0;
  double wall_ms = 0.0;  // not part of the deterministic CSV
};

using Diagnostics = std::vector<DiagnosticsRow>;

/// Header + one row per iteration. Timing is written separately so two
/// identical runs produce byte-identical files.
void write_diagnostics_csv(std::ostream& os, const Diagnostics& rows);
void write_timing_csv(std::ostream& os, const Diagnostics& rows);
Diagnostics read_diagnostics_csv(std::istream& is);

/// Thrown when an iterate stops being finite. Carries every row recorded so far.
class SolverAbort : public Error {
 public:
  SolverAbort(const std::string& what, Diagnostics rows) : Error(what), rows_(std::move(rows)) {}
  const Diagnostics& rows() const { return rows_; }

 private:
  Diagnostics rows_;
};

/// Everything the individual steps need: data, operator, denoiser and weights.
class Problem {
 public:
  Problem(Sinogram g, SolverConfig cfg);
  Problem(Sinogram g, SolverConfig cfg, denoise::DenoiserPtr denoiser);

  const Sinogram& data() const { return g_; }
  const SolverConfig& config() const { return cfg_; }
  const tomo::DynamicProjector& op() const { return op_; }
  const denoise::Denoiser& denoiser() const { return *denoiser_; }
  Index n() const { return op_.n(); }
  Index p() const { return op_.p(); }

  /// L_D: exact when the denoiser has one, else the configured hint, else sampled.
  double lipschitz_d() const { return lipschitz_d_; }
  /// L = lambda (1 + L_D).
  double lipschitz() const { return cfg_.lambda * (1.0 + lipschitz_d_); }

  // -- subproblem objectives and gradients (exposed for testing) --
  double s_lambda(const SolverState& s, const Mat& lambda) const;
  Mat grad_lambda(const SolverState& s, const Mat& lambda) const;
  double s_z(const SolverState& s, const Mat& z) const;
  Mat grad_z(const SolverState& s, const Mat& z) const;
  double s_f(const SolverState& s, const Mat& f) const;
  Mat grad_f(const SolverState& s, const Mat& f) const;

  // -- steps --
  void lambda_step(SolverState& s) const;
  void psi_step(SolverState& s) const;
  void joint_step(SolverState& s) const;
  void f_step_efficient(SolverState& s) const;
  void f_step_exact(SolverState& s) const;
  void dual_step(SolverState& s) const;

  // -- observables --
  double objective_h(const SolverState& s) const;
  double augmented_lagrangian(const SolverState& s) const;
  Residuals stationarity_residuals(const SolverState& s) const;
  double data_fit(const SolverState& s) const;

  SolverState initial_state() const;

 private:
  Mat data_residual(const Mat& product) const;  // R(product) - g
  double rho_bar(const Mat& f) const;
  Mat grad_rho_bar(const Mat& f) const;

  Sinogram g_;
  SolverConfig cfg_;
  tomo::DynamicProjector op_;
  denoise::DenoiserPtr denoiser_;
  Mat u_;
  Mat backprojected_data_;  // R^T g, fixed
  double lipschitz_d_ = 1.0;
};

struct RunResult {
  psm::Factors factors;
  DynamicObject estimate;  // Lambda Psi^T
  SolverState state;
  Diagnostics diagnostics;
  double lipschitz_d = 0.0;
  bool beta_condition_met = false;  // beta > 2 lambda (1 + L_D)
};

using IterationCallback = std::function<void(const SolverState&, const DiagnosticsRow&)>;

/// Init, then outer iterations of (Lambda, Z, f, gamma) updates.
RunResult run(const Sinogram& g, const SolverConfig& cfg, IterationCallback cb = {});
RunResult run(const Problem& problem, IterationCallback cb = {});

/// Sliding-window FBP: frame t uses the `window` views centred on t.
DynamicObject sliding_window_fbp(const Sinogram& g, Index window);

/// Starting factors shared by RED-PSM and the TV baselines.
///   Svd: truncated SVD of a sliding-window FBP estimate.
///   Random: Lambda = 0, Z ~ N(0, 1) (so f = Lambda Psi^T = 0).
///   Zero: everything zero.
psm::Factors initial_factors(const Sinogram& g, Init init, Index k, const Mat& u, Index window,
                             std::uint64_t seed);

}  // namespace redpsm::solver
