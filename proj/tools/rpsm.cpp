// rpsm: simulate, reconstruct, evaluate and diagnose dynamic tomography runs.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "redpsm/baselines.hpp"
#include "redpsm/error.hpp"
#include "redpsm/io.hpp"
#include "redpsm/log.hpp"
#include "redpsm/metrics.hpp"
#include "redpsm/phantom.hpp"
#include "redpsm/solver.hpp"

using namespace redpsm;
namespace fs = std::filesystem;

namespace {

constexpr int kExitViolation = 1;
constexpr int kExitError = 2;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_text(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

// Warnings go to stderr as they happen and are kept for run_info.
struct WarningLog {
  std::vector<std::string> lines;
  log::Sink previous;

  WarningLog() {
    previous = log::set_warning_sink([this](const std::string& m) {
      std::cerr << "warning: " << m << '\n';
      lines.push_back(m);
    });
  }
  ~WarningLog() { log::set_warning_sink(previous); }
};

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string phantom = "shepp-logan";
  std::string input;
  std::string warp = "sin";
  std::optional<double> cmax;
  Index n = 64;
  Index p = 32;
  Index phat = 0;
  std::string schedule = "bit-reversed";
  double sigma = 5e-3;
  std::uint64_t seed = 0;
  std::string out;
};

int simulate(const SimulateArgs& a) {
  ImageFrame base;
  if (a.phantom == "shepp-logan") {
    base = phantom::shepp_logan(a.n);
  } else if (a.phantom == "disc") {
    base = phantom::disc(a.n, 0.3 * static_cast<double>(a.n));
  } else {
    const DynamicObject imported = io::read_dynamic(a.input);
    base = ImageFrame(imported.n, imported.data.col(0));
  }
  DynamicObject truth;
  const double cmax = a.cmax.value_or(0.05 * static_cast<double>(base.n));
  if (a.warp == "sin") {
    truth = phantom::warp_phantom(base, a.p, cmax);
  } else {
    truth = DynamicObject(base.n, base.data.replicate(1, a.p));
  }
  const phantom::AngleSchedule sched = a.schedule == "bit-reversed"
                                           ? phantom::bit_reversed_angles(a.p, a.phat)
                                           : phantom::sequential_angles(a.p);
  const Sinogram g = phantom::acquire(truth, sched, a.sigma, a.seed);

  fs::create_directories(a.out);
  const fs::path out(a.out);
  io::write_dynamic(out / "truth.raw", truth);
  io::write_sinogram_data(out / "sinogram.raw", g);
  io::write_schedule(out / "schedule.csv", g.angles);
  std::ofstream info = open_text(out / "simulate_info.txt");
  info << "phantom=" << a.phantom << "\nwarp=" << a.warp << "\ncmax=" << num(cmax) << "\nn=" << base.n
       << "\np=" << a.p << "\nphat=" << sched.p_hat << "\nschedule=" << a.schedule << "\nsigma=" << num(a.sigma)
       << "\nseed=" << a.seed << '\n';
  std::cout << "wrote " << a.p << " frames of " << base.n << "x" << base.n << " to " << out.string() << '\n';
  return 0;
}

// ---- reconstruct -----------------------------------------------------------

struct ReconstructArgs {
  std::string method;
  std::string config;
  std::string data;
  std::string out;
  bool png = false;
};

void write_frames(const fs::path& dir, const DynamicObject& f, bool png) {
  io::write_dynamic(dir / "estimate.raw", f);
  if (!png) return;
  fs::create_directories(dir / "frames");
  for (Index t = 0; t < f.p(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04ld.png", static_cast<long>(t));
    io::write_png16(dir / "frames" / name, ImageFrame(f.n, f.data.col(t)));
  }
}

void write_diagnostics(const fs::path& dir, const solver::Diagnostics& rows) {
  std::ofstream d = open_text(dir / "diagnostics.csv");
  solver::write_diagnostics_csv(d, rows);
  std::ofstream t = open_text(dir / "timing.csv");
  solver::write_timing_csv(t, rows);
}

io::KeyValues load_config(const std::string& path) {
  if (path.empty()) {
    std::istringstream empty;
    return io::KeyValues::parse(empty, "defaults");
  }
  return io::KeyValues::load(path);
}

int reconstruct(const ReconstructArgs& a) {
  WarningLog warnings;
  const Sinogram g = io::read_sinogram(a.data);
  io::KeyValues kv = load_config(a.config);
  fs::create_directories(a.out);
  const fs::path out(a.out);
  std::ostringstream info;
  info << "method=" << a.method << '\n';

  if (a.method == "red-psm") {
    const solver::SolverConfig cfg = io::solver_config(kv);
    kv.finish();
    io::write_config(info, cfg);
    try {
      const solver::RunResult r = solver::run(g, cfg);
      io::write_factors(out, r.factors);
      write_frames(out, r.estimate, a.png);
      write_diagnostics(out, r.diagnostics);
      info << "lipschitz_d=" << num(r.lipschitz_d) << "\nbeta_condition_met=" << (r.beta_condition_met ? 1 : 0)
           << '\n';
    } catch (const solver::SolverAbort& e) {
      write_diagnostics(out, e.rows());
      throw;
    }
  } else if (a.method == "psm-tv-s" || a.method == "psm-tv-st") {
    const baselines::TvConfig cfg = io::tv_config(kv);
    kv.finish();
    io::write_config(info, cfg);
    const auto variant = a.method == "psm-tv-s" ? baselines::Variant::Spatial : baselines::Variant::SpatioTemporal;
    try {
      const baselines::TvResult r = baselines::solve_psm_tv(g, cfg, variant);
      io::write_factors(out, r.factors);
      write_frames(out, r.estimate, a.png);
      write_diagnostics(out, r.diagnostics);
      info << "epsilon_used=" << num(r.epsilon) << '\n';
    } catch (const solver::SolverAbort& e) {
      write_diagnostics(out, e.rows());
      throw;
    }
  } else if (a.method == "fbp") {
    const Index window = kv.take_index("window", 1);
    kv.finish();
    if (window < 1) throw ValidationError("window must be >= 1");
    info << "window=" << window << '\n';
    write_frames(out, window == 1 ? baselines::fbp_per_view(g) : solver::sliding_window_fbp(g, window), a.png);
  } else {
    throw ValidationError("unknown method '" + a.method + "'");
  }
  info << "warnings=" << warnings.lines.size() << '\n';
  open_text(out / "run_info.txt") << info.str();
  std::ofstream wl = open_text(out / "warnings.txt");
  for (const std::string& w : warnings.lines) wl << w << '\n';
  std::cout << a.method << ": wrote " << out.string() << '\n';
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

int evaluate(const std::string& ref_path, const std::string& est_path, const std::string& out,
             const std::string& peak, const std::string& label) {
  const DynamicObject ref = io::read_dynamic(ref_path);
  const DynamicObject est = io::read_dynamic(est_path);
  const metrics::Report rep = metrics::evaluate(
      ref, est, label, peak == "frame" ? metrics::PeakMode::Frame : metrics::PeakMode::Sequence);
  std::ofstream os = open_text(out);
  os << "frame,psnr,ssim,mae,hfen\n";
  auto row = [&](const std::string& name, const metrics::FrameMetrics& m) {
    os << name << ',' << num(m.psnr) << ',' << num(m.ssim) << ',' << num(m.mae) << ',' << num(m.hfen) << '\n';
  };
  for (std::size_t t = 0; t < rep.frames.size(); ++t) row(std::to_string(t), rep.frames[t]);
  row("mean", rep.mean);
  std::printf("%s mean: psnr %.3f dB  ssim %.4f  mae %.4g  hfen %.4g\n", label.empty() ? "estimate" : label.c_str(),
              rep.mean.psnr, rep.mean.ssim, rep.mean.mae, rep.mean.hfen);
  return 0;
}

// ---- diagnose ---------------------------------------------------------------

int diagnose(const std::string& run_dir) {
  const fs::path dir(run_dir);
  std::ifstream csv(dir / "diagnostics.csv");
  if (!csv) throw Error("no diagnostics.csv in " + run_dir);
  const solver::Diagnostics rows = solver::read_diagnostics_csv(csv);
  io::KeyValues info = io::KeyValues::load(dir / "run_info.txt");
  const std::string method = info.take_string("method", "");
  if (rows.empty()) {
    std::cout << "no iterations recorded\n";
    return 0;
  }
  int violations = 0;
  auto report = [&](const std::string& check, bool ok, const std::string& detail) {
    std::cout << (ok ? "ok    " : "FAIL  ") << check << ": " << detail << '\n';
    if (!ok) ++violations;
  };

  if (method != "red-psm") {
    Index bad = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) bad += rows[i].objective > rows[i - 1].objective;
    report("objective non-increasing", bad == 0, std::to_string(bad) + " increases over " +
                                                     std::to_string(rows.size()) + " iterations");
    return violations ? kExitViolation : 0;
  }

  const double lambda = info.take_double("lambda", 0.0);
  const double beta = info.take_double("beta", 1.0);
  const double ld = info.take_double("lipschitz_d", 1.0);
  const bool exact = info.take_string("f_step", "efficient") == "exact";
  const double l_over_b = lambda * (1.0 + ld) / beta;

  // The descent property is proven for the exact f-step; for the efficient one
  // only the trailing 80% is required to be monotone.
  const std::size_t start = exact ? 0 : rows.size() / 5;
  Index increases = 0;
  double worst = 0.0;
  for (std::size_t i = std::max<std::size_t>(start, 1); i < rows.size(); ++i) {
    const double rise = rows[i].lagrangian - rows[i - 1].lagrangian;
    if (rise > 1e-8) {
      ++increases;
      worst = std::max(worst, rise);
    }
  }
  report(exact ? "augmented Lagrangian monotone" : "augmented Lagrangian monotone (trailing 80%)",
         increases == 0, std::to_string(increases) + " increases, largest " + num(worst));

  Index negative = 0;
  for (const auto& r : rows) negative += r.lagrangian < 0.0;
  report("augmented Lagrangian >= 0", negative == 0, std::to_string(negative) + " negative values");

  if (exact) {
    Index bad = 0;
    double worst_excess = 0.0;
    for (const auto& r : rows) {
      const double excess = r.d_gamma - (l_over_b * r.d_f + 1e-9);
      if (excess > 0.0) {
        ++bad;
        worst_excess = std::max(worst_excess, excess);
      }
    }
    report("dual step bounded by (L/beta) primal step", bad == 0,
           std::to_string(bad) + " violations, L/beta = " + num(l_over_b) + ", largest excess " + num(worst_excess));
  } else {
    std::cout << "skip  dual step bound: holds only for the exact f-step\n";
  }

  const double first = rows.front().gap, last = rows.back().gap;
  const double rel = last / std::max(rows.back().norm_f, 1e-300);
  report("duality gap decays", last <= first, "first " + num(first) + ", last " + num(last) +
                                                   " (" + num(rel) + " of ||f||)");
  for (const auto& r : rows) {
    if (!std::isfinite(r.norm_f) || !std::isfinite(r.norm_lambda) || !std::isfinite(r.norm_psi) ||
        !std::isfinite(r.norm_gamma)) {
      report("iterates bounded", false, "non-finite norm at iteration " + std::to_string(r.iter));
      break;
    }
  }
  double max_norm = 0.0;
  for (const auto& r : rows) max_norm = std::max({max_norm, r.norm_f, r.norm_lambda, r.norm_psi, r.norm_gamma});
  std::cout << "info  largest iterate norm " << num(max_norm) << '\n';
  return violations ? kExitViolation : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RED-PSM dynamic tomography toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "synthesise a dynamic phantom and its time-sequential sinogram");
  s->add_option("--phantom", sim.phantom)->check(CLI::IsMember({"shepp-logan", "disc", "import"}));
  s->add_option("--input", sim.input, "raw [P, N, N] tensor whose first frame is used (--phantom import)");
  s->add_option("--warp", sim.warp)->check(CLI::IsMember({"sin", "none"}));
  s->add_option("--cmax", sim.cmax, "peak warp displacement in pixels (default 0.05 N)")->check(CLI::NonNegativeNumber);
  s->add_option("--n", sim.n)->check(CLI::PositiveNumber);
  s->add_option("--p", sim.p)->check(CLI::PositiveNumber);
  s->add_option("--phat", sim.phat, "distinct view angles (power of two, default P)")->check(CLI::NonNegativeNumber);
  s->add_option("--schedule", sim.schedule)->check(CLI::IsMember({"bit-reversed", "sequential"}));
  s->add_option("--sigma", sim.sigma)->check(CLI::NonNegativeNumber);
  s->add_option("--seed", sim.seed);
  s->add_option("--out", sim.out)->required();

  ReconstructArgs rec;
  auto* r = app.add_subcommand("reconstruct", "reconstruct a simulated or imported sinogram");
  r->add_option("--method", rec.method)->required()->check(CLI::IsMember({"red-psm", "psm-tv-s", "psm-tv-st", "fbp"}));
  r->add_option("--config", rec.config, "key=value settings file");
  r->add_option("--data", rec.data, "directory holding sinogram.raw and schedule.csv")->required();
  r->add_option("--out", rec.out)->required();
  r->add_flag("--png", rec.png, "also export every frame as 16-bit PNG");

  std::string ref, est, eval_out, peak = "sequence", label;
  auto* e = app.add_subcommand("evaluate", "per-frame PSNR, SSIM, MAE and HFEN");
  e->add_option("--ref", ref)->required();
  e->add_option("--est", est)->required();
  e->add_option("--out", eval_out)->required();
  e->add_option("--peak", peak)->check(CLI::IsMember({"sequence", "frame"}));
  e->add_option("--label", label);

  std::string run_dir;
  auto* d = app.add_subcommand("diagnose", "re-check convergence properties of a finished run");
  d->add_option("--run", run_dir)->required();

  CLI11_PARSE(app, argc, argv);
  if (sim.phantom == "import" && sim.input.empty()) {
    std::cerr << "error: --phantom import needs --input\n";
    return kExitError;
  }
  try {
    if (s->parsed()) return simulate(sim);
    if (r->parsed()) return reconstruct(rec);
    if (e->parsed()) return evaluate(ref, est, eval_out, peak, label);
    if (d->parsed()) return diagnose(run_dir);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitError;
  }
  return 0;
}
