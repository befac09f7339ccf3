#include "redpsm/phantom.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "redpsm/error.hpp"
#include "redpsm/log.hpp"
#include "redpsm/parallel.hpp"
#include "redpsm/tomo.hpp"

namespace redpsm::phantom {
namespace {

struct Ellipse {
  double value, a, b, x0, y0, phi_deg;
};

// Toft's modified intensities.
constexpr std::array<Ellipse, 10> kSheppLogan{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
    {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
}};

void check_side(Index n) {
  if (n <= 0) throw ValidationError("image side must be positive");
}

double centre_of(Index n) { return 0.5 * static_cast<double>(n - 1); }

// Bilinear lookup at fractional (row, col), zero outside.
double bilinear(const ImageFrame& f, double row, double col) {
  const double i0 = std::floor(row);
  const double j0 = std::floor(col);
  const double fi = row - i0;
  const double fj = col - j0;
  double acc = 0.0;
  for (int di = 0; di <= 1; ++di) {
    const auto i = static_cast<Index>(i0) + di;
    if (i < 0 || i >= f.n) continue;
    const double wi = di ? fi : 1.0 - fi;
    if (wi == 0.0) continue;
    for (int dj = 0; dj <= 1; ++dj) {
      const auto j = static_cast<Index>(j0) + dj;
      if (j < 0 || j >= f.n) continue;
      const double wj = dj ? fj : 1.0 - fj;
      if (wj == 0.0) continue;
      acc += wi * wj * f.at(i, j);
    }
  }
  return acc;
}

bool is_power_of_two(Index v) { return v > 0 && (v & (v - 1)) == 0; }

AngleSchedule uniform_schedule(Index p, Index p_hat, double range, AngleScheme scheme) {
  if (p <= 0) throw ValidationError("number of time frames must be positive");
  if (p_hat == 0) p_hat = p;
  if (p_hat < 0 || p_hat > p) {
    throw ValidationError("distinct view count " + std::to_string(p_hat) + " must lie in [1, " +
                          std::to_string(p) + "]");
  }
  if (!(range > 0.0) || !std::isfinite(range)) throw ValidationError("angle range must be positive");

  unsigned bits = 0;
  if (scheme == AngleScheme::BitReversed) {
    if (!is_power_of_two(p_hat)) {
      throw ValidationError("bit-reversed schedules need a power-of-two distinct view count, got " +
                            std::to_string(p_hat));
    }
    while ((Index{1} << bits) < p_hat) ++bits;
  }
  AngleSchedule s;
  s.p_hat = p_hat;
  s.scheme = scheme;
  s.angles.resize(static_cast<std::size_t>(p));
  for (Index t = 0; t < p; ++t) {
    const auto slot = static_cast<std::uint64_t>(t % p_hat);
    const std::uint64_t k = scheme == AngleScheme::BitReversed ? reverse_bits(slot, bits) : slot;
    s.angles[static_cast<std::size_t>(t)] =
        static_cast<double>(k) * range / static_cast<double>(p_hat);
  }
  return s;
}

}  // namespace

ImageFrame shepp_logan(Index n) {
  check_side(n);
  ImageFrame f = ImageFrame::zeros(n);
  const double c = centre_of(n);
  const double half = 0.5 * static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const double y = (c - static_cast<double>(i)) / half;
    for (Index j = 0; j < n; ++j) {
      const double x = (static_cast<double>(j) - c) / half;
      double v = 0.0;
      for (const Ellipse& e : kSheppLogan) {
        const double phi = e.phi_deg * std::numbers::pi / 180.0;
        const double dx = x - e.x0;
        const double dy = y - e.y0;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double w = -dx * std::sin(phi) + dy * std::cos(phi);
        if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.value;
      }
      // overlapping +/- intensities leave ~1e-17 residue where they cancel
      f.at(i, j) = std::abs(v) < 1e-12 ? 0.0 : v;
    }
  }
  return f;
}

ImageFrame disc(Index n, double radius, double value) {
  check_side(n);
  ImageFrame f = ImageFrame::zeros(n);
  const double c = centre_of(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double x = static_cast<double>(j) - c;
      const double y = static_cast<double>(i) - c;
      if (x * x + y * y <= radius * radius) f.at(i, j) = value;
    }
  return f;
}

std::vector<double> warp_schedule(Index p, double c_max) {
  if (p <= 0) throw ValidationError("number of time frames must be positive");
  if (!(c_max >= 0.0) || !std::isfinite(c_max)) {
    throw ValidationError("warp magnitude must be finite and non-negative");
  }
  std::vector<double> c(static_cast<std::size_t>(p), 0.0);
  for (Index t = 1; t < p; ++t) {
    c[static_cast<std::size_t>(t)] = c_max * static_cast<double>(t) / static_cast<double>(p - 1);
  }
  return c;
}

DynamicObject warp_phantom(const ImageFrame& base, Index p, double c_max) {
  base.validate();
  const std::vector<double> c = warp_schedule(p, c_max);
  const Index n = base.n;
  const double freq = 3.0 * std::numbers::pi / static_cast<double>(n);
  auto shift = [&](double cc, double row) { return -cc * std::sin(freq * row); };

  if (c_max * freq >= 1.0) {
    log::warn("warp magnitude " + std::to_string(c_max) + " folds rows onto each other");
  }
  for (Index r = 0; r < n; ++r) {
    if (base.data.segment(r * n, n).isZero(0.0)) continue;
    const double dest = static_cast<double>(r) + shift(c_max, static_cast<double>(r));
    if (dest < 0.0 || dest > static_cast<double>(n - 1)) {
      log::warn("warp moves image content outside the frame");
      break;
    }
  }

  DynamicObject out = DynamicObject::zeros(n, p);
  parallel_for(p, [&](Index t) {
    const double ct = c[static_cast<std::size_t>(t)];
    if (ct == 0.0) {
      out.data.col(t) = base.data;
      return;
    }
    for (Index r = 0; r < n; ++r) {
      // Source row s with s + shift(s) = r, by Newton from s = r.
      double s = static_cast<double>(r);
      for (int it = 0; it < 50; ++it) {
        const double h = s + shift(ct, s) - static_cast<double>(r);
        const double dh = 1.0 - ct * freq * std::cos(freq * s);
        const double step = dh > 1e-3 ? h / dh : h;
        s -= step;
        if (std::abs(step) < 1e-13) break;
      }
      const double s0 = std::floor(s);
      const double w = s - s0;
      const auto i0 = static_cast<Index>(s0);
      for (Index j = 0; j < n; ++j) {
        double v = 0.0;
        if (i0 >= 0 && i0 < n) v += (1.0 - w) * base.at(i0, j);
        if (i0 + 1 >= 0 && i0 + 1 < n && w > 0.0) v += w * base.at(i0 + 1, j);
        out.data(r * n + j, t) = v;
      }
    }
  });
  return out;
}

DynamicObject affine_dynamic(const ImageFrame& base, Index p,
                             const std::vector<AffineParams>& params) {
  base.validate();
  if (static_cast<Index>(params.size()) != p) {
    throw DimensionError("affine motion needs one parameter set per frame");
  }
  for (const AffineParams& a : params) {
    if (!std::isfinite(a.scale) || std::abs(a.scale) < 1e-12) {
      throw ValidationError("affine scale must be finite and non-zero");
    }
  }
  const Index n = base.n;
  const double c = centre_of(n);
  DynamicObject out = DynamicObject::zeros(n, p);
  parallel_for(p, [&](Index t) {
    const AffineParams& a = params[static_cast<std::size_t>(t)];
    const double cr = std::cos(a.rotation);
    const double sr = std::sin(a.rotation);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        // Inverse map: undo translation, rotation, then scale.
        const double x = static_cast<double>(j) - c - a.tx;
        const double y = c - static_cast<double>(i) - a.ty;
        const double xs = (cr * x + sr * y) / a.scale;
        const double ys = (-sr * x + cr * y) / a.scale;
        out.data(i * n + j, t) = bilinear(base, c - ys, xs + c);
      }
  });
  return out;
}

std::uint64_t reverse_bits(std::uint64_t k, unsigned bits) {
  std::uint64_t r = 0;
  for (unsigned b = 0; b < bits; ++b) {
    r = (r << 1) | (k & 1U);
    k >>= 1;
  }
  return r;
}

AngleSchedule bit_reversed_angles(Index p, Index p_hat, double range) {
  return uniform_schedule(p, p_hat, range, AngleScheme::BitReversed);
}

AngleSchedule sequential_angles(Index p, Index p_hat, double range) {
  return uniform_schedule(p, p_hat, range, AngleScheme::Sequential);
}

Sinogram acquire(const DynamicObject& f, const AngleSchedule& schedule, double sigma,
                 std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("noise level must be finite and non-negative");
  }
  Sinogram g = tomo::project_dynamic(f, schedule.angles);
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (Index t = 0; t < g.p(); ++t)
      for (Index b = 0; b < g.n_det(); ++b) g.data(b, t) += noise(rng);
  }
  return g;
}

}  // namespace redpsm::phantom
