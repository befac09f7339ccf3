#pragma once

#include <cstdint>
#include <vector>

#include "redpsm/types.hpp"

// Dynamic test objects and acquisition schedules.
namespace redpsm::phantom {

/// Modified (high-contrast) Shepp-Logan head, scaled so the skull fits the inscribed disc.
ImageFrame shepp_logan(Index n);

/// Uniform disc of the given radius (pixels) centred on the grid.
ImageFrame disc(Index n, double radius, double value = 1.0);

/// Linear ramp C(t) = c_max * t / (P - 1); C(0) = 0. P = 1 gives {0}.
std::vector<double> warp_schedule(Index p, double c_max);

/// Frame t moves the content of row r vertically by -C(t) sin(3 pi r / N) rows
/// (positive = downwards in row index). Resampled with linear interpolation
/// along each column, zero outside the grid.
DynamicObject warp_phantom(const ImageFrame& base, Index p, double c_max);

struct AffineParams {
  double tx = 0.0;        // pixels, +x = right
  double ty = 0.0;        // pixels, +y = up
  double scale = 1.0;
  double rotation = 0.0;  // radians, counter-clockwise
};

/// Frame t is `base` translated, scaled and rotated about the grid centre
/// (bilinear, zero outside). params.size() must equal p.
DynamicObject affine_dynamic(const ImageFrame& base, Index p,
                             const std::vector<AffineParams>& params);

enum class AngleScheme { BitReversed, Sequential };

struct AngleSchedule {
  std::vector<double> angles;
  Index p_hat = 0;
  AngleScheme scheme = AngleScheme::BitReversed;
};

/// Reverses the lowest `bits` bits of k.
std::uint64_t reverse_bits(std::uint64_t k, unsigned bits);

/// Distinct angles k * range / p_hat visited in bit-reversed order of k, repeated
/// to length p. p_hat must be a power of two no larger than p; 0 means p_hat = p.
AngleSchedule bit_reversed_angles(Index p, Index p_hat = 0, double range = 3.141592653589793);

/// Same grid, visited in increasing order.
AngleSchedule sequential_angles(Index p, Index p_hat = 0, double range = 3.141592653589793);

/// g_t = R_{theta_t} f_t + sigma * N(0, 1), one draw per detector bin.
Sinogram acquire(const DynamicObject& f, const AngleSchedule& schedule, double sigma,
                 std::uint64_t seed);

}  // namespace redpsm::phantom
