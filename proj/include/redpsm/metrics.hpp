#pragma once

#include <optional>
#include <string>
#include <vector>

#include "redpsm/types.hpp"

// Image quality metrics.
namespace redpsm::metrics {

/// Value reported for a perfect reconstruction (zero MSE) and the ceiling for any PSNR.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(peak^2 / MSE); peak defaults to max(ref).
double psnr(const ImageFrame& ref, const ImageFrame& est, std::optional<double> peak = {});

/// Single-scale SSIM with an 11 x 11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// averaged over every fully contained window. data_range defaults to max(ref) - min(ref).
double ssim(const ImageFrame& ref, const ImageFrame& est, std::optional<double> data_range = {});

double mae(const ImageFrame& ref, const ImageFrame& est);

/// 15 x 15 zero-sum Laplacian-of-Gaussian (sigma 1.5) with symmetric borders.
Mat log_kernel();

/// || LoG(est) - LoG(ref) ||_2.
double hfen(const ImageFrame& ref, const ImageFrame& est);

struct FrameMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  double mae = 0.0;
  double hfen = 0.0;
};

struct Report {
  std::string method;
  std::vector<FrameMetrics> frames;
  FrameMetrics mean;
};

enum class PeakMode { Sequence, Frame };

/// Per-frame metrics plus their means. With PeakMode::Sequence the PSNR peak and
/// the SSIM range come from the whole reference sequence.
Report evaluate(const DynamicObject& ref, const DynamicObject& est, const std::string& method = "",
                PeakMode mode = PeakMode::Sequence);

}  // namespace redpsm::metrics
