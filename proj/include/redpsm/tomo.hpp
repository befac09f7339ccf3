#pragma once

#include <Eigen/SparseCore>
#include <map>
#include <memory>
#include <vector>

#include "redpsm/types.hpp"

// Discrete parallel-beam Radon transform.
//
// Pixels are unit squares with constant density, detector bins are unit
// intervals centred on the image, and a bin reads the integral of the
// continuous projection over its width. Each pixel therefore contributes a
// trapezoid (the shadow of the square) integrated over the bin, which makes
// the operator an explicit sparse matrix whose transpose is the exact adjoint.
namespace redpsm::tomo {

using SparseRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Weight with which a unit pixel whose centre projects to detector coordinate s_p
/// contributes to the bin centred at s_p + offset, for a view direction (cos, sin).
double footprint_weight(double offset, double cos_t, double sin_t);

/// R_theta as an n x n^2 sparse matrix.
SparseRowMat system_matrix(Index n, double angle);

Projection project(const ImageFrame& frame, double angle);

/// R_theta^T g onto an n x n grid. The projection must have n detector bins.
ImageFrame backproject(const Projection& proj, Index n);

/// The whole-sequence operator: frame t is seen only at angle t.
/// System matrices are built once per distinct angle and shared.
class DynamicProjector {
 public:
  DynamicProjector(Index n, std::vector<double> angles);

  Index n() const { return n_; }
  Index p() const { return static_cast<Index>(angles_.size()); }
  const std::vector<double>& angles() const { return angles_; }
  const SparseRowMat& matrix(Index t) const { return *per_time_[static_cast<std::size_t>(t)]; }

  /// (n^2 x P) -> (n x P).
  Mat forward(const Mat& f) const;
  /// (n x P) -> (n^2 x P).
  Mat adjoint(const Mat& g) const;

 private:
  Index n_;
  std::vector<double> angles_;
  std::map<double, std::shared_ptr<const SparseRowMat>> unique_;
  std::vector<const SparseRowMat*> per_time_;
};

Sinogram project_dynamic(const DynamicObject& f, const std::vector<double>& angles);
DynamicObject adjoint_dynamic(const Sinogram& g);

/// Ram-Lak filtering of one projection (spatial-domain band-limited ramp, FFT
/// convolution with zero padding to the next power of two >= 2 n_det).
Vec ramp_filter(const Vec& projection);

struct FbpResult {
  ImageFrame image;
  bool degenerate = false;  // fewer than two views
};

/// Filtered backprojection treating all views as one static object.
/// A single view is accepted but flagged (and warned about); no views is an error.
FbpResult fbp(const Sinogram& g);
ImageFrame fbp_static(const Sinogram& g);

}  // namespace redpsm::tomo
