#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace redpsm {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One N x N image stored as a row-major N^2 vector: pixel (row i, col j) lives at i * N + j.
struct ImageFrame {
  Index n = 0;
  Vec data;

  ImageFrame() = default;
  ImageFrame(Index side, Vec values);

  static ImageFrame zeros(Index side);
  static ImageFrame constant(Index side, double value);

  double& at(Index row, Index col) { return data[row * n + col]; }
  double at(Index row, Index col) const { return data[row * n + col]; }

  /// Throws ValidationError / DimensionError when the invariants do not hold.
  void validate() const;
};

/// Detector readout at one view angle. Bin b sits at offset b - (n_det - 1) / 2 pixels.
struct Projection {
  double angle = 0.0;
  Vec data;

  Index n_det() const { return data.size(); }
  void validate() const;
};

/// Time-sequential projections: column t of `data` was acquired at `angles[t]`.
struct Sinogram {
  Mat data;  // n_det x P
  std::vector<double> angles;

  Index p() const { return data.cols(); }
  Index n_det() const { return data.rows(); }
  Projection projection(Index t) const;
  void validate() const;
};

/// N^2 x P matrix whose column t is the vectorised frame f_t.
struct DynamicObject {
  Index n = 0;
  Mat data;

  DynamicObject() = default;
  DynamicObject(Index side, Mat values);

  static DynamicObject zeros(Index side, Index frames);

  Index p() const { return data.cols(); }
  void validate() const;
};

}  // namespace redpsm
