#include "redpsm/types.hpp"

#include <cmath>
#include <string>

#include "redpsm/error.hpp"

namespace redpsm {

ImageFrame::ImageFrame(Index side, Vec values) : n(side), data(std::move(values)) {
  if (data.size() != n * n) {
    throw DimensionError("image data length " + std::to_string(data.size()) +
                         " does not match side " + std::to_string(n));
  }
}

ImageFrame ImageFrame::zeros(Index side) { return ImageFrame(side, Vec::Zero(side * side)); }

ImageFrame ImageFrame::constant(Index side, double value) {
  return ImageFrame(side, Vec::Constant(side * side, value));
}

void ImageFrame::validate() const {
  if (n <= 0) throw ValidationError("image side must be positive");
  if (data.size() != n * n) throw DimensionError("image data length does not equal n^2");
  if (!data.allFinite()) throw ValidationError("image contains non-finite values");
}

void Projection::validate() const {
  if (!std::isfinite(angle)) throw ValidationError("projection angle is not finite");
  if (data.size() == 0) throw DimensionError("projection is empty");
  if (!data.allFinite()) throw ValidationError("projection contains non-finite values");
}

Projection Sinogram::projection(Index t) const {
  if (t < 0 || t >= p()) throw DimensionError("sinogram time index out of range");
  return Projection{angles[static_cast<std::size_t>(t)], data.col(t)};
}

void Sinogram::validate() const {
  if (static_cast<Index>(angles.size()) != data.cols()) {
    throw DimensionError("sinogram has " + std::to_string(data.cols()) + " projections but " +
                         std::to_string(angles.size()) + " angles");
  }
  if (!data.allFinite()) throw ValidationError("sinogram contains non-finite values");
  for (double a : angles) {
    if (!std::isfinite(a)) throw ValidationError("sinogram angle is not finite");
  }
}

DynamicObject::DynamicObject(Index side, Mat values) : n(side), data(std::move(values)) {
  if (data.rows() != n * n) {
    throw DimensionError("dynamic object has " + std::to_string(data.rows()) +
                         " rows, expected n^2 = " + std::to_string(n * n));
  }
}

DynamicObject DynamicObject::zeros(Index side, Index frames) {
  return DynamicObject(side, Mat::Zero(side * side, frames));
}

void DynamicObject::validate() const {
  if (data.rows() != n * n) throw DimensionError("dynamic object row count does not equal n^2");
  if (!data.allFinite()) throw ValidationError("dynamic object contains non-finite values");
}

}  // namespace redpsm
