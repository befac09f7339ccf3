#pragma once

#include <string>

#include "redpsm/types.hpp"

// Partially separable model: f = Lambda Psi^T with Psi = U Z.
namespace redpsm::psm {

struct Factors {
  Mat lambda;  // N^2 x K spatial basis
  Mat z;       // d x K latent temporal coefficients
  Mat u;       // P x d fixed interpolation basis

  Index k() const { return lambda.cols(); }
  Index d() const { return z.rows(); }
  Index p() const { return u.rows(); }
  Index side() const;
  Mat psi() const { return u * z; }

  /// Number of stored reals K N^2 + K d (U is fixed and not counted).
  Index parameter_count() const { return lambda.size() + z.size(); }

  void validate() const;
};

enum class BasisKind { Dct2, CubicSpline };

BasisKind parse_basis(const std::string& name);
std::string to_string(BasisKind kind);

/// P x d temporal interpolation basis.
///   Dct2: first d orthonormal DCT-II vectors.
///   CubicSpline: cardinal natural cubic splines on d uniform knots over [0, P-1]
///   (endpoints included), sampled at t = 0..P-1. d = 1 is the constant 1.
Mat temporal_basis(BasisKind kind, Index p, Index d);

DynamicObject compose(const Factors& factors);

/// Rank-k truncated SVD of a crude estimate: Lambda = A Sigma, Z = argmin ||U Z - B||.
/// Signs are fixed so the largest-magnitude entry of each right singular vector is
/// non-negative. Components beyond the numerical rank of f0 are zero.
Factors svd_init(const DynamicObject& f0, Index k, const Mat& u);

ImageFrame frame_extract(const DynamicObject& f, Index t);

}  // namespace redpsm::psm
