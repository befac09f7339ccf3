#include "redpsm/psm.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

#include "redpsm/error.hpp"

namespace redpsm::psm {
namespace {

Index integer_sqrt(Index v) {
  auto r = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(v))));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

// Natural cubic spline through (knots, values), evaluated at t = 0..p-1.
Vec natural_spline(const Vec& knots, const Vec& values, Index p) {
  const Index m = knots.size();
  Vec second = Vec::Zero(m);
  if (m > 2) {
    const Index inner = m - 2;
    Mat a = Mat::Zero(inner, inner);
    Vec rhs(inner);
    for (Index i = 1; i <= inner; ++i) {
      const double h0 = knots[i] - knots[i - 1];
      const double h1 = knots[i + 1] - knots[i];
      a(i - 1, i - 1) = 2.0 * (h0 + h1);
      if (i > 1) a(i - 1, i - 2) = h0;
      if (i < inner) a(i - 1, i) = h1;
      rhs[i - 1] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
    }
    second.segment(1, inner) = a.partialPivLu().solve(rhs);
  }
  Vec out(p);
  Index seg = 0;
  for (Index t = 0; t < p; ++t) {
    const double x = static_cast<double>(t);
    while (seg < m - 2 && x > knots[seg + 1]) ++seg;
    const double h = knots[seg + 1] - knots[seg];
    const double a = (knots[seg + 1] - x) / h;
    const double b = (x - knots[seg]) / h;
    out[t] = a * values[seg] + b * values[seg + 1] +
             ((a * a * a - a) * second[seg] + (b * b * b - b) * second[seg + 1]) * h * h / 6.0;
  }
  return out;
}

}  // namespace

Index Factors::side() const {
  const Index n = integer_sqrt(lambda.rows());
  if (n * n != lambda.rows()) {
    throw DimensionError("spatial basis has " + std::to_string(lambda.rows()) +
                         " rows, which is not a square pixel count");
  }
  return n;
}

void Factors::validate() const {
  if (lambda.cols() != z.cols()) {
    throw DimensionError("Lambda has " + std::to_string(lambda.cols()) + " columns but Z has " +
                         std::to_string(z.cols()));
  }
  if (u.cols() != z.rows()) {
    throw DimensionError("U has " + std::to_string(u.cols()) + " columns but Z has " +
                         std::to_string(z.rows()) + " rows");
  }
  side();
  if (!lambda.allFinite() || !z.allFinite() || !u.allFinite()) {
    throw ValidationError("factors contain non-finite values");
  }
}

BasisKind parse_basis(const std::string& name) {
  if (name == "dct2") return BasisKind::Dct2;
  if (name == "cubic-spline") return BasisKind::CubicSpline;
  throw ValidationError("unknown temporal basis '" + name + "' (expected dct2 or cubic-spline)");
}

std::string to_string(BasisKind kind) {
  return kind == BasisKind::Dct2 ? "dct2" : "cubic-spline";
}

Mat temporal_basis(BasisKind kind, Index p, Index d) {
  if (d < 1 || p < 1 || d > p) {
    throw ValidationError("temporal basis needs 1 <= d <= P, got d=" + std::to_string(d) +
                          ", P=" + std::to_string(p));
  }
  Mat u(p, d);
  if (kind == BasisKind::Dct2) {
    const double pp = static_cast<double>(p);
    for (Index k = 0; k < d; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / pp) : std::sqrt(2.0 / pp);
      for (Index t = 0; t < p; ++t) {
        u(t, k) = scale * std::cos(std::numbers::pi * (static_cast<double>(t) + 0.5) *
                                   static_cast<double>(k) / pp);
      }
    }
    return u;
  }
  if (d == 1) {
    u.setOnes();
    return u;
  }
  Vec knots(d);
  for (Index j = 0; j < d; ++j) {
    knots[j] = static_cast<double>(j) * static_cast<double>(p - 1) / static_cast<double>(d - 1);
  }
  for (Index j = 0; j < d; ++j) u.col(j) = natural_spline(knots, Vec::Unit(d, j), p);
  return u;
}

DynamicObject compose(const Factors& factors) {
  factors.validate();
  return DynamicObject(factors.side(), factors.lambda * factors.psi().transpose());
}

Factors svd_init(const DynamicObject& f0, Index k, const Mat& u) {
  f0.validate();
  if (u.rows() != f0.p()) {
    throw DimensionError("temporal basis has " + std::to_string(u.rows()) + " rows but the object has " +
                         std::to_string(f0.p()) + " frames");
  }
  if (k < 1 || k > std::min(f0.data.rows(), f0.p())) {
    throw ValidationError("PSM order must lie in [1, min(N^2, P)], got " + std::to_string(k));
  }
  Factors out{Mat::Zero(f0.data.rows(), k), Mat::Zero(u.cols(), k), u};

  const Eigen::BDCSVD<Mat> svd(f0.data, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return out;

  const double floor = 1e-12 * sv[0];
  Mat psi0 = Mat::Zero(f0.p(), k);
  for (Index c = 0; c < k && c < sv.size(); ++c) {
    if (sv[c] <= floor) break;
    Vec left = svd.matrixU().col(c);
    Vec right = svd.matrixV().col(c);
    Index arg = 0;
    right.cwiseAbs().maxCoeff(&arg);
    if (right[arg] < 0.0) {
      left = -left;
      right = -right;
    }
    out.lambda.col(c) = sv[c] * left;
    psi0.col(c) = right;
  }
  out.z = u.colPivHouseholderQr().solve(psi0);
  return out;
}

ImageFrame frame_extract(const DynamicObject& f, Index t) {
  if (t < 0 || t >= f.p()) {
    throw DimensionError("frame index " + std::to_string(t) + " outside [0, " +
                         std::to_string(f.p()) + ")");
  }
  return ImageFrame(f.n, f.data.col(t));
}

}  // namespace redpsm::psm
