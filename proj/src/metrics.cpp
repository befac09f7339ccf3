#include "redpsm/metrics.hpp"

#include <cmath>

#include "redpsm/error.hpp"

namespace redpsm::metrics {
namespace {

void check_pair(const ImageFrame& ref, const ImageFrame& est) {
  ref.validate();
  est.validate();
  if (ref.n != est.n) {
    throw DimensionError("metric inputs differ in size: " + std::to_string(ref.n) + " vs " +
                         std::to_string(est.n));
  }
}

Index mirror(Index i, Index n) {
  const Index period = 2 * n;
  Index m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

constexpr Index kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

Vec gaussian_window() {
  Vec w(kSsimWindow);
  const double c = 0.5 * static_cast<double>(kSsimWindow - 1);
  for (Index i = 0; i < kSsimWindow; ++i) {
    const double x = static_cast<double>(i) - c;
    w[i] = std::exp(-0.5 * x * x / (kSsimSigma * kSsimSigma));
  }
  return w / w.sum();
}

// Separable "valid" filtering of an n x n row-major image with a 1-D window.
Mat valid_filter(const Vec& img, Index n, const Vec& w) {
  const Index m = n - w.size() + 1;
  Mat rows(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) {
      double acc = 0.0;
      for (Index k = 0; k < w.size(); ++k) acc += w[k] * img[i * n + j + k];
      rows(i, j) = acc;
    }
  Mat out(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) {
      double acc = 0.0;
      for (Index k = 0; k < w.size(); ++k) acc += w[k] * rows(i + k, j);
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

double psnr(const ImageFrame& ref, const ImageFrame& est, std::optional<double> peak) {
  check_pair(ref, est);
  const double pk = peak ? *peak : ref.data.maxCoeff();
  const double mse = (ref.data - est.data).squaredNorm() / static_cast<double>(ref.data.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(pk * pk / mse));
}

double ssim(const ImageFrame& ref, const ImageFrame& est, std::optional<double> data_range) {
  check_pair(ref, est);
  const Index n = ref.n;
  if (n < kSsimWindow) {
    throw ValidationError("SSIM needs frames of at least " + std::to_string(kSsimWindow) +
                          " pixels per side");
  }
  double range = data_range ? *data_range : ref.data.maxCoeff() - ref.data.minCoeff();
  if (!(range > 0.0)) range = 1.0;
  const double c1 = std::pow(0.01 * range, 2);
  const double c2 = std::pow(0.03 * range, 2);
  const Vec w = gaussian_window();
  const Vec& x = ref.data;
  const Vec& y = est.data;
  const Mat mx = valid_filter(x, n, w);
  const Mat my = valid_filter(y, n, w);
  const Mat sxx = valid_filter(x.cwiseProduct(x), n, w) - mx.cwiseProduct(mx);
  const Mat syy = valid_filter(y.cwiseProduct(y), n, w) - my.cwiseProduct(my);
  const Mat sxy = valid_filter(x.cwiseProduct(y), n, w) - mx.cwiseProduct(my);
  const Mat num = (2.0 * mx.cwiseProduct(my).array() + c1) * (2.0 * sxy.array() + c2);
  const Mat den = (mx.array().square() + my.array().square() + c1) * (sxx.array() + syy.array() + c2);
  return (num.array() / den.array()).mean();
}

double mae(const ImageFrame& ref, const ImageFrame& est) {
  check_pair(ref, est);
  return (ref.data - est.data).cwiseAbs().mean();
}

Mat log_kernel() {
  constexpr Index size = 15;
  constexpr double sigma = 1.5;
  const double c = 0.5 * (size - 1);
  Mat g(size, size);
  for (Index i = 0; i < size; ++i)
    for (Index j = 0; j < size; ++j) {
      const double r2 = std::pow(i - c, 2) + std::pow(j - c, 2);
      g(i, j) = std::exp(-r2 / (2.0 * sigma * sigma));
    }
  g /= g.sum();
  Mat h(size, size);
  for (Index i = 0; i < size; ++i)
    for (Index j = 0; j < size; ++j) {
      const double r2 = std::pow(i - c, 2) + std::pow(j - c, 2);
      h(i, j) = g(i, j) * (r2 - 2.0 * sigma * sigma) / std::pow(sigma, 4);
    }
  return h.array() - h.mean();
}

double hfen(const ImageFrame& ref, const ImageFrame& est) {
  check_pair(ref, est);
  const Index n = ref.n;
  const Mat k = log_kernel();
  const Index r = k.rows() / 2;
  const Vec diff = est.data - ref.data;
  double total = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Index a = -r; a <= r; ++a)
        for (Index b = -r; b <= r; ++b) {
          acc += k(a + r, b + r) * diff[mirror(i + a, n) * n + mirror(j + b, n)];
        }
      total += acc * acc;
    }
  return std::sqrt(total);
}

Report evaluate(const DynamicObject& ref, const DynamicObject& est, const std::string& method,
                PeakMode mode) {
  ref.validate();
  est.validate();
  if (ref.n != est.n || ref.p() != est.p()) {
    throw DimensionError("reference and estimate sequences differ in shape");
  }
  Report rep;
  rep.method = method;
  const double peak = ref.data.maxCoeff();
  const double range = ref.data.maxCoeff() - ref.data.minCoeff();
  for (Index t = 0; t < ref.p(); ++t) {
    const ImageFrame a(ref.n, ref.data.col(t));
    const ImageFrame b(est.n, est.data.col(t));
    FrameMetrics m;
    if (mode == PeakMode::Sequence) {
      m.psnr = psnr(a, b, peak);
      m.ssim = ssim(a, b, range);
    } else {
      m.psnr = psnr(a, b);
      m.ssim = ssim(a, b);
    }
    m.mae = mae(a, b);
    m.hfen = hfen(a, b);
    rep.frames.push_back(m);
  }
  const double p = static_cast<double>(ref.p());
  for (const FrameMetrics& m : rep.frames) {
    rep.mean.psnr += m.psnr / p;
    rep.mean.ssim += m.ssim / p;
    rep.mean.mae += m.mae / p;
    rep.mean.hfen += m.hfen / p;
  }
  return rep;
}

}  // namespace redpsm::metrics
