#include "redpsm/denoise.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "redpsm/error.hpp"
#include "redpsm/parallel.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight files are read by memcpy and assume a little-endian host");

namespace redpsm::denoise {
namespace {

constexpr std::array<char, 6> kMagic{'R', 'P', 'D', 'N', '1', '\0'};

// Half-sample symmetric extension: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
Index reflect(Index i, Index n) {
  const Index period = 2 * n;
  Index m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

std::string format(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FormatError("weight file truncated while reading " + what);
  }
  return v;
}

void get_floats(std::ifstream& is, std::vector<float>& out, std::size_t count,
                const std::string& what) {
  out.resize(count);
  if (count == 0) return;
  if (!is.read(reinterpret_cast<char*>(out.data()),
               static_cast<std::streamsize>(count * sizeof(float)))) {
    throw FormatError("weight file truncated while reading " + what);
  }
}

// Single-channel or multi-channel feature maps, each n x n row-major.
using Maps = std::vector<Vec>;

Maps conv(const ConvLayer& layer, const Maps& in, Index n, bool relu) {
  const auto ry = static_cast<Index>(layer.kh / 2);
  const auto rx = static_cast<Index>(layer.kw / 2);
  Maps out(layer.out_ch, Vec::Zero(n * n));
  for (std::uint32_t o = 0; o < layer.out_ch; ++o) {
    Vec& dst = out[o];
    dst.setConstant(layer.bias[o]);
    for (std::uint32_t c = 0; c < layer.in_ch; ++c) {
      const Vec& src = in[c];
      for (std::uint32_t ky = 0; ky < layer.kh; ++ky)
        for (std::uint32_t kx = 0; kx < layer.kw; ++kx) {
          const double w = layer.w(o, c, ky, kx);
          if (w == 0.0) continue;
          const Index dy = static_cast<Index>(ky) - ry;
          const Index dx = static_cast<Index>(kx) - rx;
          for (Index i = 0; i < n; ++i) {
            const Index si = reflect(i + dy, n);
            for (Index j = 0; j < n; ++j) dst[i * n + j] += w * src[si * n + reflect(j + dx, n)];
          }
        }
    }
    if (relu) dst = dst.cwiseMax(0.0);
  }
  return out;
}

}  // namespace

// ---- Gaussian -------------------------------------------------------------

Gaussian::Gaussian(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("gaussian denoiser needs sigma > 0, got " + format(sigma));
  }
  const auto r = static_cast<Index>(std::ceil(4.0 * sigma));
  kernel_.resize(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (Index k = -r; k <= r; ++k) {
    const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    kernel_[static_cast<std::size_t>(k + r)] = v;
    total += v;
  }
  for (double& v : kernel_) v /= total;
}

ImageFrame Gaussian::apply(const ImageFrame& frame) const {
  frame.validate();
  const Index n = frame.n;
  const auto r = static_cast<Index>(kernel_.size() / 2);
  Vec tmp(n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Index k = -r; k <= r; ++k) {
        acc += kernel_[static_cast<std::size_t>(k + r)] * frame.data[i * n + reflect(j + k, n)];
      }
      tmp[i * n + j] = acc;
    }
  ImageFrame out = ImageFrame::zeros(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Index k = -r; k <= r; ++k) {
        acc += kernel_[static_cast<std::size_t>(k + r)] * tmp[reflect(i + k, n) * n + j];
      }
      out.data[i * n + j] = acc;
    }
  return out;
}

std::string Gaussian::name() const { return "gaussian(sigma=" + format(sigma_) + ")"; }

// ---- CNN -------------------------------------------------------------------

void CnnWeights::validate() const {
  if (mode != CnnMode::Direct && mode != CnnMode::Residual) {
    throw FormatError("unknown network mode " + std::to_string(static_cast<std::uint32_t>(mode)));
  }
  if (layers.empty()) throw FormatError("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const ConvLayer& layer = layers[l];
    const std::string where = "layer " + std::to_string(l);
    if (layer.out_ch == 0 || layer.in_ch == 0 || layer.kh == 0 || layer.kw == 0) {
      throw FormatError(where + " has an empty shape");
    }
    if (layer.kh % 2 == 0 || layer.kw % 2 == 0) {
      throw FormatError(where + " has an even kernel; same padding needs odd sizes");
    }
    const std::size_t expect =
        static_cast<std::size_t>(layer.out_ch) * layer.in_ch * layer.kh * layer.kw;
    if (layer.weights.size() != expect) {
      throw FormatError(where + " has " + std::to_string(layer.weights.size()) +
                        " weights, expected " + std::to_string(expect));
    }
    if (layer.bias.size() != layer.out_ch) throw FormatError(where + " bias length mismatch");
    const std::uint32_t want_in = l == 0 ? 1U : layers[l - 1].out_ch;
    if (layer.in_ch != want_in) {
      throw FormatError(where + " expects " + std::to_string(layer.in_ch) +
                        " input channels but receives " + std::to_string(want_in));
    }
    auto finite = [](float v) { return std::isfinite(v); };
    if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
        !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
      throw FormatError(where + " contains non-finite parameters");
    }
  }
  if (layers.back().out_ch != 1) throw FormatError("last layer must produce one channel");
}

CnnWeights load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open weight file " + path.string());
  std::array<char, 6> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError(path.string() + " is not a network weight file (bad magic)");
  }
  CnnWeights w;
  w.mode = static_cast<CnnMode>(get<std::uint32_t>(is, "mode"));
  const auto count = get<std::uint32_t>(is, "layer count");
  if (count == 0 || count > 4096) throw FormatError("implausible layer count " + std::to_string(count));
  w.layers.resize(count);
  for (std::uint32_t l = 0; l < count; ++l) {
    ConvLayer& layer = w.layers[l];
    const std::string where = "layer " + std::to_string(l);
    layer.out_ch = get<std::uint32_t>(is, where + " shape");
    layer.in_ch = get<std::uint32_t>(is, where + " shape");
    layer.kh = get<std::uint32_t>(is, where + " shape");
    layer.kw = get<std::uint32_t>(is, where + " shape");
    const std::uint64_t n =
        static_cast<std::uint64_t>(layer.out_ch) * layer.in_ch * layer.kh * layer.kw;
    if (n > (std::uint64_t{1} << 28)) throw FormatError(where + " shape is implausibly large");
    get_floats(is, layer.weights, static_cast<std::size_t>(n), where + " weights");
    get_floats(is, layer.bias, layer.out_ch, where + " bias");
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + " has trailing bytes after the last layer");
  }
  w.validate();
  return w;
}

void save_weights(const std::filesystem::path& path, const CnnWeights& weights) {
  weights.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write weight file " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put(os, static_cast<std::uint32_t>(weights.mode));
  put(os, static_cast<std::uint32_t>(weights.layers.size()));
  for (const ConvLayer& layer : weights.layers) {
    put(os, layer.out_ch);
    put(os, layer.in_ch);
    put(os, layer.kh);
    put(os, layer.kw);
    os.write(reinterpret_cast<const char*>(layer.weights.data()),
             static_cast<std::streamsize>(layer.weights.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(layer.bias.data()),
             static_cast<std::streamsize>(layer.bias.size() * sizeof(float)));
  }
  if (!os) throw FormatError("failed while writing " + path.string());
}

CnnWeights scaling_network(float scale) {
  CnnWeights w;
  w.layers.push_back(ConvLayer{1, 1, 1, 1, {scale}, {0.0F}});
  return w;
}

Cnn::Cnn(CnnWeights weights) : weights_(std::move(weights)) { weights_.validate(); }

ImageFrame Cnn::apply(const ImageFrame& frame) const {
  frame.validate();
  const Index n = frame.n;
  Maps maps{frame.data};
  for (std::size_t l = 0; l < weights_.layers.size(); ++l) {
    maps = conv(weights_.layers[l], maps, n, l + 1 < weights_.layers.size());
  }
  if (weights_.mode == CnnMode::Residual) return ImageFrame(n, frame.data - maps[0]);
  return ImageFrame(n, std::move(maps[0]));
}

std::string Cnn::name() const {
  return std::string(weights_.mode == CnnMode::Residual ? "cnn-residual" : "cnn-direct") + "(" +
         std::to_string(weights_.layers.size()) + " layers)";
}

// ---- patches ---------------------------------------------------------------

Index patch_positions(Index n, Index patch, Index stride) {
  if (patch < 1 || patch > n) {
    throw ValidationError("patch size " + std::to_string(patch) + " must lie in [1, " +
                          std::to_string(n) + "]");
  }
  if (stride < 1 || stride > patch) {
    throw ValidationError("patch stride must lie in [1, patch size]");
  }
  return (n - patch + stride - 1) / stride + 1;
}

Patched::Patched(DenoiserPtr inner, Index patch, Index stride)
    : inner_(std::move(inner)), patch_(patch), stride_(stride) {
  if (!inner_) throw ValidationError("patched denoiser needs an inner denoiser");
  if (patch_ < 1) throw ValidationError("patch size must be positive");
  if (stride_ < 1 || stride_ > patch_) {
    throw ValidationError("patch stride must lie in [1, patch size]");
  }
}

ImageFrame Patched::apply(const ImageFrame& frame) const {
  frame.validate();
  const Index n = frame.n;
  const Index count = patch_positions(n, patch_, stride_);
  const Index padded = patch_ + (count - 1) * stride_;

  Vec sum = Vec::Zero(padded * padded);
  Vec hits = Vec::Zero(padded * padded);
  ImageFrame tile = ImageFrame::zeros(patch_);
  for (Index pi = 0; pi < count; ++pi)
    for (Index pj = 0; pj < count; ++pj) {
      const Index top = pi * stride_;
      const Index left = pj * stride_;
      for (Index i = 0; i < patch_; ++i)
        for (Index j = 0; j < patch_; ++j) {
          tile.at(i, j) = frame.at(reflect(top + i, n), reflect(left + j, n));
        }
      const ImageFrame den = inner_->apply(tile);
      for (Index i = 0; i < patch_; ++i)
        for (Index j = 0; j < patch_; ++j) {
          const Index k = (top + i) * padded + left + j;
          sum[k] += den.at(i, j);
          hits[k] += 1.0;
        }
    }
  ImageFrame out = ImageFrame::zeros(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) out.at(i, j) = sum[i * padded + j] / hits[i * padded + j];
  return out;
}

std::string Patched::name() const {
  return "patched(" + inner_->name() + ", " + std::to_string(patch_) + "x" +
         std::to_string(patch_) + ", stride " + std::to_string(stride_) + ")";
}

// ---- factory ---------------------------------------------------------------

Kind parse_kind(const std::string& name) {
  if (name == "gaussian") return Kind::Gaussian;
  if (name == "cnn") return Kind::Cnn;
  throw ValidationError("unknown denoiser '" + name + "' (expected gaussian or cnn)");
}

std::string to_string(Kind kind) { return kind == Kind::Gaussian ? "gaussian" : "cnn"; }

DenoiserPtr make_denoiser(const DenoiserSpec& spec) {
  if (spec.lipschitz_hint && !(*spec.lipschitz_hint >= 0.0)) {
    throw ValidationError("Lipschitz hint must be non-negative");
  }
  DenoiserPtr base;
  if (spec.kind == Kind::Gaussian) {
    base = std::make_shared<Gaussian>(spec.sigma);
  } else {
    if (spec.weights.empty()) throw ValidationError("cnn denoiser needs a weight file");
    base = std::make_shared<Cnn>(load_weights(spec.weights));
  }
  if (spec.patch == 0) return base;
  return std::make_shared<Patched>(base, spec.patch, spec.stride == 0 ? spec.patch : spec.stride);
}

Mat apply_frames(const Denoiser& d, const Mat& frames, Index n) {
  if (frames.rows() != n * n) throw DimensionError("frames must have n^2 rows");
  Mat out(frames.rows(), frames.cols());
  parallel_for(frames.cols(), [&](Index t) { out.col(t) = d.apply(ImageFrame(n, frames.col(t))).data; });
  return out;
}

// ---- checks ----------------------------------------------------------------

LipschitzEstimate estimate_lipschitz(const Denoiser& d, Index n, int probes, std::uint64_t seed) {
  if (probes < 1) throw ValidationError("need at least one probe");
  if (n < 1) throw ValidationError("probe frames need a positive side");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_frame = [&] {
    Vec v(n * n);
    for (Index i = 0; i < v.size(); ++i) v[i] = unit(rng);
    return ImageFrame(n, std::move(v));
  };
  LipschitzEstimate est;
  est.exact = d.exact_lipschitz();
  auto consider = [&](const ImageFrame& a, const ImageFrame& b) {
    const double denom = (a.data - b.data).norm();
    if (denom == 0.0) return;
    est.sampled = std::max(est.sampled, (d.apply(a).data - d.apply(b).data).norm() / denom);
  };
  for (int p = 0; p < probes; ++p) {
    consider(random_frame(), random_frame());
    const ImageFrame base = random_frame();
    Vec delta(n * n);
    for (Index i = 0; i < delta.size(); ++i) delta[i] = 1e-3 * normal(rng);
    consider(base, ImageFrame(n, base.data + delta));
  }
  return est;
}

PassivityReport check_passivity(const Denoiser& d, const std::vector<ImageFrame>& frames) {
  PassivityReport report;
  report.ratios.reserve(frames.size());
  for (const ImageFrame& f : frames) {
    const double in = f.data.norm();
    const double out = d.apply(f).data.norm();
    double ratio = 0.0;
    if (in > 0.0) {
      ratio = out / in;
    } else if (out > 0.0) {
      ratio = std::numeric_limits<double>::infinity();
    }
    report.ratios.push_back(ratio);
    report.worst_ratio = std::max(report.worst_ratio, ratio);
    if (ratio > 1.0) ++report.violations;
  }
  return report;
}

}  // namespace redpsm::denoise
