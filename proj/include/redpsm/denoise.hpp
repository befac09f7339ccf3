#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "redpsm/types.hpp"

// Image-to-image denoisers D used by the RED prior.
namespace redpsm::denoise {

class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual ImageFrame apply(const ImageFrame& frame) const = 0;
  virtual std::string name() const = 0;

  /// A proven Lipschitz constant, when the operator admits one analytically.
  virtual std::optional<double> exact_lipschitz() const { return std::nullopt; }
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

/// Separable normalised Gaussian blur, radius ceil(4 sigma), half-sample
/// symmetric boundary. The induced matrix is symmetric and doubly stochastic.
class Gaussian final : public Denoiser {
 public:
  explicit Gaussian(double sigma);

  ImageFrame apply(const ImageFrame& frame) const override;
  std::string name() const override;
  std::optional<double> exact_lipschitz() const override { return 1.0; }

  double sigma() const { return sigma_; }
  const std::vector<double>& kernel() const { return kernel_; }

 private:
  double sigma_;
  std::vector<double> kernel_;  // length 2 r + 1
};

// ---- CNN ---------------------------------------------------------------

enum class CnnMode : std::uint32_t { Direct = 0, Residual = 1 };

struct ConvLayer {
  std::uint32_t out_ch = 0;
  std::uint32_t in_ch = 0;
  std::uint32_t kh = 0;
  std::uint32_t kw = 0;
  std::vector<float> weights;  // [out][in][kh][kw]
  std::vector<float> bias;     // [out]

  float w(std::uint32_t o, std::uint32_t i, std::uint32_t y, std::uint32_t x) const {
    return weights[((static_cast<std::size_t>(o) * in_ch + i) * kh + y) * kw + x];
  }
};

/// Plain convolutional stack: ReLU after every layer but the last,
/// which must produce one channel.
struct CnnWeights {
  CnnMode mode = CnnMode::Direct;
  std::vector<ConvLayer> layers;

  void validate() const;
};

/// Binary layout, little-endian:
///   "RPDN1\0", u32 mode, u32 layer count,
///   per layer: u32 out, u32 in, u32 kh, u32 kw, f32 weights[out*in*kh*kw], f32 bias[out].
CnnWeights load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const CnnWeights& weights);

/// One 1x1 layer computing scale * f. Handy as an identity / scaling network.
CnnWeights scaling_network(float scale);

class Cnn final : public Denoiser {
 public:
  explicit Cnn(CnnWeights weights);

  ImageFrame apply(const ImageFrame& frame) const override;
  std::string name() const override;

  const CnnWeights& weights() const { return weights_; }

 private:
  CnnWeights weights_;
};

// ---- patch wrapper -------------------------------------------------------

/// Number of patch positions along one axis (after reflective padding when the
/// stride does not land on the last row).
Index patch_positions(Index n, Index patch, Index stride);

/// Runs `inner` on overlapping patch x patch tiles with the given stride and
/// averages the overlaps uniformly.
class Patched final : public Denoiser {
 public:
  Patched(DenoiserPtr inner, Index patch, Index stride);

  ImageFrame apply(const ImageFrame& frame) const override;
  std::string name() const override;

  Index patch() const { return patch_; }
  Index stride() const { return stride_; }

 private:
  DenoiserPtr inner_;
  Index patch_;
  Index stride_;
};

// ---- construction from settings ------------------------------------------

enum class Kind { Gaussian, Cnn };

struct DenoiserSpec {
  Kind kind = Kind::Gaussian;
  double sigma = 1.0;                    // gaussian
  std::filesystem::path weights;         // cnn
  Index patch = 0;                       // 0 = whole frame
  Index stride = 0;                      // 0 = patch
  std::optional<double> lipschitz_hint;  // L_D supplied by the user
};

Kind parse_kind(const std::string& name);
std::string to_string(Kind kind);

DenoiserPtr make_denoiser(const DenoiserSpec& spec);

/// Applies D to every column of an n^2 x P matrix.
Mat apply_frames(const Denoiser& d, const Mat& frames, Index n);

// ---- hypothesis checks ---------------------------------------------------

struct LipschitzEstimate {
  double sampled = 0.0;
  std::optional<double> exact;
};

/// Largest observed ||D(f1) - D(f2)|| / ||f1 - f2|| over `probes` random pairs in
/// [0, 1]^(n x n) and as many small perturbations of random frames.
LipschitzEstimate estimate_lipschitz(const Denoiser& d, Index n, int probes, std::uint64_t seed);

struct PassivityReport {
  std::vector<double> ratios;  // ||D(f)|| / ||f|| per sample (0 for a zero frame mapped to 0)
  double worst_ratio = 0.0;
  Index violations = 0;

  bool passive() const { return violations == 0; }
};

PassivityReport check_passivity(const Denoiser& d, const std::vector<ImageFrame>& frames);

}  // namespace redpsm::denoise
