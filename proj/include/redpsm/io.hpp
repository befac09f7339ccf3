#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "redpsm/baselines.hpp"
#include "redpsm/psm.hpp"
#include "redpsm/solver.hpp"
#include "redpsm/types.hpp"

// Files: raw tensors, angle schedules, 16-bit PNG frames, key=value configs.
namespace redpsm::io {

// ---- raw tensors ---------------------------------------------------------

/// "RPSM1\0", u32 rank, u32 dims[rank], f32 payload; little-endian, row-major.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t size() const;
};

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// Dynamic objects are stored as [P, N, N], sinograms as [P, n_det] and
/// plain matrices as [rows, cols].
void write_dynamic(const std::filesystem::path& path, const DynamicObject& f);
DynamicObject read_dynamic(const std::filesystem::path& path);
void write_sinogram_data(const std::filesystem::path& path, const Sinogram& g);
Mat read_sinogram_data(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Mat& m);
Mat read_matrix(const std::filesystem::path& path);

/// Lambda as [K, N, N], Z as [d, K], U as [P, d] under `dir`.
void write_factors(const std::filesystem::path& dir, const psm::Factors& f);
psm::Factors read_factors(const std::filesystem::path& dir);

// ---- schedules -----------------------------------------------------------

/// CSV with header "t,angle", angles in radians at full precision.
void write_schedule(const std::filesystem::path& path, const std::vector<double>& angles);
std::vector<double> read_schedule(const std::filesystem::path& path);

/// sinogram.raw + schedule.csv in one directory.
Sinogram read_sinogram(const std::filesystem::path& dir);

// ---- PNG -----------------------------------------------------------------

struct PngScale {
  double min = 0.0;
  double max = 0.0;
};

/// Min-max scaled 16-bit grayscale PNG; the range goes to `<path>.scale`.
PngScale write_png16(const std::filesystem::path& path, const ImageFrame& frame);
/// Reads a PNG written by write_png16 and undoes the scaling.
ImageFrame read_png16(const std::filesystem::path& path);

// ---- configuration -------------------------------------------------------

/// Flat key=value text. '#' starts a comment; blank lines are ignored.
/// Every key must be consumed by a take_* call before finish(), which
/// rejects leftovers.
class KeyValues {
 public:
  static KeyValues parse(std::istream& is, const std::string& origin = "config");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> take(const std::string& key);
  std::string take_string(const std::string& key, const std::string& fallback);
  double take_double(const std::string& key, double fallback);
  Index take_index(const std::string& key, Index fallback);
  std::uint64_t take_seed(const std::string& key, std::uint64_t fallback);
  bool take_bool(const std::string& key, bool fallback);
  void finish() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::set<std::string> used_;
};

solver::SolverConfig solver_config(KeyValues& kv);
baselines::TvConfig tv_config(KeyValues& kv);

/// Effective settings, written in the same key=value syntax.
void write_config(std::ostream& os, const solver::SolverConfig& c);
void write_config(std::ostream& os, const baselines::TvConfig& c);

}  // namespace redpsm::io
