#include "redpsm/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "redpsm/error.hpp"

namespace redpsm::io {

static_assert(std::endian::native == std::endian::little, "raw tensor IO assumes a little-endian host");

namespace {

constexpr char kMagic[6] = {'R', 'P', 'S', 'M', '1', '\0'};
constexpr std::uint32_t kMaxRank = 8;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint32_t to_u32(Index v, const char* what) {
  if (v < 0 || v > static_cast<Index>(UINT32_MAX)) throw ValidationError(std::string(what) + " out of range");
  return static_cast<std::uint32_t>(v);
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(path, mode);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream is(path, mode);
  if (!is) throw Error("cannot open " + path.string());
  return is;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw FormatError(where + ": '" + text + "' is not a number");
  return v;
}

}  // namespace

// ---- raw tensors ---------------------------------------------------------

std::size_t Tensor::size() const {
  std::size_t total = 1;
  for (std::uint32_t d : dims) total *= d;
  return total;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  if (t.dims.empty() || t.dims.size() > kMaxRank) throw ValidationError("tensor rank must be 1..8");
  if (t.values.size() != t.size()) throw DimensionError("tensor payload does not match its dimensions");
  std::ofstream os = open_out(path, std::ios::binary);
  const auto rank = static_cast<std::uint32_t>(t.dims.size());
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&rank), sizeof rank);
  os.write(reinterpret_cast<const char*>(t.dims.data()),
           static_cast<std::streamsize>(t.dims.size() * sizeof(std::uint32_t)));
  os.write(reinterpret_cast<const char*>(t.values.data()),
           static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  if (!os) throw Error("write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is = open_in(path, std::ios::binary);
  const std::string where = path.string();
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError(where + ": not a raw tensor file (bad magic)");
  }
  std::uint32_t rank = 0;
  if (!is.read(reinterpret_cast<char*>(&rank), sizeof rank)) throw FormatError(where + ": truncated header");
  if (rank == 0 || rank > kMaxRank) throw FormatError(where + ": rank " + std::to_string(rank) + " unsupported");
  Tensor t;
  t.dims.resize(rank);
  if (!is.read(reinterpret_cast<char*>(t.dims.data()), rank * sizeof(std::uint32_t))) {
    throw FormatError(where + ": truncated header");
  }
  const auto file_size = std::filesystem::file_size(path);
  const std::size_t header = sizeof kMagic + (1 + rank) * sizeof(std::uint32_t);
  long double expected = 1;
  for (std::uint32_t d : t.dims) expected *= d;
  if (expected * sizeof(float) + header != static_cast<long double>(file_size)) {
    throw FormatError(where + ": payload length does not match the header dimensions");
  }
  t.values.resize(t.size());
  is.read(reinterpret_cast<char*>(t.values.data()),
          static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  if (!is) throw FormatError(where + ": truncated payload");
  return t;
}

namespace {

Tensor from_matrix(const Mat& m, std::vector<std::uint32_t> dims) {
  Tensor t{std::move(dims), {}};
  t.values.resize(static_cast<std::size_t>(m.size()));
  // Column-major storage of m is the row-major order the callers want.
  for (Index i = 0; i < m.size(); ++i) t.values[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
  return t;
}

Mat to_matrix(const Tensor& t, Index rows, Index cols) {
  Mat m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = t.values[static_cast<std::size_t>(i)];
  return m;
}

void check_finite(const Mat& m, const std::string& what) {
  if (!m.allFinite()) throw FormatError(what + " contains non-finite values");
}

}  // namespace

void write_dynamic(const std::filesystem::path& path, const DynamicObject& f) {
  f.validate();
  write_tensor(path, from_matrix(f.data, {to_u32(f.p(), "P"), to_u32(f.n, "N"), to_u32(f.n, "N")}));
}

DynamicObject read_dynamic(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.dims.size() != 3 || t.dims[1] != t.dims[2]) {
    throw FormatError(path.string() + ": expected a [P, N, N] tensor");
  }
  const Index n = t.dims[1];
  DynamicObject f(n, to_matrix(t, n * n, t.dims[0]));
  check_finite(f.data, path.string());
  return f;
}

void write_sinogram_data(const std::filesystem::path& path, const Sinogram& g) {
  write_tensor(path, from_matrix(g.data, {to_u32(g.p(), "P"), to_u32(g.n_det(), "n_det")}));
}

Mat read_sinogram_data(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.dims.size() != 2) throw FormatError(path.string() + ": expected a [P, n_det] tensor");
  Mat m = to_matrix(t, t.dims[1], t.dims[0]);
  check_finite(m, path.string());
  return m;
}

void write_matrix(const std::filesystem::path& path, const Mat& m) {
  const Mat mt = m.transpose();
  write_tensor(path, from_matrix(mt, {to_u32(m.rows(), "rows"), to_u32(m.cols(), "cols")}));
}

Mat read_matrix(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.dims.size() != 2) throw FormatError(path.string() + ": expected a rank-2 tensor");
  Mat m = to_matrix(t, t.dims[1], t.dims[0]).transpose();
  check_finite(m, path.string());
  return m;
}

void write_factors(const std::filesystem::path& dir, const psm::Factors& f) {
  f.validate();
  const Index n = f.side();
  write_tensor(dir / "lambda.raw", from_matrix(f.lambda, {to_u32(f.k(), "K"), to_u32(n, "N"), to_u32(n, "N")}));
  write_matrix(dir / "z.raw", f.z);
  write_matrix(dir / "u.raw", f.u);
}

psm::Factors read_factors(const std::filesystem::path& dir) {
  const Tensor lt = read_tensor(dir / "lambda.raw");
  if (lt.dims.size() != 3 || lt.dims[1] != lt.dims[2]) {
    throw FormatError((dir / "lambda.raw").string() + ": expected a [K, N, N] tensor");
  }
  const Index n = lt.dims[1];
  psm::Factors f{to_matrix(lt, n * n, lt.dims[0]), read_matrix(dir / "z.raw"), read_matrix(dir / "u.raw")};
  f.validate();
  return f;
}

// ---- schedules -----------------------------------------------------------

void write_schedule(const std::filesystem::path& path, const std::vector<double>& angles) {
  std::ofstream os = open_out(path);
  os << "t,angle\n";
  for (std::size_t t = 0; t < angles.size(); ++t) os << t << ',' << num(angles[t]) << '\n';
}

std::vector<double> read_schedule(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  std::string line;
  if (!std::getline(is, line) || trim(line) != "t,angle") {
    throw FormatError(path.string() + ": expected header 't,angle'");
  }
  std::vector<double> angles;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (comma == std::string::npos) throw FormatError(where + ": expected 't,angle'");
    const double t = parse_double(trim(line.substr(0, comma)), where);
    if (t != static_cast<double>(angles.size())) throw FormatError(where + ": frames out of order");
    angles.push_back(parse_double(trim(line.substr(comma + 1)), where));
  }
  return angles;
}

Sinogram read_sinogram(const std::filesystem::path& dir) {
  Sinogram g{read_sinogram_data(dir / "sinogram.raw"), read_schedule(dir / "schedule.csv")};
  if (static_cast<Index>(g.angles.size()) != g.p()) {
    throw DimensionError("schedule has " + std::to_string(g.angles.size()) + " angles but the sinogram has " +
                         std::to_string(g.p()) + " frames");
  }
  g.validate();
  return g;
}

// ---- PNG -----------------------------------------------------------------

PngScale write_png16(const std::filesystem::path& path, const ImageFrame& frame) {
  frame.validate();
  PngScale scale{frame.data.minCoeff(), frame.data.maxCoeff()};
  const double span = scale.max - scale.min;
  std::vector<png_uint_16> pixels(static_cast<std::size_t>(frame.data.size()));
  for (Index i = 0; i < frame.data.size(); ++i) {
    const double v = span > 0.0 ? (frame.data[i] - scale.min) / span : 0.0;
    pixels[static_cast<std::size_t>(i)] = static_cast<png_uint_16>(std::lround(v * 65535.0));
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = to_u32(frame.n, "N");
  img.height = img.width;
  img.format = PNG_FORMAT_LINEAR_Y;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
    throw Error("PNG write failed for " + path.string() + ": " + img.message);
  }
  std::ofstream os = open_out(path.string() + ".scale");
  os << "min=" << num(scale.min) << "\nmax=" << num(scale.max) << '\n';
  return scale;
}

ImageFrame read_png16(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw FormatError("cannot read PNG " + path.string() + ": " + img.message);
  }
  if (img.width != img.height) {
    png_image_free(&img);
    throw FormatError(path.string() + ": frames must be square");
  }
  img.format = PNG_FORMAT_LINEAR_Y;
  std::vector<png_uint_16> pixels(PNG_IMAGE_SIZE(img) / sizeof(png_uint_16));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
    throw FormatError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  KeyValues kv = KeyValues::load(path.string() + ".scale");
  const double lo = kv.take_double("min", 0.0);
  const double hi = kv.take_double("max", 0.0);
  kv.finish();
  const Index n = img.width;
  ImageFrame f = ImageFrame::zeros(n);
  for (Index i = 0; i < n * n; ++i) f.data[i] = lo + (hi - lo) * pixels[static_cast<std::size_t>(i)] / 65535.0;
  return f;
}

// ---- configuration -------------------------------------------------------

KeyValues KeyValues::parse(std::istream& is, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::string line;
  for (int line_no = 1; std::getline(is, line); ++line_no) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError(where + ": empty key");
    if (kv.values_.count(key)) throw FormatError(where + ": duplicate key '" + key + "'");
    kv.values_[key] = trim(line.substr(eq + 1));
    kv.lines_[key] = line_no;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  return parse(is, path.string());
}

std::optional<std::string> KeyValues::take(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::string KeyValues::take_string(const std::string& key, const std::string& fallback) {
  return take(key).value_or(fallback);
}

double KeyValues::take_double(const std::string& key, double fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  return parse_double(*v, origin_ + ":" + std::to_string(lines_.at(key)) + ": " + key);
}

Index KeyValues::take_index(const std::string& key, Index fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  const double d = parse_double(*v, origin_ + ":" + std::to_string(lines_.at(key)) + ": " + key);
  if (d != std::floor(d) || std::abs(d) > 1e15) {
    throw FormatError(origin_ + ": " + key + " must be an integer, got '" + *v + "'");
  }
  return static_cast<Index>(d);
}

std::uint64_t KeyValues::take_seed(const std::string& key, std::uint64_t fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  std::size_t used = 0;
  std::uint64_t s = 0;
  try {
    s = std::stoull(*v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v->size() || v->front() == '-') {
    throw FormatError(origin_ + ": " + key + " must be a non-negative integer, got '" + *v + "'");
  }
  return s;
}

bool KeyValues::take_bool(const std::string& key, bool fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw FormatError(origin_ + ": " + key + " must be true or false, got '" + *v + "'");
}

void KeyValues::finish() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) {
      unknown += (unknown.empty() ? "" : ", ") + key + " (line " + std::to_string(lines_.at(key)) + ")";
    }
  }
  if (!unknown.empty()) throw ValidationError(origin_ + ": unknown keys: " + unknown);
}

solver::SolverConfig solver_config(KeyValues& kv) {
  solver::SolverConfig c;
  c.k = kv.take_index("k", c.k);
  c.d = kv.take_index("d", c.d);
  c.lambda = kv.take_double("lambda", c.lambda);
  c.xi = kv.take_double("xi", c.xi);
  c.beta = kv.take_double("beta", c.beta);
  c.outer_iters = kv.take_index("outer_iters", c.outer_iters);
  c.inner_iters = kv.take_index("inner_iters", c.inner_iters);
  c.inner_method = solver::parse_inner_method(kv.take_string("inner_method", to_string(c.inner_method)));
  c.inner_step = kv.take_double("inner_step", c.inner_step);
  c.joint = kv.take_bool("joint", c.joint);
  c.f_step = solver::parse_f_step(kv.take_string("f_step", to_string(c.f_step)));
  c.f_exact_tol = kv.take_double("f_exact_tol", c.f_exact_tol);
  c.basis = psm::parse_basis(kv.take_string("basis", psm::to_string(c.basis)));
  c.init = solver::parse_init(kv.take_string("init", to_string(c.init)));
  c.init_window = kv.take_index("init_window", c.init_window);
  c.seed = kv.take_seed("seed", c.seed);
  c.stop_tol = kv.take_double("stop_tol", c.stop_tol);
  c.denoiser.kind = denoise::parse_kind(kv.take_string("denoiser", to_string(c.denoiser.kind)));
  c.denoiser.sigma = kv.take_double("denoiser_sigma", c.denoiser.sigma);
  c.denoiser.weights = kv.take_string("denoiser_weights", c.denoiser.weights.string());
  c.denoiser.patch = kv.take_index("patch", c.denoiser.patch);
  c.denoiser.stride = kv.take_index("stride", c.denoiser.stride);
  if (kv.has("lipschitz")) c.denoiser.lipschitz_hint = kv.take_double("lipschitz", 1.0);
  c.validate();
  return c;
}

baselines::TvConfig tv_config(KeyValues& kv) {
  baselines::TvConfig c;
  c.k = kv.take_index("k", c.k);
  c.d = kv.take_index("d", c.d);
  c.lambda = kv.take_double("lambda", c.lambda);
  c.lambda_tilde = kv.take_double("lambda_tilde", c.lambda_tilde);
  c.epsilon = kv.take_double("epsilon", c.epsilon);
  c.xi = kv.take_double("xi", c.xi);
  c.iters = kv.take_index("iters", c.iters);
  c.step = kv.take_double("step", c.step);
  c.basis = psm::parse_basis(kv.take_string("basis", psm::to_string(c.basis)));
  c.init = solver::parse_init(kv.take_string("init", to_string(c.init)));
  c.init_window = kv.take_index("init_window", c.init_window);
  c.seed = kv.take_seed("seed", c.seed);
  c.validate();
  return c;
}

void write_config(std::ostream& os, const solver::SolverConfig& c) {
  os << "k=" << c.k << "\nd=" << c.d << "\nlambda=" << num(c.lambda) << "\nxi=" << num(c.xi)
     << "\nbeta=" << num(c.beta) << "\nouter_iters=" << c.outer_iters << "\ninner_iters=" << c.inner_iters
     << "\ninner_method=" << to_string(c.inner_method) << "\ninner_step=" << num(c.inner_step)
     << "\njoint=" << (c.joint ? "true" : "false") << "\nf_step=" << to_string(c.f_step)
     << "\nf_exact_tol=" << num(c.f_exact_tol) << "\nbasis=" << psm::to_string(c.basis)
     << "\ninit=" << to_string(c.init) << "\ninit_window=" << c.init_window << "\nseed=" << c.seed
     << "\nstop_tol=" << num(c.stop_tol) << "\ndenoiser=" << to_string(c.denoiser.kind)
     << "\ndenoiser_sigma=" << num(c.denoiser.sigma);
  if (!c.denoiser.weights.empty()) os << "\ndenoiser_weights=" << c.denoiser.weights.string();
  os << "\npatch=" << c.denoiser.patch << "\nstride=" << c.denoiser.stride;
  if (c.denoiser.lipschitz_hint) os << "\nlipschitz=" << num(*c.denoiser.lipschitz_hint);
  os << '\n';
}

void write_config(std::ostream& os, const baselines::TvConfig& c) {
  os << "k=" << c.k << "\nd=" << c.d << "\nlambda=" << num(c.lambda) << "\nlambda_tilde=" << num(c.lambda_tilde)
     << "\nepsilon=" << num(c.epsilon) << "\nxi=" << num(c.xi) << "\niters=" << c.iters << "\nstep=" << num(c.step)
     << "\nbasis=" << psm::to_string(c.basis) << "\ninit=" << to_string(c.init)
     << "\ninit_window=" << c.init_window << "\nseed=" << c.seed << '\n';
}

}  // namespace redpsm::io
