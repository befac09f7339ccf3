#include "redpsm/red.hpp"

#include "redpsm/parallel.hpp"

namespace redpsm::red {

double rho(const ImageFrame& frame, const denoise::Denoiser& d) {
  const ImageFrame den = d.apply(frame);
  return 0.5 * frame.data.dot(frame.data - den.data);
}

ImageFrame grad_rho(const ImageFrame& frame, const denoise::Denoiser& d) {
  const ImageFrame den = d.apply(frame);
  return ImageFrame(frame.n, frame.data - den.data);
}

double rho_bar(const DynamicObject& f, const denoise::Denoiser& d) {
  f.validate();
  std::vector<double> parts(static_cast<std::size_t>(f.p()), 0.0);
  parallel_for(f.p(), [&](Index t) {
    parts[static_cast<std::size_t>(t)] = rho(ImageFrame(f.n, f.data.col(t)), d);
  });
  double total = 0.0;
  for (double v : parts) total += v;  // fixed order keeps the sum thread-count independent
  return total;
}

Mat grad_rho_bar(const DynamicObject& f, const denoise::Denoiser& d) {
  f.validate();
  return f.data - denoise::apply_frames(d, f.data, f.n);
}

}  // namespace redpsm::red
