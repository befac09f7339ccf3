#pragma once

#include "redpsm/denoise.hpp"
#include "redpsm/types.hpp"

// Regularisation by denoising: rho(f) = 1/2 f^T (f - D(f)).
namespace redpsm::red {

double rho(const ImageFrame& frame, const denoise::Denoiser& d);

/// f - D(f). This is the true gradient of rho only when D is linear with a
/// symmetric Jacobian; otherwise it is the descent direction by definition.
ImageFrame grad_rho(const ImageFrame& frame, const denoise::Denoiser& d);

/// Sum of rho over the columns of f.
double rho_bar(const DynamicObject& f, const denoise::Denoiser& d);

/// Column-wise f - D(f).
Mat grad_rho_bar(const DynamicObject& f, const denoise::Denoiser& d);

}  // namespace redpsm::red
