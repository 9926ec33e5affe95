#pragma once

#include "stylediff/diffusion.hpp"
#include "stylediff/encoder.hpp"
#include "stylediff/unet.hpp"

namespace stylediff {

// Image-shaped noisy tensor at the encoding timestep; carries the spatial
// structure of the encoded image.
struct StructuralLatent {
    Tensor tensor;
    int t0 = 0;
};

// Deterministic DDIM encoding of an image up to t0, conditioned on z_sem at
// every block, over an evenly spaced grid of n_steps transitions.
StructuralLatent diffae_encode(const UNet& denoiser, const Tensor& image, const Tensor& z_sem,
                               int t0, int n_steps, const NoiseSchedule& sched);

Tensor diffae_decode(const UNet& denoiser, const StructuralLatent& x_t0, const Tensor& z_sem,
                     int n_steps, const NoiseSchedule& sched);

// Graph-aware decode used by training and latent optimization; z may carry
// gradients while the denoiser params stay frozen (or vice versa).
Var diffae_decode_var(const UNet& denoiser, const Var& x_t0, int t0, const Var& z_sem, int n_steps,
                      const NoiseSchedule& sched);

}  // namespace stylediff
