#pragma once

#include "stylediff/diffusion.hpp"
#include "stylediff/nn.hpp"
#include "stylediff/unet.hpp"

namespace stylediff {

struct SPNConfig {
    int channels = 3;
    int hidden = 32;
    int blocks = 3;
    int t_embed_dim = 64;
    int norm_groups = 4;
};

// Structure-preserving network: a stack of per-pixel (1x1 conv) blocks, each
// two convolutions with group norms and swish, conditioned on the timestep
// through a two-linear-map embedding projected to scale/shift on the first
// group norm. Output is an image-shaped residual.
class SPN {
public:
    SPN(SPNConfig cfg, uint64_t init_seed);
    SPN(SPN&&) = default;
    SPN& operator=(SPN&&) = default;

    const SPNConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    Var forward(const Var& image, int t) const;
    Tensor apply(const Tensor& image, int t) const;

private:
    struct Block {
        Conv2dLayer conv_a, conv_b;
        GroupNormLayer gn_a, gn_b;
        LinearLayer te_fc1, te_fc2;
        int out_channels = 0;
    };
    SPNConfig cfg_;
    ParamStore params_;
    std::vector<Block> blocks_;
    Conv2dLayer out_conv_;
};

Tensor spn_apply(const SPN& spn, const Tensor& image, int t);

// x'_t = x_t + lambda_spn * residual. lambda_spn == 0 returns x_t itself so
// the SPN-augmented path collapses to the plain path bit-exactly.
Var blend(const Var& x_t, const Var& residual, double lambda_spn);
Tensor blend(const Tensor& x_t, const Tensor& residual, double lambda_spn);

// One reverse DiffAE step evaluated at the blended x'_t: both the x0
// prediction and the eps term see x'_t, not x_t.
Var reverse_step_with_spn(const UNet& denoiser, const LatentPair& latents, const Var& x_t, int t,
                          int t_prev, const Var& input_image, const SPN& spn, double lambda_spn,
                          const NoiseSchedule& sched);

// Reverse trajectory from x_t0 to 0 over an even grid with the SPN residual
// blended in at every step.
Var spn_reverse_trajectory(const UNet& denoiser, const LatentPair& latents, const Var& x_t0,
                           int t0, const Var& input_image, const SPN& spn, double lambda_spn,
                           int n_steps, const NoiseSchedule& sched);

}  // namespace stylediff
