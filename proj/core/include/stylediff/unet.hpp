#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "stylediff/nn.hpp"

namespace stylediff {

struct UNetConfig {
    int in_channels = 3;
    int image_size = 32;
    int base_channels = 12;
    std::vector<int> channel_mults{1, 2, 2};
    int res_blocks_per_level = 2;
    int norm_groups = 4;
    int t_embed_dim = 64;
    int z_dim = 64;  // 0 builds an unconditional denoiser
};

enum class LatentRole { input, style };

// Sentinel f_ch above any ladder resolution: no block satisfies
// resolution >= f_ch, so every block is conditioned on the input latent.
inline constexpr int fch_all_input = std::numeric_limits<int>::max();

// Which semantic latent conditions each resolution. The threshold rule is
// resolution >= f_ch -> style latent (style on the high-resolution shallow
// blocks), < f_ch -> input latent; encoder and decoder halves mirror
// automatically because assignment is by resolution.
struct ConditioningPlan {
    std::map<int, LatentRole> assignments;
    int f_ch = 0;
    Tensor z_in;
    Tensor z_style;
};

// Semantic-latent pair inside a graph; single-latent conditioning is the
// degenerate plan with both slots aliased to one Var.
struct LatentPair {
    Var z_in;
    Var z_style;
    int f_ch = 0;

    static LatentPair single(const Var& z) { return {z, z, 0}; }
    const Var& pick(int resolution) const { return resolution >= f_ch ? z_style : z_in; }
};

// Noise-prediction U-Net: per-level residual blocks with timestep + semantic
// latent conditioning as scale/shift on the second group norm, skip
// connections concatenated across the ladder.
class UNet {
public:
    UNet(UNetConfig cfg, uint64_t init_seed);
    UNet(UNet&&) = default;
    UNet& operator=(UNet&&) = default;

    const UNetConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::vector<int> resolution_ladder() const;  // descending, e.g. {32, 16, 8}
    bool on_ladder(int resolution) const;

    // role tag per the checkpoint metadata ("frozen_A", "trainable_B", ...)
    std::string role;

    Var forward(const Var& x, int t, const LatentPair& latents) const;
    Var forward(const Var& x, int t, const Var& z) const;  // single-latent
    Tensor denoise(const Tensor& x, int t, const Tensor& z) const;

private:
    struct ResBlock {
        GroupNormLayer gn1, gn2;
        Conv2dLayer conv1, conv2, skip;
        LinearLayer t_proj, z_proj;
        bool has_skip = false;
        int resolution = 0;
        int out_channels = 0;
    };

    ResBlock make_block(const std::string& name, int c_in, int c_out, int resolution, Rng& rng);
    Var run_block(const ResBlock& b, const Var& x, const Var& temb, const LatentPair& latents) const;
    Var time_embedding(int t) const;

    UNetConfig cfg_;
    ParamStore params_;
    Conv2dLayer stem_;
    std::vector<std::vector<ResBlock>> enc_levels_;
    std::vector<Conv2dLayer> downs_;
    ResBlock mid_;
    std::vector<std::vector<ResBlock>> dec_levels_;  // indexed like enc_levels_
    std::vector<Conv2dLayer> ups_;
    GroupNormLayer out_norm_;
    Conv2dLayer out_conv_;
    LinearLayer temb_fc1_, temb_fc2_;
};

// Validates f_ch (0, a ladder resolution, or fch_all_input) and materializes
// the per-resolution role map. Latent dimensions must match the denoiser.
ConditioningPlan make_conditioning_plan(const Tensor& z_in, const Tensor& z_style, int f_ch,
                                        const UNet& denoiser);

// eps prediction with each block conditioned by its assigned latent.
Tensor denoise_with_plan(const UNet& denoiser, const Tensor& x_t, int t,
                         const ConditioningPlan& plan);

}  // namespace stylediff
