#pragma once

#include "stylediff/nn.hpp"

namespace stylediff {

struct EncoderConfig {
    int in_channels = 3;
    int image_size = 32;
    std::vector<int> widths{16, 32, 64};
    int norm_groups = 4;
    int z_dim = 64;
};

// Maps an image to its semantic latent z_sem. Deterministic; frozen while
// style finetuning runs.
class SemanticEncoder {
public:
    SemanticEncoder(EncoderConfig cfg, uint64_t init_seed);
    SemanticEncoder(SemanticEncoder&&) = default;
    SemanticEncoder& operator=(SemanticEncoder&&) = default;

    const EncoderConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    Var forward(const Var& image) const;
    Tensor encode(const Tensor& image) const;

private:
    EncoderConfig cfg_;
    ParamStore params_;
    std::vector<Conv2dLayer> convs_;
    std::vector<GroupNormLayer> norms_;
    LinearLayer head_;
};

Tensor encode_semantic(const SemanticEncoder& enc, const Tensor& image);

}  // namespace stylediff
