#include "stylediff/encoder.hpp"

#include "stylediff/errors.hpp"

namespace stylediff {

SemanticEncoder::SemanticEncoder(EncoderConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
    Rng rng(init_seed);
    int c_in = cfg_.in_channels;
    for (size_t i = 0; i < cfg_.widths.size(); ++i) {
        Conv2dLayer conv;
        conv.init(params_, "conv" + std::to_string(i), c_in, cfg_.widths[i], 3, 2, 1, rng);
        convs_.push_back(conv);
        GroupNormLayer norm;
        norm.init(params_, "norm" + std::to_string(i), cfg_.widths[i], cfg_.norm_groups);
        norms_.push_back(norm);
        c_in = cfg_.widths[i];
    }
    head_.init(params_, "head", c_in, cfg_.z_dim, rng);
}

Var SemanticEncoder::forward(const Var& image) const {
    if (image->value.ndim() != 3 || image->value.dim(0) != cfg_.in_channels ||
        image->value.dim(1) != cfg_.image_size || image->value.dim(2) != cfg_.image_size)
        throw_contract("semantic encoder: input resolution mismatch");
    Var h = image;
    for (size_t i = 0; i < convs_.size(); ++i) h = silu(norms_[i](convs_[i](h)));
    return head_(global_avg_pool(h));
}

Tensor SemanticEncoder::encode(const Tensor& image) const {
    NoGradGuard ng;
    return forward(constant(image))->value;
}

Tensor encode_semantic(const SemanticEncoder& enc, const Tensor& image) {
    return enc.encode(image);
}

}  // namespace stylediff
