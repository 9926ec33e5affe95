#pragma once

#include <string>
#include <vector>

#include "stylediff/nn.hpp"

namespace stylediff {

struct EmbedderConfig {
    int in_channels = 3;
    int embed_dim = 128;
    std::vector<int> widths{12, 24, 48};
    int token_dim = 32;
    int min_image = 8;  // smallest side the conv stack accepts
    std::vector<std::string> vocabulary;
};

// Joint image/text embedding backend plus the perceptual feature distance.
// The toy instance is contrastively pretrained in-repo and then frozen; a
// large pretrained encoder can be slotted behind the same surface.
class EmbeddingBackend {
public:
    EmbeddingBackend(EmbedderConfig cfg, uint64_t init_seed);
    EmbeddingBackend(EmbeddingBackend&&) = default;
    EmbeddingBackend& operator=(EmbeddingBackend&&) = default;

    const EmbedderConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    Var image_embedding(const Var& image) const;
    Var text_embedding(const std::vector<std::string>& tokens) const;
    std::vector<Var> image_features(const Var& image) const;  // post-activation conv maps

    Tensor embed_image(const Tensor& image) const;
    Tensor embed_text(const std::vector<std::string>& tokens) const;

    // LPIPS-style: mean squared difference of channel-normalized feature
    // maps, averaged over layers.
    Var perceptual(const Var& a, const Var& b) const;
    double perceptual_distance(const Tensor& a, const Tensor& b) const;

    int token_id(const std::string& token) const;  // parameter error if unknown

private:
    void check_image(const Tensor& image) const;

    EmbedderConfig cfg_;
    ParamStore params_;
    std::vector<Conv2dLayer> convs_;
    Param* token_table_ = nullptr;
    LinearLayer text_fc1_, text_fc2_;
    LinearLayer image_head_;
};

Tensor embed_image(const EmbeddingBackend& backend, const Tensor& image);
Tensor embed_text(const EmbeddingBackend& backend, const std::vector<std::string>& tokens);
double perceptual_distance(const EmbeddingBackend& backend, const Tensor& a, const Tensor& b);

std::vector<std::string> split_tokens(const std::string& prompt);

}  // namespace stylediff
