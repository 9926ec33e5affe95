#include "stylediff/embedder.hpp"

#include <sstream>

#include "stylediff/errors.hpp"

namespace stylediff {

EmbeddingBackend::EmbeddingBackend(EmbedderConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
    if (cfg_.vocabulary.empty()) throw_param("embedder: empty vocabulary");
    Rng rng(init_seed);
    int c_in = cfg_.in_channels;
    for (size_t i = 0; i < cfg_.widths.size(); ++i) {
        Conv2dLayer conv;
        conv.init(params_, "img.conv" + std::to_string(i), c_in, cfg_.widths[i], 3, 2, 1, rng);
        convs_.push_back(conv);
        c_in = cfg_.widths[i];
    }
    image_head_.init(params_, "img.head", c_in, cfg_.embed_dim, rng);

    int v = static_cast<int>(cfg_.vocabulary.size());
    Tensor table({v, cfg_.token_dim});
    double* d = table.data();
    for (int64_t i = 0; i < table.size(); ++i) d[i] = rng.normal() * 0.3;
    token_table_ = params_.add("txt.tokens", std::move(table));
    text_fc1_.init(params_, "txt.fc1", cfg_.token_dim, 2 * cfg_.token_dim, rng);
    text_fc2_.init(params_, "txt.fc2", 2 * cfg_.token_dim, cfg_.embed_dim, rng);
}

void EmbeddingBackend::check_image(const Tensor& image) const {
    if (image.ndim() != 3 || image.dim(0) != cfg_.in_channels) throw_contract("embedder: bad image shape");
    if (image.dim(1) < cfg_.min_image || image.dim(2) < cfg_.min_image)
        throw_contract("embedder: image below minimum resolution");
    if (!image.all_finite()) throw_contract("embedder: non-finite image values");
}

std::vector<Var> EmbeddingBackend::image_features(const Var& image) const {
    check_image(image->value);
    std::vector<Var> feats;
    Var h = image;
    for (const auto& conv : convs_) {
        h = silu(conv(h));
        feats.push_back(h);
    }
    return feats;
}

Var EmbeddingBackend::image_embedding(const Var& image) const {
    auto feats = image_features(image);
    return image_head_(global_avg_pool(feats.back()));
}

int EmbeddingBackend::token_id(const std::string& token) const {
    for (size_t i = 0; i < cfg_.vocabulary.size(); ++i)
        if (cfg_.vocabulary[i] == token) return static_cast<int>(i);
    throw_param("embedder: unknown token '" + token + "'");
}

Var EmbeddingBackend::text_embedding(const std::vector<std::string>& tokens) const {
    if (tokens.empty()) throw_param("embedder: empty prompt");
    Var table = param_var(*token_table_);
    Var acc;
    for (const auto& tok : tokens) {
        int id = token_id(tok);
        Var row = flat_slice(table, static_cast<int64_t>(id) * cfg_.token_dim, cfg_.token_dim);
        acc = acc ? add(acc, row) : row;
    }
    acc = scale(acc, 1.0 / static_cast<double>(tokens.size()));
    return text_fc2_(silu(text_fc1_(acc)));
}

Tensor EmbeddingBackend::embed_image(const Tensor& image) const {
    NoGradGuard ng;
    return image_embedding(constant(image))->value;
}

Tensor EmbeddingBackend::embed_text(const std::vector<std::string>& tokens) const {
    NoGradGuard ng;
    return text_embedding(tokens)->value;
}

Var EmbeddingBackend::perceptual(const Var& a, const Var& b) const {
    if (!a->value.same_shape(b->value)) throw_contract("perceptual_distance: shape mismatch");
    auto fa = image_features(a);
    auto fb = image_features(b);
    Var total;
    for (size_t i = 0; i < fa.size(); ++i) {
        Var d = mse_mean(channel_l2_normalize(fa[i]), channel_l2_normalize(fb[i]));
        total = total ? add(total, d) : d;
    }
    return scale(total, 1.0 / static_cast<double>(fa.size()));
}

double EmbeddingBackend::perceptual_distance(const Tensor& a, const Tensor& b) const {
    NoGradGuard ng;
    return perceptual(constant(a), constant(b))->value.item();
}

Tensor embed_image(const EmbeddingBackend& backend, const Tensor& image) {
    return backend.embed_image(image);
}

Tensor embed_text(const EmbeddingBackend& backend, const std::vector<std::string>& tokens) {
    return backend.embed_text(tokens);
}

double perceptual_distance(const EmbeddingBackend& backend, const Tensor& a, const Tensor& b) {
    return backend.perceptual_distance(a, b);
}

std::vector<std::string> split_tokens(const std::string& prompt) {
    std::vector<std::string> out;
    std::istringstream ss(prompt);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

}  // namespace stylediff
