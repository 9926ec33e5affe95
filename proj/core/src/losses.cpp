#include "stylediff/losses.hpp"

#include <cmath>
#include <sstream>

#include "stylediff/errors.hpp"

namespace stylediff {

void LossWeights::validate() const {
    for (double v : {re_image, re_lpips, re_clip, cross, in_domain})
        if (!(v >= 0.0) || !std::isfinite(v)) throw_param("loss weights must be finite and >= 0");
}

double LossReport::recombine(const LossWeights& w) const {
    return w.cross * cross + w.in_domain * in_domain + w.re_image * recon_image +
           w.re_lpips * recon_lpips + w.re_clip * recon_clip;
}

std::string LossReport::tsv_header() {
    return "step\tcross\tin_domain\trecon_image\trecon_lpips\trecon_clip\ttotal";
}

std::string LossReport::tsv_line(int step) const {
    std::ostringstream ss;
    ss.precision(17);
    ss << step << '\t' << cross << '\t' << in_domain << '\t' << recon_image << '\t' << recon_lpips
       << '\t' << recon_clip << '\t' << total;
    return ss.str();
}

namespace {

bool all_zero(const Tensor& t) {
    const double* p = t.data();
    for (int64_t i = 0; i < t.size(); ++i)
        if (p[i] != 0.0) return false;
    return true;
}

bool bitwise_opposite(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    const double* pa = a.data();
    const double* pb = b.data();
    for (int64_t i = 0; i < a.size(); ++i)
        if (pa[i] != -pb[i]) return false;
    return true;
}

}  // namespace

Var cosine_similarity(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) throw_contract("cosine_similarity: shape mismatch");
    if (all_zero(a->value) || all_zero(b->value))
        throw_param("cosine_similarity: degenerate zero vector");
    if (Tensor::equal(a->value, b->value)) return constant(Tensor::scalar(1.0));
    if (bitwise_opposite(a->value, b->value)) return constant(Tensor::scalar(-1.0));
    Var num = dot(a, b);
    Var den = mul(sqrt_v(dot(a, a)), sqrt_v(dot(b, b)));
    return divide(num, den);
}

Var directional_loss(const Var& v1, const Var& v2) {
    return add_scalar(neg(cosine_similarity(v1, v2)), 1.0);
}

double directional_loss(const Tensor& v1, const Tensor& v2) {
    NoGradGuard ng;
    return directional_loss(constant(v1), constant(v2))->value.item();
}

Var cross_domain_loss(const EmbeddingBackend& backend, const Var& style_a, const Var& style_b,
                      const Var& in_a, const Var& in_b) {
    Var v_style = sub(backend.image_embedding(style_b), backend.image_embedding(style_a));
    Var v_in = sub(backend.image_embedding(in_b), backend.image_embedding(in_a));
    return directional_loss(v_style, v_in);
}

double cross_domain_loss(const EmbeddingBackend& backend, const Tensor& style_a,
                         const Tensor& style_b, const Tensor& in_a, const Tensor& in_b) {
    NoGradGuard ng;
    return cross_domain_loss(backend, constant(style_a), constant(style_b), constant(in_a),
                             constant(in_b))
        ->value.item();
}

Var in_domain_loss(const EmbeddingBackend& backend, const Var& style_a, const Var& style_b,
                   const Var& cont_a, const Var& cont_b) {
    Var v_a = sub(backend.image_embedding(cont_a), backend.image_embedding(style_a));
    Var v_b = sub(backend.image_embedding(cont_b), backend.image_embedding(style_b));
    return directional_loss(v_a, v_b);
}

double in_domain_loss(const EmbeddingBackend& backend, const Tensor& style_a, const Tensor& style_b,
                      const Tensor& cont_a, const Tensor& cont_b) {
    NoGradGuard ng;
    return in_domain_loss(backend, constant(style_a), constant(style_b), constant(cont_a),
                          constant(cont_b))
        ->value.item();
}

ReconTerms reconstruction_loss(const EmbeddingBackend& backend, const Var& target,
                               const Var& predicted, const LossWeights& w) {
    if (!target->value.same_shape(predicted->value))
        throw_contract("reconstruction_loss: shape mismatch");
    w.validate();
    ReconTerms terms;
    terms.image = l1_mean(target, predicted);
    terms.lpips = backend.perceptual(target, predicted);
    terms.clip = l1_mean(backend.image_embedding(target), backend.image_embedding(predicted));
    terms.weighted = add(add(scale(terms.image, w.re_image), scale(terms.lpips, w.re_lpips)),
                         scale(terms.clip, w.re_clip));
    return terms;
}

LossReport reconstruction_loss(const EmbeddingBackend& backend, const Tensor& target,
                               const Tensor& predicted, const LossWeights& w) {
    NoGradGuard ng;
    auto terms = reconstruction_loss(backend, constant(target), constant(predicted), w);
    LossReport r;
    r.recon_image = terms.image->value.item();
    r.recon_lpips = terms.lpips->value.item();
    r.recon_clip = terms.clip->value.item();
    r.total = terms.weighted->value.item();
    return r;
}

Var total_loss(const Var& cross, const Var& in_domain, const Var& recon_weighted,
               const LossWeights& w) {
    w.validate();
    return add(add(scale(cross, w.cross), scale(in_domain, w.in_domain)), recon_weighted);
}

double total_loss(double cross, double in_domain, double recon_weighted, const LossWeights& w) {
    w.validate();
    return w.cross * cross + w.in_domain * in_domain + recon_weighted;
}

Var text_directional_loss(const EmbeddingBackend& backend, const std::vector<std::string>& src,
                          const std::vector<std::string>& trg, const Var& image_src,
                          const Var& image_opt) {
    Var v_text = sub(backend.text_embedding(trg), backend.text_embedding(src));
    Var v_image = sub(backend.image_embedding(image_opt), backend.image_embedding(image_src));
    return directional_loss(v_text, v_image);
}

double text_directional_loss(const EmbeddingBackend& backend, const std::vector<std::string>& src,
                             const std::vector<std::string>& trg, const Tensor& image_src,
                             const Tensor& image_opt) {
    NoGradGuard ng;
    return text_directional_loss(backend, src, trg, constant(image_src), constant(image_opt))
        ->value.item();
}

}  // namespace stylediff
