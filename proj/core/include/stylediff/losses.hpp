#pragma once

#include <string>

#include "stylediff/embedder.hpp"

namespace stylediff {

struct LossWeights {
    double re_image = 10.0;
    double re_lpips = 10.0;
    double re_clip = 30.0;
    double cross = 1.0;
    double in_domain = 0.5;

    void validate() const;
};

// Per-iteration component record; total must equal the weighted
// recombination of the (unweighted) components.
struct LossReport {
    double cross = 0.0;
    double in_domain = 0.0;
    double recon_image = 0.0;
    double recon_lpips = 0.0;
    double recon_clip = 0.0;
    double total = 0.0;

    double recombine(const LossWeights& w) const;
    std::string tsv_line(int step) const;
    static std::string tsv_header();
};

// cos(a, b); bitwise-equal and bitwise-antipodal inputs short-circuit to
// exactly +/-1 (treated as stationary points). Zero vectors are degenerate.
Var cosine_similarity(const Var& a, const Var& b);

// 1 - cos(v1, v2), range [0, 2].
Var directional_loss(const Var& v1, const Var& v2);
double directional_loss(const Tensor& v1, const Tensor& v2);

// v_style = E(I_style_B) - E(I_style_A), v_in = E(I_in_B) - E(I_in_A)
Var cross_domain_loss(const EmbeddingBackend& backend, const Var& style_a, const Var& style_b,
                      const Var& in_a, const Var& in_b);
double cross_domain_loss(const EmbeddingBackend& backend, const Tensor& style_a,
                         const Tensor& style_b, const Tensor& in_a, const Tensor& in_b);

// v_A = E(I_cont_A) - E(I_style_A), v_B = E(I_cont_B) - E(I_style_B)
Var in_domain_loss(const EmbeddingBackend& backend, const Var& style_a, const Var& style_b,
                   const Var& cont_a, const Var& cont_b);
double in_domain_loss(const EmbeddingBackend& backend, const Tensor& style_a,
                      const Tensor& style_b, const Tensor& cont_a, const Tensor& cont_b);

struct ReconTerms {
    Var image;  // L1
    Var lpips;
    Var clip;   // L1 over raw embeddings
    Var weighted;
};
ReconTerms reconstruction_loss(const EmbeddingBackend& backend, const Var& target,
                               const Var& predicted, const LossWeights& w);
LossReport reconstruction_loss(const EmbeddingBackend& backend, const Tensor& target,
                               const Tensor& predicted, const LossWeights& w);

Var total_loss(const Var& cross, const Var& in_domain, const Var& recon_weighted,
               const LossWeights& w);
double total_loss(double cross, double in_domain, double recon_weighted, const LossWeights& w);

// v_text = E_T(trg) - E_T(src), v_image = E(I_opt) - E(I_src)
Var text_directional_loss(const EmbeddingBackend& backend, const std::vector<std::string>& src,
                          const std::vector<std::string>& trg, const Var& image_src,
                          const Var& image_opt);
double text_directional_loss(const EmbeddingBackend& backend, const std::vector<std::string>& src,
                             const std::vector<std::string>& trg, const Tensor& image_src,
                             const Tensor& image_opt);

}  // namespace stylediff
