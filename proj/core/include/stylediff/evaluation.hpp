#pragma once

#include "stylediff/sampler.hpp"

namespace stylediff {

enum class DensityBucket { low_density, high_density, middle };

struct DensityRecord {
    std::string image_id;
    double perceptual_score = 0.0;
    int rank = 0;  // 1 = worst reconstruction (lowest-density)
    DensityBucket bucket = DensityBucket::middle;
};

// Decodes the image's z_sem from a freshly sampled terminal noise code
// through reverse DiffAE with frozen eps_A.
Tensor stochastic_reconstruct(const BaseModel& base, const Tensor& image, uint64_t seed,
                              int decode_steps = 8);

// Scores every image by perceptual distance to its stochastic reconstruction
// (averaged over recon_avg seeds), sorts descending; the top k are the
// low-density bucket, the bottom k the high-density bucket.
std::vector<DensityRecord> density_rank(const BaseModel& base, const EmbeddingBackend& backend,
                                        const std::vector<std::pair<std::string, Tensor>>& corpus,
                                        int k, uint64_t seed, int decode_steps = 8,
                                        int recon_avg = 1);

// Distance between patch-feature self-similarity matrices: second-layer
// backend features pooled to a 4x4 grid, 16x16 cosine matrices, mean
// absolute difference. Zero for identical images.
double structure_distance_proxy(const EmbeddingBackend& backend, const Tensor& a, const Tensor& b);

// Cosine similarity of backend image embeddings, in [-1, 1]; exactly 1 for
// identical images.
double id_similarity_proxy(const EmbeddingBackend& backend, const Tensor& a, const Tensor& b);

struct SpnAblationRow {
    double lambda_spn = 0.0;
    double mean_structure_distance = 0.0;
    double mean_id_similarity = 0.0;
};

// Mean proxies of stylized outputs against their inputs per lambda. Entries
// may share one finetuned model (inference-lambda sweep) or carry separately
// finetuned checkpoints.
std::vector<SpnAblationRow> run_spn_ablation(
    const std::vector<std::pair<double, const FinetunedModel*>>& entries,
    const std::vector<Tensor>& inputs, const EmbeddingBackend& backend, StylizeOptions base_opts);

std::string density_report_tsv(const std::vector<DensityRecord>& records);
std::string ablation_report_tsv(const std::vector<SpnAblationRow>& rows);

}  // namespace stylediff
