#pragma once

#include "stylediff/losses.hpp"
#include "stylediff/pretrain.hpp"
#include "stylediff/spn.hpp"

namespace stylediff {

// Style image plus its generated photorealistic counterpart.
struct StylePair {
    Tensor style_b;  // the given style image (domain B)
    Tensor style_a;  // selected photorealistic candidate (domain A)
    double selection_score = 0.0;
    int candidate_count = 0;
};

// Noises style_b to t0 (forward DDPM marginal) and denoises back with the
// unconditional DDPM, n_candidates times with distinct substreams; scores
// each candidate by L1 + perceptual distance against style_b and returns the
// argmin. Optionally emits every candidate and score for re-scoring oracles.
StylePair prepare_style_pair(const UNet& uncond_ddpm, const NoiseSchedule& sched,
                             const Tensor& style_b, int t0, int n_candidates,
                             const EmbeddingBackend& backend, uint64_t seed,
                             std::vector<Tensor>* candidates_out = nullptr,
                             std::vector<double>* scores_out = nullptr);

enum class InputSource { latent_prior, corpus };

// Draws a fresh photorealistic input image: latent_prior decodes a prior
// z_sem sample from x_T noise through reverse DiffAE with eps_A; corpus mode
// picks a held image uniformly.
Tensor sample_input_image(const BaseModel& base, InputSource source,
                          const std::vector<Tensor>* corpus, Rng& rng, int gen_steps);

struct FinetuneConfig {
    int t0 = 50;
    LossWeights weights{};
    double lambda_spn = 0.1;
    int iterations = 200;
    double learning_rate = 1e-4;
    uint64_t seed = 11;
    int candidates = 30;
    InputSource input_source = InputSource::latent_prior;
    int traj_steps = 8;       // reverse-trajectory transitions backprop flows through
    int input_gen_steps = 8;  // transitions when decoding prior samples to I_in_A
    SPNConfig spn{};

    void validate(const NoiseSchedule& sched) const;
};

// Mutable training state: the trainable copy eps_B, the SPN, optimizers, and
// the cached (constant) style-path encodings.
struct FinetuneState {
    UNet eps_b;
    SPN spn;
    AdamOptimizer opt_eps_b;
    AdamOptimizer opt_spn;
    int iteration = 0;
    Tensor z_style;
    StructuralLatent x_style_t0;

    FinetuneState(const BaseModel& base, const StylePair& pair, const FinetuneConfig& cfg);
};

// One optimization step: generate I_in_B and the style reconstruction through
// SPN-augmented reverse trajectories of eps_B, evaluate the three losses,
// and apply one Adam update to eps_B and SPN only.
LossReport finetune_step(FinetuneState& state, const BaseModel& base,
                         const EmbeddingBackend& backend, const Tensor& input_image,
                         const StylePair& pair, const FinetuneConfig& cfg);

struct FinetunedModel {
    BaseModel base;
    UNet eps_b;
    SPN spn;
    StylePair pair;
    FinetuneConfig config;
    std::vector<LossReport> metrics;

    FinetunedModel(BaseModel b, UNet e, SPN s, StylePair p, FinetuneConfig c,
                   std::vector<LossReport> m)
        : base(std::move(b)), eps_b(std::move(e)), spn(std::move(s)), pair(std::move(p)),
          config(std::move(c)), metrics(std::move(m)) {}
    FinetunedModel(FinetunedModel&&) = default;

    Checkpoint to_checkpoint() const;
    static FinetunedModel from_checkpoint(const Checkpoint& ckpt);
};

FinetunedModel finetune(const BaseModel& base, const EmbeddingBackend& backend,
                        const StylePair& pair, const FinetuneConfig& cfg,
                        const std::vector<Tensor>* input_corpus = nullptr);

}  // namespace stylediff
