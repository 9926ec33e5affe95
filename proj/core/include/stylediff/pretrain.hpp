#pragma once

#include <optional>

#include "stylediff/checkpoint.hpp"
#include "stylediff/diffae.hpp"
#include "stylediff/embedder.hpp"

namespace stylediff {

// The pretrained stand-in for the paper's frozen models: conditional DDIM
// eps_A + semantic encoder (the DiffAE pair), a small unconditional DDPM for
// style-pair generation, the noise schedule, and a diagonal Gaussian prior
// over z_sem fitted on encoder outputs.
struct BaseModel {
    UNet eps_a;
    SemanticEncoder encoder;
    UNet uncond;
    NoiseSchedule sched;
    Tensor z_prior_mean;
    Tensor z_prior_std;

    BaseModel(UNetConfig unet_cfg, EncoderConfig enc_cfg, UNetConfig uncond_cfg,
              NoiseSchedule schedule, uint64_t init_seed);
    BaseModel(BaseModel&&) = default;
    BaseModel& operator=(BaseModel&&) = default;

    BaseModel clone() const;
    void freeze();  // marks eps_a / encoder / uncond non-trainable

    Checkpoint to_checkpoint() const;
    static BaseModel from_checkpoint(const Checkpoint& ckpt);
};

struct PretrainConfig {
    int T = 100;
    int image_size = 32;
    int corpus_count = 256;
    uint64_t seed = 7;
    int diffae_steps = 1500;
    int uncond_steps = 900;
    int batch = 4;
    double diffae_lr = 2e-3;
    double uncond_lr = 2e-3;
    int prior_samples = 256;
    UNetConfig unet{.base_channels = 12, .z_dim = 64};
    UNetConfig uncond_unet{.base_channels = 12, .res_blocks_per_level = 1, .z_dim = 0};
    EncoderConfig encoder{};
};

struct PretrainResult {
    BaseModel model;
    std::vector<double> diffae_losses;  // one L_simple value per step
    std::vector<double> uncond_losses;
};

// Trains the DiffAE pair and the unconditional DDPM on the corpus with
// L_simple, then fits the z_sem prior. Deterministic given the config seed.
PretrainResult pretrain_base(const PretrainConfig& cfg, const std::vector<Tensor>& corpus);

struct EmbedderPretrainConfig {
    int steps = 1500;
    int batch = 12;
    double lr = 1e-3;
    double temperature = 0.07;
    uint64_t seed = 21;
    int image_size = 32;
    EmbedderConfig embedder{};  // vocabulary filled from toy_vocabulary() if empty
};

struct EmbedderPretrainResult {
    EmbeddingBackend backend;
    std::vector<double> losses;
};

// Symmetric InfoNCE over procedurally generated (face, caption) pairs.
EmbedderPretrainResult pretrain_embedder(const EmbedderPretrainConfig& cfg);

Checkpoint embedder_to_checkpoint(const EmbeddingBackend& backend);
EmbeddingBackend embedder_from_checkpoint(const Checkpoint& ckpt);

}  // namespace stylediff
