#include "stylediff/pretrain.hpp"

#include <cmath>

#include "stylediff/config_json.hpp"
#include "stylediff/corpus.hpp"
#include "stylediff/errors.hpp"

namespace stylediff {

BaseModel::BaseModel(UNetConfig unet_cfg, EncoderConfig enc_cfg, UNetConfig uncond_cfg,
                     NoiseSchedule schedule, uint64_t init_seed)
    : eps_a(std::move(unet_cfg), init_seed),
      encoder(std::move(enc_cfg), init_seed ^ 0x5EED0001ull),
      uncond(std::move(uncond_cfg), init_seed ^ 0x5EED0002ull),
      sched(std::move(schedule)) {
    eps_a.role = "frozen_A";
    uncond.role = "uncond_ddpm";
    z_prior_mean = Tensor::zeros({eps_a.config().z_dim});
    z_prior_std = Tensor::full({eps_a.config().z_dim}, 1.0);
}

void BaseModel::freeze() {
    eps_a.params().set_trainable(false);
    encoder.params().set_trainable(false);
    uncond.params().set_trainable(false);
}

Checkpoint BaseModel::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "base";
    ckpt.meta["format_version"] = 1;
    ckpt.meta["eps_a"] = eps_a.config();
    ckpt.meta["encoder"] = encoder.config();
    ckpt.meta["uncond"] = uncond.config();
    ckpt.meta["schedule"] = schedule_meta(sched);
    ckpt.add("schedule.betas", schedule_betas_tensor(sched));
    ckpt.add("schedule.sigmas", schedule_sigmas_tensor(sched));
    ckpt.add("prior.mean", z_prior_mean.clone());
    ckpt.add("prior.std", z_prior_std.clone());
    ckpt.add_store("eps_a.", eps_a.params());
    ckpt.add_store("encoder.", encoder.params());
    ckpt.add_store("uncond.", uncond.params());
    return ckpt;
}

BaseModel BaseModel::from_checkpoint(const Checkpoint& ckpt) {
    NoiseSchedule sched = schedule_from_parts(ckpt.meta.at("schedule"), ckpt.get("schedule.betas"),
                                              ckpt.get("schedule.sigmas"));
    BaseModel model(ckpt.meta.at("eps_a").get<UNetConfig>(),
                    ckpt.meta.at("encoder").get<EncoderConfig>(),
                    ckpt.meta.at("uncond").get<UNetConfig>(), std::move(sched), /*init_seed=*/0);
    ckpt.load_store("eps_a.", model.eps_a.params());
    ckpt.load_store("encoder.", model.encoder.params());
    ckpt.load_store("uncond.", model.uncond.params());
    model.z_prior_mean = ckpt.get("prior.mean").clone();
    model.z_prior_std = ckpt.get("prior.std").clone();
    model.freeze();
    return model;
}

BaseModel BaseModel::clone() const { return from_checkpoint(to_checkpoint()); }

PretrainResult pretrain_base(const PretrainConfig& cfg, const std::vector<Tensor>& corpus) {
    if (corpus.empty()) throw_config("pretrain: corpus is empty");
    if (cfg.unet.z_dim != cfg.encoder.z_dim) throw_config("pretrain: z_dim mismatch");
    if (cfg.uncond_unet.z_dim != 0) throw_config("pretrain: uncond denoiser must have z_dim 0");

    PretrainResult result{BaseModel(cfg.unet, cfg.encoder, cfg.uncond_unet,
                                    default_schedule(cfg.T), cfg.seed),
                          {},
                          {}};
    BaseModel& model = result.model;
    const NoiseSchedule& sched = model.sched;
    Rng rng(cfg.seed ^ 0x77AA11ull);

    // DiffAE: eps_A and the semantic encoder train jointly on L_simple.
    {
        AdamOptimizer opt_unet(cfg.diffae_lr);
        AdamOptimizer opt_enc(cfg.diffae_lr);
        for (int step = 0; step < cfg.diffae_steps; ++step) {
            model.eps_a.params().zero_grad();
            model.encoder.params().zero_grad();
            Var loss;
            for (int b = 0; b < cfg.batch; ++b) {
                const Tensor& x0 = corpus[static_cast<size_t>(rng.uniform_int(
                    static_cast<int>(corpus.size())))];
                int t = 1 + rng.uniform_int(sched.T);
                Var x0v = constant(x0);
                Var z = model.encoder.forward(x0v);
                Var noise = constant(rng.normal_tensor(x0.shape()));
                Var x_t = forward_marginal(x0v, t, noise, sched);
                Var pred = model.eps_a.forward(x_t, t, z);
                Var term = mse_mean(pred, noise);
                loss = loss ? add(loss, term) : term;
            }
            loss = scale(loss, 1.0 / cfg.batch);
            backward(loss);
            opt_unet.step(model.eps_a.params());
            opt_enc.step(model.encoder.params());
            result.diffae_losses.push_back(loss->value.item());
        }
    }

    // Unconditional DDPM for style-pair generation.
    {
        AdamOptimizer opt(cfg.uncond_lr);
        for (int step = 0; step < cfg.uncond_steps; ++step) {
            model.uncond.params().zero_grad();
            Var loss;
            for (int b = 0; b < cfg.batch; ++b) {
                const Tensor& x0 = corpus[static_cast<size_t>(rng.uniform_int(
                    static_cast<int>(corpus.size())))];
                int t = 1 + rng.uniform_int(sched.T);
                Var noise = constant(rng.normal_tensor(x0.shape()));
                Var x_t = forward_marginal(constant(x0), t, noise, sched);
                Var pred = model.uncond.forward(x_t, t, LatentPair{});
                Var term = mse_mean(pred, noise);
                loss = loss ? add(loss, term) : term;
            }
            loss = scale(loss, 1.0 / cfg.batch);
            backward(loss);
            opt.step(model.uncond.params());
            result.uncond_losses.push_back(loss->value.item());
        }
    }

    // Diagonal Gaussian prior over z_sem.
    {
        int n = std::min<int>(cfg.prior_samples, static_cast<int>(corpus.size()));
        int zd = model.eps_a.config().z_dim;
        Tensor mean = Tensor::zeros({zd});
        Tensor var = Tensor::zeros({zd});
        std::vector<Tensor> zs;
        for (int i = 0; i < n; ++i) zs.push_back(model.encoder.encode(corpus[static_cast<size_t>(i)]));
        for (const auto& z : zs)
            for (int d = 0; d < zd; ++d) mean[d] += z[d] / n;
        for (const auto& z : zs)
            for (int d = 0; d < zd; ++d) {
                double dd = z[d] - mean[d];
                var[d] += dd * dd / n;
            }
        for (int d = 0; d < zd; ++d) var[d] = std::max(std::sqrt(var[d]), 1e-3);
        model.z_prior_mean = mean;
        model.z_prior_std = var;
    }

    model.freeze();
    return result;
}

EmbedderPretrainResult pretrain_embedder(const EmbedderPretrainConfig& cfg) {
    EmbedderConfig ecfg = cfg.embedder;
    if (ecfg.vocabulary.empty()) ecfg.vocabulary = toy_vocabulary();
    EmbedderPretrainResult result{EmbeddingBackend(ecfg, cfg.seed), {}};
    EmbeddingBackend& backend = result.backend;

    Rng rng(cfg.seed ^ 0xC11Full);
    AdamOptimizer opt(cfg.lr);
    double inv_tau = 1.0 / cfg.temperature;

    auto normalize = [](const Var& e) {
        Var n = sqrt_v(add_scalar(dot(e, e), 1e-12));
        return scale_by(e, divide(constant(Tensor::scalar(1.0)), n));
    };

    for (int step = 0; step < cfg.steps; ++step) {
        backend.params().zero_grad();
        std::vector<Var> img_emb, txt_emb;
        for (int b = 0; b < cfg.batch; ++b) {
            FaceParams p = sample_face_params(rng);
            Tensor img = render_face(p, cfg.image_size);
            img_emb.push_back(normalize(backend.image_embedding(constant(img))));
            txt_emb.push_back(normalize(backend.text_embedding(caption_tokens(p))));
        }
        int n = cfg.batch;
        std::vector<Var> logits(static_cast<size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                logits[static_cast<size_t>(i) * n + j] =
                    scale(dot(img_emb[static_cast<size_t>(i)], txt_emb[static_cast<size_t>(j)]),
                          inv_tau);
        Var loss;
        for (int i = 0; i < n; ++i) {
            std::vector<Var> row(logits.begin() + static_cast<long>(i) * n,
                                 logits.begin() + static_cast<long>(i + 1) * n);
            std::vector<Var> col;
            for (int j = 0; j < n; ++j) col.push_back(logits[static_cast<size_t>(j) * n + i]);
            Var li = neg(pick(log_softmax(stack_scalars(row)), i));
            Var lj = neg(pick(log_softmax(stack_scalars(col)), i));
            Var term = add(li, lj);
            loss = loss ? add(loss, term) : term;
        }
        loss = scale(loss, 1.0 / (2.0 * n));
        backward(loss);
        opt.step(backend.params());
        result.losses.push_back(loss->value.item());
    }
    backend.params().set_trainable(false);
    return result;
}

Checkpoint embedder_to_checkpoint(const EmbeddingBackend& backend) {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "embedder";
    ckpt.meta["format_version"] = 1;
    ckpt.meta["embedder"] = backend.config();
    ckpt.add_store("embedder.", backend.params());
    return ckpt;
}

EmbeddingBackend embedder_from_checkpoint(const Checkpoint& ckpt) {
    EmbeddingBackend backend(ckpt.meta.at("embedder").get<EmbedderConfig>(), 0);
    ckpt.load_store("embedder.", backend.params());
    backend.params().set_trainable(false);
    return backend;
}

}  // namespace stylediff
