#include "stylediff/finetune.hpp"

#include <cmath>

#include "stylediff/config_json.hpp"
#include "stylediff/diffae.hpp"
#include "stylediff/errors.hpp"

namespace stylediff {

StylePair prepare_style_pair(const UNet& uncond_ddpm, const NoiseSchedule& sched,
                             const Tensor& style_b, int t0, int n_candidates,
                             const EmbeddingBackend& backend, uint64_t seed,
                             std::vector<Tensor>* candidates_out, std::vector<double>* scores_out) {
    if (uncond_ddpm.config().z_dim != 0)
        throw_contract("prepare_style_pair: denoiser must be unconditional");
    if (t0 < 1 || t0 > sched.T) throw_param("prepare_style_pair: t0 out of range");
    if (n_candidates < 1) throw_param("prepare_style_pair: need at least one candidate");

    NoGradGuard ng;
    Rng master(seed);
    DenoiseFn fn = [&](const Var& x, int t) { return uncond_ddpm.forward(x, t, LatentPair{}); };
    auto steps = TimestepSubsequence::dense(0, t0);

    StylePair pair;
    pair.style_b = style_b.clone();
    pair.candidate_count = n_candidates;
    double best = 0.0;
    for (int i = 0; i < n_candidates; ++i) {
        Rng stream = master.fork(static_cast<uint64_t>(i));
        Tensor z = stream.normal_tensor(style_b.shape());
        Var x_t0 = forward_marginal(constant(style_b), t0, constant(z), sched);
        Var cand = run_trajectory(fn, x_t0, steps, TrajectoryDirection::decode,
                                  TrajectoryMode::ddpm, stream.next_u64(), sched);
        double score = l1_mean(constant(cand->value), constant(style_b))->value.item() +
                       backend.perceptual_distance(cand->value, style_b);
        if (candidates_out) candidates_out->push_back(cand->value);
        if (scores_out) scores_out->push_back(score);
        if (i == 0 || score < best) {
            best = score;
            pair.style_a = cand->value;
            pair.selection_score = score;
        }
    }
    return pair;
}

Tensor sample_input_image(const BaseModel& base, InputSource source,
                          const std::vector<Tensor>* corpus, Rng& rng, int gen_steps) {
    if (source == InputSource::corpus) {
        if (!corpus || corpus->empty()) throw_config("sample_input_image: corpus not provided");
        return (*corpus)[static_cast<size_t>(rng.uniform_int(static_cast<int>(corpus->size())))];
    }
    int zd = base.eps_a.config().z_dim;
    if (base.z_prior_mean.size() != zd) throw_config("sample_input_image: prior not fitted");
    Tensor z({zd});
    for (int d = 0; d < zd; ++d) z[d] = base.z_prior_mean[d] + base.z_prior_std[d] * rng.normal();
    int img = base.eps_a.config().image_size;
    Tensor x_T = rng.normal_tensor({base.eps_a.config().in_channels, img, img});
    return diffae_decode(base.eps_a, {x_T, base.sched.T}, z, gen_steps, base.sched);
}

void FinetuneConfig::validate(const NoiseSchedule& sched) const {
    if (t0 < 1 || t0 > sched.T) throw_config("finetune: t0 must lie in [1, T]");
    if (iterations < 0) throw_config("finetune: iterations must be >= 0");
    if (candidates < 1) throw_config("finetune: candidates must be >= 1");
    if (traj_steps < 1 || input_gen_steps < 1) throw_config("finetune: step counts must be >= 1");
    if (lambda_spn < 0.0) throw_config("finetune: lambda_spn must be >= 0");
    if (!(learning_rate > 0.0)) throw_config("finetune: learning rate must be > 0");
    weights.validate();
}

FinetuneState::FinetuneState(const BaseModel& base, const StylePair& pair,
                             const FinetuneConfig& cfg)
    : eps_b(base.eps_a.config(), /*init_seed=*/0),
      spn(cfg.spn, cfg.seed ^ 0x5137Dull),
      opt_eps_b(cfg.learning_rate),
      opt_spn(cfg.learning_rate) {
    eps_b.role = "trainable_B";
    // eps_B starts as an exact copy of eps_A
    std::map<std::string, Tensor> snap = base.eps_a.params().snapshot();
    eps_b.params().load(snap);

    z_style = base.encoder.encode(pair.style_a);
    x_style_t0 = diffae_encode(base.eps_a, pair.style_a, z_style, cfg.t0, cfg.traj_steps, base.sched);
}

LossReport finetune_step(FinetuneState& state, const BaseModel& base,
                         const EmbeddingBackend& backend, const Tensor& input_image,
                         const StylePair& pair, const FinetuneConfig& cfg) {
    const NoiseSchedule& sched = base.sched;
    LossReport report;

    state.eps_b.params().zero_grad();
    state.spn.params().zero_grad();

    // Input path: encode with frozen eps_A, regenerate through eps_B + SPN.
    Tensor z_in = base.encoder.encode(input_image);
    StructuralLatent x_in_t0 =
        diffae_encode(base.eps_a, input_image, z_in, cfg.t0, cfg.traj_steps, sched);

    Var input_const = constant(input_image);
    Var style_a_const = constant(pair.style_a);
    Var style_b_const = constant(pair.style_b);

    {
        LatentPair lat = LatentPair::single(constant(z_in));
        Var in_b = spn_reverse_trajectory(state.eps_b, lat, constant(x_in_t0.tensor), cfg.t0,
                                          input_const, state.spn, cfg.lambda_spn, cfg.traj_steps,
                                          sched);
        Var cross = cross_domain_loss(backend, style_a_const, style_b_const, input_const, in_b);
        Var in_dom = in_domain_loss(backend, style_a_const, style_b_const, input_const, in_b);
        Var directional = add(scale(cross, cfg.weights.cross), scale(in_dom, cfg.weights.in_domain));
        backward(directional);
        report.cross = cross->value.item();
        report.in_domain = in_dom->value.item();
    }

    // Reconstruction path: regenerate the style image from its own latents.
    {
        LatentPair lat = LatentPair::single(constant(state.z_style));
        Var recon = spn_reverse_trajectory(state.eps_b, lat, constant(state.x_style_t0.tensor),
                                           cfg.t0, style_a_const, state.spn, cfg.lambda_spn,
                                           cfg.traj_steps, sched);
        ReconTerms terms = reconstruction_loss(backend, style_b_const, recon, cfg.weights);
        backward(terms.weighted);
        report.recon_image = terms.image->value.item();
        report.recon_lpips = terms.lpips->value.item();
        report.recon_clip = terms.clip->value.item();
    }

    report.total = report.recombine(cfg.weights);
    if (!std::isfinite(report.total))
        throw_compute("finetune: non-finite loss at iteration " + std::to_string(state.iteration));

    state.opt_eps_b.step(state.eps_b.params());
    state.opt_spn.step(state.spn.params());
    ++state.iteration;
    return report;
}

Checkpoint FinetunedModel::to_checkpoint() const {
    Checkpoint ckpt = base.to_checkpoint();
    ckpt.meta["kind"] = "finetuned";
    ckpt.meta["spn"] = spn.config();
    ckpt.meta["finetune"] = {{"t0", config.t0},
                             {"weights", config.weights},
                             {"lambda_spn", config.lambda_spn},
                             {"iterations", config.iterations},
                             {"learning_rate", config.learning_rate},
                             {"seed", config.seed},
                             {"candidates", config.candidates},
                             {"input_source", config.input_source == InputSource::latent_prior
                                                  ? "latent_prior"
                                                  : "corpus"},
                             {"traj_steps", config.traj_steps},
                             {"input_gen_steps", config.input_gen_steps}};
    ckpt.meta["pair"] = {{"selection_score", pair.selection_score},
                         {"candidate_count", pair.candidate_count}};
    ckpt.add_store("eps_b.", eps_b.params());
    ckpt.add_store("spn.", spn.params());
    ckpt.add("pair.style_b", pair.style_b.clone());
    ckpt.add("pair.style_a", pair.style_a.clone());
    if (!metrics.empty()) {
        Tensor log({static_cast<int>(metrics.size()), 6});
        for (size_t i = 0; i < metrics.size(); ++i) {
            const LossReport& r = metrics[i];
            double row[6] = {r.cross, r.in_domain, r.recon_image, r.recon_lpips, r.recon_clip,
                             r.total};
            for (int j = 0; j < 6; ++j) log[static_cast<int64_t>(i) * 6 + j] = row[j];
        }
        ckpt.add("metrics.log", std::move(log));
    }
    return ckpt;
}

FinetunedModel FinetunedModel::from_checkpoint(const Checkpoint& ckpt) {
    BaseModel base = BaseModel::from_checkpoint(ckpt);
    FinetuneConfig cfg;
    const auto& j = ckpt.meta.at("finetune");
    j.at("t0").get_to(cfg.t0);
    j.at("weights").get_to(cfg.weights);
    j.at("lambda_spn").get_to(cfg.lambda_spn);
    j.at("iterations").get_to(cfg.iterations);
    j.at("learning_rate").get_to(cfg.learning_rate);
    j.at("seed").get_to(cfg.seed);
    j.at("candidates").get_to(cfg.candidates);
    cfg.input_source = (j.at("input_source").get<std::string>() == "corpus")
                           ? InputSource::corpus
                           : InputSource::latent_prior;
    j.at("traj_steps").get_to(cfg.traj_steps);
    j.at("input_gen_steps").get_to(cfg.input_gen_steps);
    cfg.spn = ckpt.meta.at("spn").get<SPNConfig>();

    StylePair pair;
    pair.style_b = ckpt.get("pair.style_b").clone();
    pair.style_a = ckpt.get("pair.style_a").clone();
    ckpt.meta.at("pair").at("selection_score").get_to(pair.selection_score);
    ckpt.meta.at("pair").at("candidate_count").get_to(pair.candidate_count);

    UNet eps_b(base.eps_a.config(), 0);
    eps_b.role = "trainable_B";
    ckpt.load_store("eps_b.", eps_b.params());
    SPN spn(cfg.spn, 0);
    ckpt.load_store("spn.", spn.params());

    std::vector<LossReport> metrics;
    if (ckpt.has("metrics.log")) {
        const Tensor& log = ckpt.get("metrics.log");
        for (int i = 0; i < log.dim(0); ++i) {
            LossReport r;
            r.cross = log[static_cast<int64_t>(i) * 6 + 0];
            r.in_domain = log[static_cast<int64_t>(i) * 6 + 1];
            r.recon_image = log[static_cast<int64_t>(i) * 6 + 2];
            r.recon_lpips = log[static_cast<int64_t>(i) * 6 + 3];
            r.recon_clip = log[static_cast<int64_t>(i) * 6 + 4];
            r.total = log[static_cast<int64_t>(i) * 6 + 5];
            metrics.push_back(r);
        }
    }
    return FinetunedModel(std::move(base), std::move(eps_b), std::move(spn), std::move(pair),
                          std::move(cfg), std::move(metrics));
}

FinetunedModel finetune(const BaseModel& base, const EmbeddingBackend& backend,
                        const StylePair& pair, const FinetuneConfig& cfg,
                        const std::vector<Tensor>* input_corpus) {
    cfg.validate(base.sched);
    FinetuneState state(base, pair, cfg);
    Rng master(cfg.seed);
    std::vector<LossReport> metrics;
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        Rng stream = master.fork(static_cast<uint64_t>(iter));
        Tensor input = sample_input_image(base, cfg.input_source, input_corpus, stream,
                                          cfg.input_gen_steps);
        metrics.push_back(finetune_step(state, base, backend, input, pair, cfg));
    }
    return FinetunedModel(base.clone(), std::move(state.eps_b), std::move(state.spn), pair, cfg,
                          std::move(metrics));
}

}  // namespace stylediff
