#include "stylediff/sampler.hpp"

#include "stylediff/diffae.hpp"
#include "stylediff/errors.hpp"

namespace stylediff {

namespace {

Tensor stylize_from_latents(const FinetunedModel& model, const Tensor& input, const Tensor& z_in,
                            const Tensor& z_style, const StylizeOptions& opts) {
    const BaseModel& base = model.base;
    if (opts.t0 < 1 || opts.t0 > base.sched.T) throw_param("stylize: t0 out of range");
    // validates f_ch and materializes the role map
    ConditioningPlan plan = make_conditioning_plan(z_in, z_style, opts.f_ch, model.eps_b);

    StructuralLatent x_t0 =
        diffae_encode(base.eps_a, input, z_in, opts.t0, opts.steps, base.sched);

    NoGradGuard ng;
    Var zi = constant(plan.z_in);
    Var zs = constant(plan.z_style);
    LatentPair lat =
        opts.swap_roles ? LatentPair{zs, zi, plan.f_ch} : LatentPair{zi, zs, plan.f_ch};
    const UNet& denoiser = opts.use_base_denoiser ? base.eps_a : model.eps_b;
    Var out = spn_reverse_trajectory(denoiser, lat, constant(x_t0.tensor), opts.t0,
                                     constant(input), model.spn, opts.lambda_spn, opts.steps,
                                     base.sched);
    return out->value;
}

}  // namespace

Tensor stylize(const FinetunedModel& model, const Tensor& input, const StylizeOptions& opts) {
    const EncoderConfig& ec = model.base.encoder.config();
    if (input.ndim() != 3 || input.dim(1) != ec.image_size || input.dim(2) != ec.image_size)
        throw_contract("stylize: input resolution mismatch");
    Tensor z_in = model.base.encoder.encode(input);
    // at sampling time the style latent is sourced from I_style_B
    Tensor z_style = model.base.encoder.encode(model.pair.style_b);
    return stylize_from_latents(model, input, z_in, z_style, opts);
}

TextOptResult optimize_semantic_for_text(const BaseModel& base, const EmbeddingBackend& backend,
                                         const Tensor& input, const std::vector<std::string>& src,
                                         const std::vector<std::string>& trg, int steps, double lr,
                                         int t0, int traj_steps) {
    if (src == trg) throw_param("optimize_semantic_for_text: degenerate prompt pair");
    if (t0 < 1 || t0 > base.sched.T) throw_param("optimize_semantic_for_text: t0 out of range");
    for (const auto& tok : src) backend.token_id(tok);
    for (const auto& tok : trg) backend.token_id(tok);

    TextOptResult result;
    Tensor z0 = base.encoder.encode(input);
    result.z_opt = z0.clone();
    if (steps == 0) return result;

    StructuralLatent x_t0 = diffae_encode(base.eps_a, input, z0, t0, traj_steps, base.sched);

    ParamStore store;
    Param* zp = store.add("z", z0.clone());
    AdamOptimizer opt(lr);
    Var input_const = constant(input);

    // Each pass evaluates the loss at the current iterate, then updates; the
    // first pass therefore records the initial loss at z0 itself.
    for (int i = 0; i < steps; ++i) {
        Tensor before = zp->value.clone();
        store.zero_grad();
        Var zv = param_var(*zp);
        Var decoded =
            diffae_decode_var(base.eps_a, constant(x_t0.tensor), t0, zv, traj_steps, base.sched);
        Var loss = text_directional_loss(backend, src, trg, input_const, decoded);
        double lv = loss->value.item();
        result.losses.push_back(lv);
        if (i == 0) {
            result.initial_loss = lv;
            result.best_loss = lv;
            result.z_opt = before;
        } else if (lv < result.best_loss) {
            result.best_loss = lv;
            result.z_opt = before;
        }
        backward(loss);
        opt.step(store);
    }
    // evaluate the final iterate too
    {
        NoGradGuard ng;
        Var decoded = diffae_decode_var(base.eps_a, constant(x_t0.tensor), t0,
                                        constant(zp->value), traj_steps, base.sched);
        double lv = text_directional_loss(backend, src, trg, input_const, decoded)->value.item();
        result.losses.push_back(lv);
        if (lv < result.best_loss) {
            result.best_loss = lv;
            result.z_opt = zp->value.clone();
        }
    }
    return result;
}

Tensor stylize_with_text(const FinetunedModel& model, const EmbeddingBackend& backend,
                         const Tensor& input, const std::vector<std::string>& src,
                         const std::vector<std::string>& trg, const TextEditOptions& opts) {
    Tensor z_in = model.base.encoder.encode(input);
    if (!(src == trg) && opts.opt_steps > 0) {
        TextOptResult r = optimize_semantic_for_text(model.base, backend, input, src, trg,
                                                     opts.opt_steps, opts.opt_lr,
                                                     opts.stylize.t0, opts.stylize.steps);
        z_in = r.z_opt;
    }
    Tensor z_style = model.base.encoder.encode(model.pair.style_b);
    if (!opts.recompute_structural) {
        // structural latent keeps the original encoding; stylize_from_latents
        // would otherwise re-encode with z*, so encode here with Enc(input).
        Tensor z_orig = model.base.encoder.encode(input);
        StructuralLatent x_t0 = diffae_encode(model.base.eps_a, input, z_orig, opts.stylize.t0,
                                              opts.stylize.steps, model.base.sched);
        ConditioningPlan plan = make_conditioning_plan(z_in, z_style, opts.stylize.f_ch, model.eps_b);
        NoGradGuard ng;
        Var zi = constant(plan.z_in);
        Var zs = constant(plan.z_style);
        LatentPair lat = opts.stylize.swap_roles ? LatentPair{zs, zi, plan.f_ch}
                                                 : LatentPair{zi, zs, plan.f_ch};
        const UNet& denoiser = opts.stylize.use_base_denoiser ? model.base.eps_a : model.eps_b;
        Var out = spn_reverse_trajectory(denoiser, lat, constant(x_t0.tensor), opts.stylize.t0,
                                         constant(input), model.spn, opts.stylize.lambda_spn,
                                         opts.stylize.steps, model.base.sched);
        return out->value;
    }
    return stylize_from_latents(model, input, z_in, z_style, opts.stylize);
}

}  // namespace stylediff
