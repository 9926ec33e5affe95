#include "stylediff/spn.hpp"

#include <cmath>

#include "stylediff/errors.hpp"

namespace stylediff {

namespace {

Tensor sinusoidal_embedding(int t, int dim) {
    int half = dim / 2;
    Tensor e({dim});
    double* d = e.data();
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
        double a = static_cast<double>(t) * freq;
        d[i] = std::sin(a);
        d[half + i] = std::cos(a);
    }
    return e;
}

}  // namespace

SPN::SPN(SPNConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
    Rng rng(init_seed);
    int c_in = cfg_.channels;
    for (int i = 0; i < cfg_.blocks; ++i) {
        Block b;
        std::string name = "block" + std::to_string(i);
        b.out_channels = cfg_.hidden;
        b.conv_a.init(params_, name + ".conv_a", c_in, cfg_.hidden, 1, 1, 0, rng);
        b.gn_a.init(params_, name + ".gn_a", cfg_.hidden, cfg_.norm_groups);
        b.te_fc1.init(params_, name + ".te_fc1", cfg_.t_embed_dim, cfg_.t_embed_dim, rng);
        b.te_fc2.init(params_, name + ".te_fc2", cfg_.t_embed_dim, 2 * cfg_.hidden, rng);
        b.conv_b.init(params_, name + ".conv_b", cfg_.hidden, cfg_.hidden, 1, 1, 0, rng);
        b.gn_b.init(params_, name + ".gn_b", cfg_.hidden, cfg_.norm_groups);
        blocks_.push_back(b);
        c_in = cfg_.hidden;
    }
    out_conv_.init(params_, "out", cfg_.hidden, cfg_.channels, 1, 1, 0, rng, /*zero=*/true);
}

Var SPN::forward(const Var& image, int t) const {
    if (image->value.ndim() != 3 || image->value.dim(0) != cfg_.channels)
        throw_contract("spn: input shape mismatch");
    if (t < 1) throw_param("spn: timestep must be >= 1");
    Var temb = constant(sinusoidal_embedding(t, cfg_.t_embed_dim));
    Var h = image;
    for (const auto& b : blocks_) {
        h = b.conv_a(h);
        Var cond = b.te_fc2(silu(b.te_fc1(temb)));
        Var s = slice1d(cond, 0, b.out_channels);
        Var sh = slice1d(cond, b.out_channels, b.out_channels);
        h = silu(film(b.gn_a(h), s, sh));
        h = silu(b.gn_b(b.conv_b(h)));
    }
    return out_conv_(h);
}

Tensor SPN::apply(const Tensor& image, int t) const {
    NoGradGuard ng;
    return forward(constant(image), t)->value;
}

Tensor spn_apply(const SPN& spn, const Tensor& image, int t) { return spn.apply(image, t); }

Var blend(const Var& x_t, const Var& residual, double lambda_spn) {
    if (lambda_spn < 0.0) throw_param("blend: lambda_spn must be >= 0");
    if (!x_t->value.same_shape(residual->value)) throw_contract("blend: shape mismatch");
    if (lambda_spn == 0.0) return x_t;
    return add(x_t, scale(residual, lambda_spn));
}

Tensor blend(const Tensor& x_t, const Tensor& residual, double lambda_spn) {
    NoGradGuard ng;
    return blend(constant(x_t), constant(residual), lambda_spn)->value;
}

Var reverse_step_with_spn(const UNet& denoiser, const LatentPair& latents, const Var& x_t, int t,
                          int t_prev, const Var& input_image, const SPN& spn, double lambda_spn,
                          const NoiseSchedule& sched) {
    Var x_eff = x_t;
    if (lambda_spn != 0.0) x_eff = blend(x_t, spn.forward(input_image, t), lambda_spn);
    DenoiseFn fn = [&](const Var& x, int tt) { return denoiser.forward(x, tt, latents); };
    return ddim_reverse_step(fn, x_eff, t, t_prev, sched);
}

Var spn_reverse_trajectory(const UNet& denoiser, const LatentPair& latents, const Var& x_t0,
                           int t0, const Var& input_image, const SPN& spn, double lambda_spn,
                           int n_steps, const NoiseSchedule& sched) {
    auto grid = TimestepSubsequence::linspace(0, t0, n_steps);
    Var x = x_t0;
    const auto& ts = grid.steps;
    for (size_t i = ts.size(); i-- > 1;)
        x = reverse_step_with_spn(denoiser, latents, x, ts[i], ts[i - 1], input_image, spn,
                                  lambda_spn, sched);
    return x;
}

}  // namespace stylediff
