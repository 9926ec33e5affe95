#include "stylediff/unet.hpp"

#include <algorithm>
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

UNet::UNet(UNetConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
    if (cfg_.channel_mults.empty()) throw_param("unet: channel_mults must be non-empty");
    if (cfg_.base_channels % cfg_.norm_groups != 0)
        throw_param("unet: base_channels must be divisible by norm_groups");
    Rng rng(init_seed);

    int levels = static_cast<int>(cfg_.channel_mults.size());
    std::vector<int> ch(levels);
    for (int i = 0; i < levels; ++i) ch[i] = cfg_.base_channels * cfg_.channel_mults[i];

    stem_.init(params_, "stem", cfg_.in_channels, ch[0], 3, 1, 1, rng);
    temb_fc1_.init(params_, "temb.fc1", cfg_.t_embed_dim, cfg_.t_embed_dim, rng);
    temb_fc2_.init(params_, "temb.fc2", cfg_.t_embed_dim, cfg_.t_embed_dim, rng);

    int res = cfg_.image_size;
    enc_levels_.resize(levels);
    for (int l = 0; l < levels; ++l) {
        for (int b = 0; b < cfg_.res_blocks_per_level; ++b) {
            enc_levels_[l].push_back(
                make_block("enc" + std::to_string(l) + ".b" + std::to_string(b), ch[l], ch[l], res, rng));
        }
        if (l + 1 < levels) {
            Conv2dLayer down;
            down.init(params_, "down" + std::to_string(l), ch[l], ch[l + 1], 3, 2, 1, rng);
            downs_.push_back(down);
            res /= 2;
        }
    }
    mid_ = make_block("mid", ch[levels - 1], ch[levels - 1], res, rng);

    dec_levels_.resize(levels);
    for (int l = levels - 1; l >= 0; --l) {
        for (int b = 0; b < cfg_.res_blocks_per_level; ++b) {
            int c_in = (b == 0) ? 2 * ch[l] : ch[l];  // first block consumes the skip concat
            dec_levels_[l].push_back(
                make_block("dec" + std::to_string(l) + ".b" + std::to_string(b), c_in, ch[l], res, rng));
        }
        if (l > 0) {
            Conv2dLayer up;
            up.init(params_, "up" + std::to_string(l - 1), ch[l], ch[l - 1], 3, 1, 1, rng);
            ups_.push_back(up);  // stored deepest-first
            res *= 2;
        }
    }
    out_norm_.init(params_, "out.norm", ch[0], cfg_.norm_groups);
    out_conv_.init(params_, "out.conv", ch[0], cfg_.in_channels, 3, 1, 1, rng, /*zero=*/true);
}

UNet::ResBlock UNet::make_block(const std::string& name, int c_in, int c_out, int resolution,
                                Rng& rng) {
    ResBlock b;
    b.resolution = resolution;
    b.out_channels = c_out;
    b.gn1.init(params_, name + ".gn1", c_in, cfg_.norm_groups);
    b.conv1.init(params_, name + ".conv1", c_in, c_out, 3, 1, 1, rng);
    b.gn2.init(params_, name + ".gn2", c_out, cfg_.norm_groups);
    b.conv2.init(params_, name + ".conv2", c_out, c_out, 3, 1, 1, rng, /*zero=*/true);
    b.t_proj.init(params_, name + ".t_proj", cfg_.t_embed_dim, 2 * c_out, rng);
    if (cfg_.z_dim > 0) b.z_proj.init(params_, name + ".z_proj", cfg_.z_dim, 2 * c_out, rng);
    b.has_skip = (c_in != c_out);
    if (b.has_skip) b.skip.init(params_, name + ".skip", c_in, c_out, 1, 1, 0, rng);
    return b;
}

std::vector<int> UNet::resolution_ladder() const {
    std::vector<int> ladder;
    int res = cfg_.image_size;
    for (size_t l = 0; l < cfg_.channel_mults.size(); ++l) {
        ladder.push_back(res);
        res /= 2;
    }
    return ladder;
}

bool UNet::on_ladder(int resolution) const {
    auto ladder = resolution_ladder();
    return std::find(ladder.begin(), ladder.end(), resolution) != ladder.end();
}

Var UNet::time_embedding(int t) const {
    Var e = constant(sinusoidal_embedding(t, cfg_.t_embed_dim));
    return temb_fc2_(silu(temb_fc1_(e)));
}

Var UNet::run_block(const ResBlock& b, const Var& x, const Var& temb,
                    const LatentPair& latents) const {
    Var h = b.conv1(silu(b.gn1(x)));
    Var cond = b.t_proj(silu(temb));
    if (cfg_.z_dim > 0) {
        const Var& z = latents.pick(b.resolution);
        if (z->value.dim(0) != cfg_.z_dim) throw_contract("unet: latent dimension mismatch");
        cond = add(cond, b.z_proj(z));
    }
    Var s = slice1d(cond, 0, b.out_channels);
    Var sh = slice1d(cond, b.out_channels, b.out_channels);
    h = b.conv2(silu(film(b.gn2(h), s, sh)));
    Var res = b.has_skip ? b.skip(x) : x;
    return add(h, res);
}

Var UNet::forward(const Var& x, int t, const LatentPair& latents) const {
    if (x->value.ndim() != 3 || x->value.dim(0) != cfg_.in_channels ||
        x->value.dim(1) != cfg_.image_size || x->value.dim(2) != cfg_.image_size)
        throw_contract("unet: input shape mismatch");
    Var temb = time_embedding(t);

    int levels = static_cast<int>(cfg_.channel_mults.size());
    Var h = stem_(x);
    std::vector<Var> skips(static_cast<size_t>(levels));
    for (int l = 0; l < levels; ++l) {
        for (const auto& b : enc_levels_[static_cast<size_t>(l)]) h = run_block(b, h, temb, latents);
        skips[static_cast<size_t>(l)] = h;
        if (l + 1 < levels) h = downs_[static_cast<size_t>(l)](h);
    }
    h = run_block(mid_, h, temb, latents);
    for (int l = levels - 1; l >= 0; --l) {
        h = concat_ch(h, skips[static_cast<size_t>(l)]);
        for (const auto& b : dec_levels_[static_cast<size_t>(l)]) h = run_block(b, h, temb, latents);
        if (l > 0) h = ups_[static_cast<size_t>(levels - 1 - l)](upsample_nearest2(h));
    }
    return out_conv_(silu(out_norm_(h)));
}

Var UNet::forward(const Var& x, int t, const Var& z) const {
    return forward(x, t, LatentPair::single(z));
}

Tensor UNet::denoise(const Tensor& x, int t, const Tensor& z) const {
    NoGradGuard ng;
    return forward(constant(x), t, LatentPair::single(constant(z)))->value;
}

ConditioningPlan make_conditioning_plan(const Tensor& z_in, const Tensor& z_style, int f_ch,
                                        const UNet& denoiser) {
    if (denoiser.config().z_dim == 0)
        throw_contract("make_conditioning_plan: denoiser is unconditional");
    if (z_in.ndim() != 1 || z_in.dim(0) != denoiser.config().z_dim || !z_style.same_shape(z_in))
        throw_contract("make_conditioning_plan: latent dimension mismatch");
    if (f_ch != 0 && f_ch != fch_all_input && !denoiser.on_ladder(f_ch))
        throw_param("make_conditioning_plan: f_ch not on the resolution ladder");
    ConditioningPlan plan;
    plan.f_ch = f_ch;
    plan.z_in = z_in;
    plan.z_style = z_style;
    for (int res : denoiser.resolution_ladder())
        plan.assignments[res] = (res >= f_ch) ? LatentRole::style : LatentRole::input;
    return plan;
}

Tensor denoise_with_plan(const UNet& denoiser, const Tensor& x_t, int t,
                         const ConditioningPlan& plan) {
    for (const auto& [res, role] : plan.assignments) {
        (void)role;
        if (!denoiser.on_ladder(res)) throw_contract("denoise_with_plan: plan built for another denoiser");
    }
    NoGradGuard ng;
    LatentPair lat{constant(plan.z_in), constant(plan.z_style), plan.f_ch};
    return denoiser.forward(constant(x_t), t, lat)->value;
}

}  // namespace stylediff
