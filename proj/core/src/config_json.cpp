#include "stylediff/config_json.hpp"

#include "stylediff/errors.hpp"

namespace stylediff {

void to_json(nlohmann::json& j, const UNetConfig& c) {
    j = {{"in_channels", c.in_channels},
         {"image_size", c.image_size},
         {"base_channels", c.base_channels},
         {"channel_mults", c.channel_mults},
         {"res_blocks_per_level", c.res_blocks_per_level},
         {"norm_groups", c.norm_groups},
         {"t_embed_dim", c.t_embed_dim},
         {"z_dim", c.z_dim}};
}

void from_json(const nlohmann::json& j, UNetConfig& c) {
    j.at("in_channels").get_to(c.in_channels);
    j.at("image_size").get_to(c.image_size);
    j.at("base_channels").get_to(c.base_channels);
    j.at("channel_mults").get_to(c.channel_mults);
    j.at("res_blocks_per_level").get_to(c.res_blocks_per_level);
    j.at("norm_groups").get_to(c.norm_groups);
    j.at("t_embed_dim").get_to(c.t_embed_dim);
    j.at("z_dim").get_to(c.z_dim);
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
    j = {{"in_channels", c.in_channels},
         {"image_size", c.image_size},
         {"widths", c.widths},
         {"norm_groups", c.norm_groups},
         {"z_dim", c.z_dim}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
    j.at("in_channels").get_to(c.in_channels);
    j.at("image_size").get_to(c.image_size);
    j.at("widths").get_to(c.widths);
    j.at("norm_groups").get_to(c.norm_groups);
    j.at("z_dim").get_to(c.z_dim);
}

void to_json(nlohmann::json& j, const EmbedderConfig& c) {
    j = {{"in_channels", c.in_channels}, {"embed_dim", c.embed_dim},   {"widths", c.widths},
         {"token_dim", c.token_dim},     {"min_image", c.min_image},   {"vocabulary", c.vocabulary}};
}

void from_json(const nlohmann::json& j, EmbedderConfig& c) {
    j.at("in_channels").get_to(c.in_channels);
    j.at("embed_dim").get_to(c.embed_dim);
    j.at("widths").get_to(c.widths);
    j.at("token_dim").get_to(c.token_dim);
    j.at("min_image").get_to(c.min_image);
    j.at("vocabulary").get_to(c.vocabulary);
}

void to_json(nlohmann::json& j, const SPNConfig& c) {
    j = {{"channels", c.channels},
         {"hidden", c.hidden},
         {"blocks", c.blocks},
         {"t_embed_dim", c.t_embed_dim},
         {"norm_groups", c.norm_groups}};
}

void from_json(const nlohmann::json& j, SPNConfig& c) {
    j.at("channels").get_to(c.channels);
    j.at("hidden").get_to(c.hidden);
    j.at("blocks").get_to(c.blocks);
    j.at("t_embed_dim").get_to(c.t_embed_dim);
    j.at("norm_groups").get_to(c.norm_groups);
}

void to_json(nlohmann::json& j, const LossWeights& w) {
    j = {{"re_image", w.re_image},
         {"re_lpips", w.re_lpips},
         {"re_clip", w.re_clip},
         {"cross", w.cross},
         {"in_domain", w.in_domain}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
    j.at("re_image").get_to(w.re_image);
    j.at("re_lpips").get_to(w.re_lpips);
    j.at("re_clip").get_to(w.re_clip);
    j.at("cross").get_to(w.cross);
    j.at("in_domain").get_to(w.in_domain);
}

nlohmann::json schedule_meta(const NoiseSchedule& s) { return {{"T", s.T}}; }

Tensor schedule_betas_tensor(const NoiseSchedule& s) {
    Tensor t({s.T + 1});
    for (int i = 0; i <= s.T; ++i) t[i] = s.betas[static_cast<size_t>(i)];
    return t;
}

Tensor schedule_sigmas_tensor(const NoiseSchedule& s) {
    Tensor t({s.T + 1});
    for (int i = 0; i <= s.T; ++i) t[i] = s.sigmas[static_cast<size_t>(i)];
    return t;
}

NoiseSchedule schedule_from_parts(const nlohmann::json& meta, const Tensor& betas,
                                  const Tensor& sigmas) {
    NoiseSchedule s;
    s.T = meta.at("T").get<int>();
    if (betas.size() != s.T + 1 || sigmas.size() != s.T + 1)
        throw_contract("schedule tensors do not match T");
    s.betas.assign(betas.data(), betas.data() + betas.size());
    s.sigmas.assign(sigmas.data(), sigmas.data() + sigmas.size());
    s.alpha_bars.assign(static_cast<size_t>(s.T + 1), 1.0);
    for (int t = 1; t <= s.T; ++t)
        s.alpha_bars[static_cast<size_t>(t)] =
            s.alpha_bars[static_cast<size_t>(t - 1)] * (1.0 - s.betas[static_cast<size_t>(t)]);
    s.validate();
    return s;
}

}  // namespace stylediff
