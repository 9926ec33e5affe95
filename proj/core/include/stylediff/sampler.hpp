#pragma once

#include "stylediff/finetune.hpp"

namespace stylediff {

struct StylizeOptions {
    int f_ch = 16;  // 0, a ladder resolution, or fch_all_input
    double lambda_spn = 0.1;
    int t0 = 50;
    int steps = 8;
    bool swap_roles = false;         // conditioning ablation: style on low-res, input on high-res
    bool use_base_denoiser = false;  // decode with frozen eps_A instead of eps_B (testing hook)
};

// Content/style mixing: encode the input to its structural latent with
// frozen eps_A, then decode through eps_B under the f_ch conditioning plan
// with the SPN residual. z_style comes from the checkpoint's style image.
Tensor stylize(const FinetunedModel& model, const Tensor& input, const StylizeOptions& opts);

struct TextOptResult {
    Tensor z_opt;
    double initial_loss = 0.0;
    double best_loss = 0.0;
    std::vector<double> losses;  // loss at each evaluated iterate
};

// Gradient descent on z_sem starting from Enc(input), minimizing the text
// directional loss of the image decoded from the frozen structural latent
// through frozen eps_A. Returns the best evaluated iterate.
TextOptResult optimize_semantic_for_text(const BaseModel& base, const EmbeddingBackend& backend,
                                         const Tensor& input, const std::vector<std::string>& src,
                                         const std::vector<std::string>& trg, int steps, double lr,
                                         int t0, int traj_steps);

struct TextEditOptions {
    StylizeOptions stylize{};
    int opt_steps = 40;
    double opt_lr = 0.05;
    bool recompute_structural = false;  // re-encode x_t0 with the optimized z*
};

// Runs optimize_semantic_for_text against the base networks, then stylizes
// with z* in place of z_in. Equal prompts short-circuit to plain stylize.
Tensor stylize_with_text(const FinetunedModel& model, const EmbeddingBackend& backend,
                         const Tensor& input, const std::vector<std::string>& src,
                         const std::vector<std::string>& trg, const TextEditOptions& opts);

}  // namespace stylediff
