#include "stylediff/diffusion.hpp"

#include <cmath>

#include "stylediff/errors.hpp"

namespace stylediff {

TimestepSubsequence TimestepSubsequence::linspace(int t_lo, int t_hi, int n_transitions) {
    if (t_lo < 0 || t_hi < t_lo) throw_param("linspace: need 0 <= t_lo <= t_hi");
    if (n_transitions < 0) throw_param("linspace: negative step count");
    TimestepSubsequence s;
    if (t_hi == t_lo || n_transitions == 0) {
        s.steps = {t_lo};
        if (t_hi != t_lo) s.steps.push_back(t_hi);
        return s;
    }
    for (int i = 0; i <= n_transitions; ++i) {
        double f = static_cast<double>(i) / n_transitions;
        int t = t_lo + static_cast<int>(std::lround(f * (t_hi - t_lo)));
        if (s.steps.empty() || t > s.steps.back()) s.steps.push_back(t);
    }
    return s;
}

TimestepSubsequence TimestepSubsequence::dense(int t_lo, int t_hi) {
    if (t_lo < 0 || t_hi < t_lo) throw_param("dense: need 0 <= t_lo <= t_hi");
    TimestepSubsequence s;
    for (int t = t_lo; t <= t_hi; ++t) s.steps.push_back(t);
    return s;
}

void TimestepSubsequence::validate(int T) const {
    if (steps.empty()) throw_param("timestep subsequence is empty");
    if (steps.front() < 0 || steps.back() > T) throw_param("timestep subsequence out of [0, T]");
    for (size_t i = 1; i < steps.size(); ++i)
        if (steps[i] <= steps[i - 1]) throw_param("timestep subsequence must be strictly increasing");
}

namespace {

void check_t(int t, int lo, int hi, const char* what) {
    if (t < lo || t > hi) throw_param(std::string(what) + ": timestep out of range");
}

Var call_denoiser(const DenoiseFn& eps_fn, const Var& x_t, int t) {
    Var eps = eps_fn(x_t, t);
    if (!eps->value.same_shape(x_t->value)) throw_contract("denoiser output shape mismatch");
    return eps;
}

}  // namespace

Var forward_marginal(const Var& x0, int t, const Var& z, const NoiseSchedule& sched) {
    check_t(t, 0, sched.T, "forward_marginal");
    if (!z->value.same_shape(x0->value)) throw_contract("forward_marginal: noise shape mismatch");
    double ab = sched.alpha_bar(t);
    return add(scale(x0, std::sqrt(ab)), scale(z, std::sqrt(1.0 - ab)));
}

Var predict_x0(const Var& x_t, int t, const Var& eps, const NoiseSchedule& sched) {
    check_t(t, 1, sched.T, "predict_x0");
    if (!eps->value.same_shape(x_t->value)) throw_contract("predict_x0: eps shape mismatch");
    double ab = sched.alpha_bar(t);
    return scale(sub(x_t, scale(eps, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
}

Var ddpm_reverse_step(const DenoiseFn& eps_fn, const Var& x_t, int t, const Var& z,
                      const NoiseSchedule& sched) {
    check_t(t, 1, sched.T, "ddpm_reverse_step");
    if (!z->value.same_shape(x_t->value)) throw_contract("ddpm_reverse_step: noise shape mismatch");
    double beta = sched.beta(t);
    double ab = sched.alpha_bar(t);
    double sigma = sched.sigma(t);
    Var eps = call_denoiser(eps_fn, x_t, t);
    Var mu = scale(sub(x_t, scale(eps, beta / std::sqrt(1.0 - ab))), 1.0 / std::sqrt(1.0 - beta));
    if (sigma == 0.0) return mu;
    return add(mu, scale(z, sigma));
}

namespace {

// Shared DDIM update: x_target = sqrt(abar_target) f(x,t) + sqrt(1-abar_target) eps(x,t).
// At t = 0 (abar = 1) the f-term reduces to x exactly.
Var ddim_step(const DenoiseFn& eps_fn, const Var& x_t, int t, int t_target,
              const NoiseSchedule& sched) {
    double ab_t = sched.alpha_bar(t);
    double ab_target = sched.alpha_bar(t_target);
    Var eps = call_denoiser(eps_fn, x_t, t);
    Var f = scale(sub(x_t, scale(eps, std::sqrt(1.0 - ab_t))), 1.0 / std::sqrt(ab_t));
    return add(scale(f, std::sqrt(ab_target)), scale(eps, std::sqrt(1.0 - ab_target)));
}

}  // namespace

Var ddim_forward_step(const DenoiseFn& eps_fn, const Var& x_t, int t, int t_next,
                      const NoiseSchedule& sched) {
    if (!(0 <= t && t < t_next && t_next <= sched.T))
        throw_param("ddim_forward_step: need 0 <= t < t_next <= T");
    return ddim_step(eps_fn, x_t, t, t_next, sched);
}

Var ddim_reverse_step(const DenoiseFn& eps_fn, const Var& x_t, int t, int t_prev,
                      const NoiseSchedule& sched) {
    if (!(0 <= t_prev && t_prev < t && t <= sched.T))
        throw_param("ddim_reverse_step: need 0 <= t_prev < t <= T");
    return ddim_step(eps_fn, x_t, t, t_prev, sched);
}

Var run_trajectory(const DenoiseFn& eps_fn, const Var& x_start, const TimestepSubsequence& steps,
                   TrajectoryDirection direction, TrajectoryMode mode, uint64_t rng_seed,
                   const NoiseSchedule& sched, std::vector<Tensor>* trace) {
    steps.validate(sched.T);
    if (mode == TrajectoryMode::ddpm) {
        if (direction != TrajectoryDirection::decode)
            throw_param("run_trajectory: ddpm mode supports decode only");
        for (size_t i = 1; i < steps.steps.size(); ++i)
            if (steps.steps[i] != steps.steps[i - 1] + 1)
                throw_param("run_trajectory: ddpm mode requires a dense step list");
    }

    Var x = x_start;
    if (trace) trace->push_back(x->value);
    const auto& ts = steps.steps;
    if (direction == TrajectoryDirection::encode) {
        for (size_t i = 0; i + 1 < ts.size(); ++i) {
            x = ddim_forward_step(eps_fn, x, ts[i], ts[i + 1], sched);
            if (trace) trace->push_back(x->value);
        }
        return x;
    }
    Rng rng(rng_seed);
    for (size_t i = ts.size(); i-- > 1;) {
        int t = ts[i];
        int t_prev = ts[i - 1];
        if (mode == TrajectoryMode::ddim) {
            x = ddim_reverse_step(eps_fn, x, t, t_prev, sched);
        } else {
            Tensor z = (t_prev == 0) ? Tensor::zeros(x->value.shape())
                                     : rng.normal_tensor(x->value.shape());
            x = ddpm_reverse_step(eps_fn, x, t, constant(std::move(z)), sched);
        }
        if (trace) trace->push_back(x->value);
    }
    return x;
}

Tensor forward_marginal(const Tensor& x0, int t, const Tensor& z, const NoiseSchedule& sched) {
    NoGradGuard ng;
    return forward_marginal(constant(x0), t, constant(z), sched)->value;
}

Tensor predict_x0(const Tensor& x_t, int t, const Tensor& eps, const NoiseSchedule& sched) {
    NoGradGuard ng;
    return predict_x0(constant(x_t), t, constant(eps), sched)->value;
}

}  // namespace stylediff
