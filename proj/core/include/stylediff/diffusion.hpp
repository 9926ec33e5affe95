#pragma once

#include <functional>
#include <vector>

#include "stylediff/autodiff.hpp"
#include "stylediff/rng.hpp"
#include "stylediff/schedule.hpp"

namespace stylediff {

// Noise-prediction callback: eps(x_t, t). Graph-aware so trajectories can be
// differentiated; inference callers wrap computation in NoGradGuard.
using DenoiseFn = std::function<Var(const Var& x_t, int t)>;

// Strictly increasing timesteps in [0, T]; K+1 grid points define K
// transitions for strided DDIM encode/decode.
struct TimestepSubsequence {
    std::vector<int> steps;

    // n_transitions evenly spaced steps between t_lo and t_hi (both included;
    // rounding collapses duplicates at small ranges).
    static TimestepSubsequence linspace(int t_lo, int t_hi, int n_transitions);
    static TimestepSubsequence dense(int t_lo, int t_hi);
    void validate(int T) const;
};

enum class TrajectoryDirection { encode, decode };
enum class TrajectoryMode { ddim, ddpm };

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) z
Var forward_marginal(const Var& x0, int t, const Var& z, const NoiseSchedule& sched);

// f = (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t), t in [1, T]
Var predict_x0(const Var& x_t, int t, const Var& eps, const NoiseSchedule& sched);

// x_{t-1} = (x_t - beta_t/sqrt(1-abar_t) eps(x_t,t)) / sqrt(1-beta_t) + sigma_t z
Var ddpm_reverse_step(const DenoiseFn& eps_fn, const Var& x_t, int t, const Var& z,
                      const NoiseSchedule& sched);

// x_{t_next} = sqrt(abar_{t_next}) f(x_t,t) + sqrt(1-abar_{t_next}) eps(x_t,t)
Var ddim_forward_step(const DenoiseFn& eps_fn, const Var& x_t, int t, int t_next,
                      const NoiseSchedule& sched);
Var ddim_reverse_step(const DenoiseFn& eps_fn, const Var& x_t, int t, int t_prev,
                      const NoiseSchedule& sched);

// Folds the per-step op over the subsequence. encode walks the list upward
// (ddim only); decode walks it downward. ddpm mode requires a dense list and
// draws its per-step noise from rng_seed; the final step to t=0 adds none.
Var run_trajectory(const DenoiseFn& eps_fn, const Var& x_start, const TimestepSubsequence& steps,
                   TrajectoryDirection direction, TrajectoryMode mode, uint64_t rng_seed,
                   const NoiseSchedule& sched, std::vector<Tensor>* trace = nullptr);

// Tensor-in/tensor-out wrappers (no gradient tracking).
Tensor forward_marginal(const Tensor& x0, int t, const Tensor& z, const NoiseSchedule& sched);
Tensor predict_x0(const Tensor& x_t, int t, const Tensor& eps, const NoiseSchedule& sched);

}  // namespace stylediff
