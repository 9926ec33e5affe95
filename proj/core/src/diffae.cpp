#include "stylediff/diffae.hpp"

#include "stylediff/errors.hpp"

namespace stylediff {

StructuralLatent diffae_encode(const UNet& denoiser, const Tensor& image, const Tensor& z_sem,
                               int t0, int n_steps, const NoiseSchedule& sched) {
    if (t0 < 0 || t0 > sched.T) throw_param("diffae_encode: t0 out of range");
    NoGradGuard ng;
    Var z = constant(z_sem);
    DenoiseFn fn = [&](const Var& x, int t) { return denoiser.forward(x, t, z); };
    auto steps = TimestepSubsequence::linspace(0, t0, n_steps);
    Var out = run_trajectory(fn, constant(image), steps, TrajectoryDirection::encode,
                             TrajectoryMode::ddim, 0, sched);
    return {out->value, t0};
}

Tensor diffae_decode(const UNet& denoiser, const StructuralLatent& x_t0, const Tensor& z_sem,
                     int n_steps, const NoiseSchedule& sched) {
    NoGradGuard ng;
    return diffae_decode_var(denoiser, constant(x_t0.tensor), x_t0.t0, constant(z_sem), n_steps,
                             sched)
        ->value;
}

Var diffae_decode_var(const UNet& denoiser, const Var& x_t0, int t0, const Var& z_sem, int n_steps,
                      const NoiseSchedule& sched) {
    if (t0 < 0 || t0 > sched.T) throw_param("diffae_decode: t0 out of range");
    DenoiseFn fn = [&](const Var& x, int t) { return denoiser.forward(x, t, z_sem); };
    auto steps = TimestepSubsequence::linspace(0, t0, n_steps);
    return run_trajectory(fn, x_t0, steps, TrajectoryDirection::decode, TrajectoryMode::ddim, 0,
                          sched);
}

}  // namespace stylediff
