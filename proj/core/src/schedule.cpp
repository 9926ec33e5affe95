#include "stylediff/schedule.hpp"

#include <cmath>

#include "stylediff/errors.hpp"

namespace stylediff {

double NoiseSchedule::beta(int t) const {
    if (t < 1 || t > T) throw_param("timestep out of range for beta");
    return betas[static_cast<size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > T) throw_param("timestep out of range for alpha_bar");
    return alpha_bars[static_cast<size_t>(t)];
}

double NoiseSchedule::sigma(int t) const {
    if (t < 1 || t > T) throw_param("timestep out of range for sigma");
    return sigmas[static_cast<size_t>(t)];
}

void NoiseSchedule::validate() const {
    if (T < 1) throw_contract("schedule: T must be >= 1");
    if (betas.size() != static_cast<size_t>(T + 1) || alpha_bars.size() != static_cast<size_t>(T + 1) ||
        sigmas.size() != static_cast<size_t>(T + 1))
        throw_contract("schedule: array sizes must be T+1");
    if (alpha_bars[0] != 1.0) throw_contract("schedule: alpha_bars[0] must be 1");
    for (int t = 1; t <= T; ++t) {
        double b = betas[static_cast<size_t>(t)];
        if (!(b > 0.0 && b < 1.0)) throw_contract("schedule: betas must lie in (0,1)");
        double ab = alpha_bars[static_cast<size_t>(t)];
        if (!(ab > 0.0 && ab <= 1.0)) throw_contract("schedule: alpha_bars must lie in (0,1]");
        if (!(ab < alpha_bars[static_cast<size_t>(t - 1)]))
            throw_contract("schedule: alpha_bars must be strictly decreasing");
        double expect = alpha_bars[static_cast<size_t>(t - 1)] * (1.0 - b);
        if (std::abs(ab - expect) > 1e-12) throw_contract("schedule: recurrence violated");
        if (sigmas[static_cast<size_t>(t)] < 0.0) throw_contract("schedule: sigmas must be >= 0");
    }
}

NoiseSchedule build_schedule(int T, double beta_start, double beta_end, ScheduleKind kind,
                             SigmaKind sigma_kind) {
    if (T < 1) throw_param("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw_param("build_schedule: need 0 < beta_start <= beta_end < 1");
    if (kind != ScheduleKind::linear) throw_param("build_schedule: unknown schedule kind");

    NoiseSchedule s;
    s.T = T;
    s.betas.assign(static_cast<size_t>(T + 1), 0.0);
    s.alpha_bars.assign(static_cast<size_t>(T + 1), 1.0);
    s.sigmas.assign(static_cast<size_t>(T + 1), 0.0);
    for (int t = 1; t <= T; ++t) {
        double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        double b = beta_start + (beta_end - beta_start) * frac;
        s.betas[static_cast<size_t>(t)] = b;
        s.alpha_bars[static_cast<size_t>(t)] = s.alpha_bars[static_cast<size_t>(t - 1)] * (1.0 - b);
    }
    for (int t = 1; t <= T; ++t) {
        double b = s.betas[static_cast<size_t>(t)];
        if (sigma_kind == SigmaKind::sqrt_beta) {
            s.sigmas[static_cast<size_t>(t)] = std::sqrt(b);
        } else {
            // DDPM posterior variance: beta_t * (1 - abar_{t-1}) / (1 - abar_t)
            double num = 1.0 - s.alpha_bars[static_cast<size_t>(t - 1)];
            double den = 1.0 - s.alpha_bars[static_cast<size_t>(t)];
            s.sigmas[static_cast<size_t>(t)] = (den > 0.0) ? std::sqrt(b * num / den) : 0.0;
        }
    }
    s.validate();
    return s;
}

NoiseSchedule default_schedule(int T) {
    double k = 1000.0 / static_cast<double>(T);
    return build_schedule(T, 1e-4 * k, 0.02 * k);
}

}  // namespace stylediff
