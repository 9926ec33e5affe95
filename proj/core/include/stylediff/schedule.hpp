#pragma once

#include <vector>

#include "stylediff/tensor.hpp"

namespace stylediff {

enum class ScheduleKind { linear };
enum class SigmaKind { sqrt_beta, posterior };

// Beta schedule with cumulative alpha-bar products and reverse-step noise
// scales. Arrays are indexed by timestep: betas[0] and sigmas[0] are unused
// (zero), alpha_bars[0] = 1.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;       // size T+1
    std::vector<double> alpha_bars;  // size T+1, strictly decreasing from 1
    std::vector<double> sigmas;      // size T+1

    double beta(int t) const;
    double alpha_bar(int t) const;
    double sigma(int t) const;
    void validate() const;  // checks the struct invariants
};

// Linear beta ramp. Defaults scale the standard 1000-step endpoints
// (1e-4, 0.02) by 1000/T so shorter toy schedules keep the same
// continuous-time profile.
NoiseSchedule build_schedule(int T, double beta_start, double beta_end,
                             ScheduleKind kind = ScheduleKind::linear,
                             SigmaKind sigma_kind = SigmaKind::sqrt_beta);
NoiseSchedule default_schedule(int T = 100);

}  // namespace stylediff
