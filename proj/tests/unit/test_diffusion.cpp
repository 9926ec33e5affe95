#include <doctest.h>

#include <cmath>

#include "stylediff/diffusion.hpp"
#include "stylediff/errors.hpp"

using namespace stylediff;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Denoiser that reports the exact noise implied by a known x0; the closed
// form keeps every DDIM step on the marginal path of that (x0, z) pair.
DenoiseFn exact_noise_denoiser(const Tensor& x0, const Tensor& z, const NoiseSchedule& sched) {
    return [&x0, &z, &sched](const Var& x, int t) -> Var {
        if (t == 0) return constant(z.clone());
        double ab = sched.alpha_bar(t);
        Tensor eps(x->value.shape());
        for (int64_t i = 0; i < eps.size(); ++i)
            eps[i] = (x->value[i] - std::sqrt(ab) * x0[i]) / std::sqrt(1.0 - ab);
        return constant(std::move(eps));
    };
}

}  // namespace

TEST_CASE("build_schedule values and invariants") {
    // T=2, beta=(0.1, 0.1): alpha_bars = [1, 0.9, 0.81] by direct product
    NoiseSchedule s = build_schedule(2, 0.1, 0.1);
    CHECK(s.alpha_bar(0) == doctest::Approx(1.0));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.81).epsilon(1e-14));

    // single-step product
    NoiseSchedule s1 = build_schedule(1, 0.5, 0.5);
    CHECK(s1.alpha_bar(1) == doctest::Approx(0.5).epsilon(1e-14));

    CHECK_THROWS_AS(build_schedule(2, 0.2, 0.1), error);  // beta_start > beta_end
    CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2), error);
    CHECK_THROWS_AS(build_schedule(2, 0.0, 0.2), error);

    // recurrence to 1e-12 on the default schedule
    NoiseSchedule d = default_schedule(100);
    for (int t = 1; t <= d.T; ++t)
        CHECK(std::abs(d.alpha_bar(t) - d.alpha_bar(t - 1) * (1.0 - d.beta(t))) <= 1e-12);
    for (int t = 1; t <= d.T; ++t) {
        CHECK(d.sigma(t) >= 0.0);
        CHECK(d.alpha_bar(t) < d.alpha_bar(t - 1));
    }

    NoiseSchedule p = build_schedule(50, 0.002, 0.4, ScheduleKind::linear, SigmaKind::posterior);
    for (int t = 1; t <= p.T; ++t) CHECK(p.sigma(t) >= 0.0);
    CHECK(p.sigma(1) == doctest::Approx(0.0));  // posterior variance vanishes at t=1
}

TEST_CASE("forward_marginal") {
    NoiseSchedule sched = default_schedule(100);
    Rng rng(5);
    Tensor x0 = rng.uniform_tensor({3, 8, 8}, -1.0, 1.0);

    SUBCASE("t=0 is the identity") {
        Tensor z = rng.normal_tensor({3, 8, 8});
        Tensor out = forward_marginal(x0, 0, z, sched);
        CHECK(Tensor::equal(out, x0));
    }
    SUBCASE("zero noise scales by sqrt(alpha_bar)") {
        Tensor z = Tensor::zeros({3, 8, 8});
        Tensor out = forward_marginal(x0, 40, z, sched);
        double s = std::sqrt(sched.alpha_bar(40));
        for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(s * x0[i]));
    }
    SUBCASE("Monte Carlo mean approaches sqrt(alpha_bar) x0") {
        // oracle: E[x_t] = sqrt(abar_t) x0, sd of the mean = sqrt(1-abar)/sqrt(N)
        const int n = 400;  // 400 draws x 192 pixels > 1e4 scalar samples
        Tensor acc = Tensor::zeros({3, 8, 8});
        for (int i = 0; i < n; ++i) {
            Tensor out = forward_marginal(x0, 50, rng.normal_tensor({3, 8, 8}), sched);
            for (int64_t j = 0; j < acc.size(); ++j) acc[j] += out[j] / n;
        }
        double s = std::sqrt(sched.alpha_bar(50));
        double three_sigma = 3.0 * std::sqrt(1.0 - sched.alpha_bar(50)) / std::sqrt(n);
        int outliers = 0;
        for (int64_t j = 0; j < acc.size(); ++j)
            if (std::abs(acc[j] - s * x0[j]) > three_sigma) ++outliers;
        // ~0.3% expected outside 3 sigma; allow a small margin
        CHECK(outliers <= 4);
    }
    SUBCASE("range errors") {
        Tensor z = Tensor::zeros({3, 8, 8});
        CHECK_THROWS_AS(forward_marginal(x0, 101, z, sched), error);
        CHECK_THROWS_AS(forward_marginal(x0, -1, z, sched), error);
    }
}

TEST_CASE("predict_x0 inverts forward_marginal") {
    NoiseSchedule sched = default_schedule(100);
    Rng rng(6);
    Tensor x0 = rng.uniform_tensor({3, 8, 8}, -1.0, 1.0);
    Tensor z = rng.normal_tensor({3, 8, 8});

    for (int t : {1, 17, 50, 100}) {
        Tensor x_t = forward_marginal(x0, t, z, sched);
        Tensor rec = predict_x0(x_t, t, z, sched);
        CHECK(max_abs_diff(rec, x0) < 1e-6);
    }
    SUBCASE("eps = 0 gives x_t / sqrt(alpha_bar)") {
        Tensor x_t = rng.uniform_tensor({3, 8, 8}, -1.0, 1.0);
        Tensor rec = predict_x0(x_t, 30, Tensor::zeros({3, 8, 8}), sched);
        double inv = 1.0 / std::sqrt(sched.alpha_bar(30));
        for (int64_t i = 0; i < rec.size(); ++i) CHECK(rec[i] == doctest::Approx(inv * x_t[i]));
    }
    SUBCASE("recomposition identity") {
        Tensor x_t = rng.uniform_tensor({3, 8, 8}, -1.0, 1.0);
        Tensor eps = rng.normal_tensor({3, 8, 8});
        Tensor f = predict_x0(x_t, 42, eps, sched);
        double ab = sched.alpha_bar(42);
        Tensor recomposed(x_t.shape());
        for (int64_t i = 0; i < x_t.size(); ++i)
            recomposed[i] = std::sqrt(ab) * f[i] + std::sqrt(1.0 - ab) * eps[i];
        CHECK(max_abs_diff(recomposed, x_t) < 1e-6);
    }
    CHECK_THROWS_AS(predict_x0(x0, 0, z, sched), error);
}

TEST_CASE("ddpm_reverse_step") {
    NoiseSchedule sched = default_schedule(100);
    Rng rng(7);
    DenoiseFn zero = [](const Var& x, int) { return constant(Tensor::zeros(x->value.shape())); };

    SUBCASE("hand-computed scalar case") {
        // one pixel: beta=0.1, abar=0.81, eps=0.5, x_t=1, z=0
        NoiseSchedule s;
        s.T = 2;
        s.betas = {0.0, 0.1, 0.1};
        s.alpha_bars = {1.0, 0.9, 0.81};
        s.sigmas = {0.0, std::sqrt(0.1), std::sqrt(0.1)};
        s.validate();
        DenoiseFn half = [](const Var& x, int) {
            return constant(Tensor::full(x->value.shape(), 0.5));
        };
        Tensor x_t = Tensor::from({1, 1, 1}, {1.0});
        NoGradGuard ng;
        Tensor out = ddpm_reverse_step(half, constant(x_t), 2, constant(Tensor::zeros({1, 1, 1})), s)
                         ->value;
        double expect = (1.0 - 0.1 / std::sqrt(1.0 - 0.81) * 0.5) / std::sqrt(0.9);
        CHECK(out[0] == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("zero prediction, zero noise scales by 1/sqrt(1-beta)") {
        Tensor x_t = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
        NoGradGuard ng;
        Tensor out =
            ddpm_reverse_step(zero, constant(x_t), 60, constant(Tensor::zeros({3, 4, 4})), sched)
                ->value;
        double s = 1.0 / std::sqrt(1.0 - sched.beta(60));
        for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(s * x_t[i]));
    }
    SUBCASE("deterministic given the noise tensor") {
        Tensor x_t = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
        Tensor z = rng.normal_tensor({3, 4, 4});
        NoGradGuard ng;
        Tensor a = ddpm_reverse_step(zero, constant(x_t), 60, constant(z), sched)->value;
        Tensor b = ddpm_reverse_step(zero, constant(x_t), 60, constant(z), sched)->value;
        CHECK(Tensor::equal(a, b));
    }
    SUBCASE("denoiser shape mismatch is a contract error") {
        DenoiseFn bad = [](const Var&, int) { return constant(Tensor::zeros({1, 2, 2})); };
        Tensor x_t = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
        NoGradGuard ng;
        CHECK_THROWS_AS(ddpm_reverse_step(bad, constant(x_t), 60, constant(x_t), sched), error);
    }
}

TEST_CASE("ddim steps") {
    NoiseSchedule sched = default_schedule(100);
    Rng rng(8);
    DenoiseFn zero = [](const Var& x, int) { return constant(Tensor::zeros(x->value.shape())); };

    SUBCASE("zero prediction scales by sqrt ratio") {
        Tensor x = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
        NoGradGuard ng;
        Tensor fwd = ddim_forward_step(zero, constant(x), 20, 40, sched)->value;
        double s_fwd = std::sqrt(sched.alpha_bar(40) / sched.alpha_bar(20));
        for (int64_t i = 0; i < x.size(); ++i) CHECK(fwd[i] == doctest::Approx(s_fwd * x[i]));

        Tensor rev = ddim_reverse_step(zero, constant(x), 40, 20, sched)->value;
        double s_rev = std::sqrt(sched.alpha_bar(20) / sched.alpha_bar(40));
        for (int64_t i = 0; i < x.size(); ++i) CHECK(rev[i] == doctest::Approx(s_rev * x[i]));
    }
    SUBCASE("determinism") {
        Tensor x = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
        NoGradGuard ng;
        CHECK(Tensor::equal(ddim_forward_step(zero, constant(x), 3, 9, sched)->value,
                            ddim_forward_step(zero, constant(x), 3, 9, sched)->value));
    }
    SUBCASE("exact-noise oracle lands on the marginal path") {
        Tensor x0 = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
        Tensor z = rng.normal_tensor({3, 4, 4});
        DenoiseFn oracle = exact_noise_denoiser(x0, z, sched);
        NoGradGuard ng;
        Tensor x10 = forward_marginal(x0, 10, z, sched);
        Tensor x35 = ddim_forward_step(oracle, constant(x10), 10, 35, sched)->value;
        CHECK(max_abs_diff(x35, forward_marginal(x0, 35, z, sched)) < 1e-10);
    }
    SUBCASE("single-step round trip with a t-independent linear denoiser") {
        DenoiseFn lin = [](const Var& x, int) { return constant(scale(x, 0.25)->value); };
        Tensor x = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
        NoGradGuard ng;
        Var up = ddim_forward_step(lin, constant(x), 5, 6, sched);
        Var back = ddim_reverse_step(lin, up, 6, 5, sched);
        CHECK(max_abs_diff(back->value, x) < 1e-4);
    }
    SUBCASE("ordering preconditions") {
        Tensor x = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
        NoGradGuard ng;
        CHECK_THROWS_AS(ddim_forward_step(zero, constant(x), 9, 3, sched), error);
        CHECK_THROWS_AS(ddim_reverse_step(zero, constant(x), 3, 9, sched), error);
        CHECK_THROWS_AS(ddim_reverse_step(zero, constant(x), 3, 3, sched), error);
    }
}

TEST_CASE("run_trajectory") {
    NoiseSchedule sched = default_schedule(100);
    Rng rng(9);
    Tensor x0 = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
    Tensor z = rng.normal_tensor({3, 4, 4});
    DenoiseFn oracle = exact_noise_denoiser(x0, z, sched);

    SUBCASE("single-element subsequence is the identity fold") {
        TimestepSubsequence s;
        s.steps = {37};
        NoGradGuard ng;
        Tensor out = run_trajectory(oracle, constant(x0), s, TrajectoryDirection::encode,
                                    TrajectoryMode::ddim, 0, sched)
                         ->value;
        CHECK(Tensor::equal(out, x0));
    }
    SUBCASE("encode then decode round trip with the exact-noise oracle") {
        for (int n : {4, 8, 25}) {
            auto s = TimestepSubsequence::linspace(0, 80, n);
            NoGradGuard ng;
            Var enc = run_trajectory(oracle, constant(x0), s, TrajectoryDirection::encode,
                                     TrajectoryMode::ddim, 0, sched);
            CHECK(max_abs_diff(enc->value, forward_marginal(x0, 80, z, sched)) < 1e-9);
            Var dec = run_trajectory(oracle, enc, s, TrajectoryDirection::decode,
                                     TrajectoryMode::ddim, 0, sched);
            CHECK(max_abs_diff(dec->value, x0) < 1e-3);
        }
    }
    SUBCASE("trace records every visited state") {
        auto s = TimestepSubsequence::linspace(0, 60, 6);
        std::vector<Tensor> trace;
        NoGradGuard ng;
        run_trajectory(oracle, constant(x0), s, TrajectoryDirection::encode, TrajectoryMode::ddim,
                       0, sched, &trace);
        CHECK(trace.size() == s.steps.size());
    }
    SUBCASE("ddpm mode requires decode and dense steps") {
        auto strided = TimestepSubsequence::linspace(0, 60, 6);
        NoGradGuard ng;
        CHECK_THROWS_AS(run_trajectory(oracle, constant(x0), strided, TrajectoryDirection::encode,
                                       TrajectoryMode::ddpm, 1, sched),
                        error);
        CHECK_THROWS_AS(run_trajectory(oracle, constant(x0), strided, TrajectoryDirection::decode,
                                       TrajectoryMode::ddpm, 1, sched),
                        error);
        auto dense = TimestepSubsequence::dense(0, 10);
        Tensor xt = forward_marginal(x0, 10, z, sched);
        Tensor a = run_trajectory(oracle, constant(xt), dense, TrajectoryDirection::decode,
                                  TrajectoryMode::ddpm, 42, sched)
                       ->value;
        Tensor b = run_trajectory(oracle, constant(xt), dense, TrajectoryDirection::decode,
                                  TrajectoryMode::ddpm, 42, sched)
                       ->value;
        CHECK(Tensor::equal(a, b));  // seeded determinism
    }
    SUBCASE("subsequence validation") {
        TimestepSubsequence bad;
        bad.steps = {5, 5, 10};
        CHECK_THROWS_AS(bad.validate(100), error);
        TimestepSubsequence over;
        over.steps = {0, 101};
        CHECK_THROWS_AS(over.validate(100), error);
    }
}
