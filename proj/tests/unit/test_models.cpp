#include <doctest.h>

#include <cmath>

#include "stylediff/diffae.hpp"
#include "stylediff/errors.hpp"
#include "stylediff/spn.hpp"

using namespace stylediff;

namespace {

UNetConfig small_unet_cfg() {
    UNetConfig cfg;
    cfg.base_channels = 8;
    cfg.image_size = 16;
    cfg.channel_mults = {1, 2};
    cfg.res_blocks_per_level = 1;
    return cfg;
}

}  // namespace

TEST_CASE("unet shape, determinism, ladder") {
    UNet net(small_unet_cfg(), 11);
    Rng rng(1);
    Tensor x = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);
    Tensor z = rng.normal_tensor({64});

    Tensor a = net.denoise(x, 7, z);
    Tensor b = net.denoise(x, 7, z);
    CHECK(a.shape() == x.shape());
    CHECK(Tensor::equal(a, b));
    CHECK(net.resolution_ladder() == std::vector<int>{16, 8});
    CHECK(net.on_ladder(8));
    CHECK(!net.on_ladder(4));

    Tensor bad = rng.uniform_tensor({3, 8, 8}, -1.0, 1.0);
    CHECK_THROWS_AS(net.denoise(bad, 7, z), error);
}

TEST_CASE("conditioning plan construction and boundaries") {
    UNetConfig cfg;
    cfg.base_channels = 8;
    cfg.image_size = 32;
    cfg.channel_mults = {1, 2, 2};
    cfg.res_blocks_per_level = 1;
    UNet net(cfg, 3);
    Rng rng(2);
    Tensor z_in = rng.normal_tensor({64});
    Tensor z_style = rng.normal_tensor({64});

    SUBCASE("ladder {32,16,8} with f_ch=16: 32,16 -> style, 8 -> input") {
        auto plan = make_conditioning_plan(z_in, z_style, 16, net);
        CHECK(plan.assignments.at(32) == LatentRole::style);
        CHECK(plan.assignments.at(16) == LatentRole::style);
        CHECK(plan.assignments.at(8) == LatentRole::input);
    }
    SUBCASE("boundary plans assign a single latent everywhere") {
        auto all_style = make_conditioning_plan(z_in, z_style, 0, net);
        for (const auto& [res, role] : all_style.assignments) {
            (void)res;
            CHECK(role == LatentRole::style);
        }
        auto all_input = make_conditioning_plan(z_in, z_style, fch_all_input, net);
        for (const auto& [res, role] : all_input.assignments) {
            (void)res;
            CHECK(role == LatentRole::input);
        }
    }
    SUBCASE("off-ladder f_ch is a parameter error") {
        CHECK_THROWS_AS(make_conditioning_plan(z_in, z_style, 12, net), error);
        CHECK_THROWS_AS(make_conditioning_plan(z_in, z_style, 64, net), error);
    }
    SUBCASE("every ladder resolution has exactly one assignment") {
        auto plan = make_conditioning_plan(z_in, z_style, 16, net);
        CHECK(plan.assignments.size() == net.resolution_ladder().size());
    }
}

TEST_CASE("denoise_with_plan collapse and role sensitivity") {
    UNet net(small_unet_cfg(), 17);
    Rng rng(4);
    net.params().randomize(rng, 0.3);  // generic non-degenerate weights
    Tensor x = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);
    Tensor z1 = rng.normal_tensor({64});
    Tensor z2 = rng.normal_tensor({64});

    SUBCASE("equal-latent plan collapses to single-latent conditioning bit-exactly") {
        auto plan = make_conditioning_plan(z1, z1, 8, net);
        Tensor with_plan = denoise_with_plan(net, x, 5, plan);
        Tensor single = net.denoise(x, 5, z1);
        CHECK(Tensor::equal(with_plan, single));
    }
    SUBCASE("swapping roles changes the output for distinct latents") {
        auto plan = make_conditioning_plan(z1, z2, 8, net);
        auto swapped = make_conditioning_plan(z2, z1, 8, net);
        Tensor a = denoise_with_plan(net, x, 5, plan);
        Tensor b = denoise_with_plan(net, x, 5, swapped);
        CHECK(!Tensor::equal(a, b));
    }
    SUBCASE("deterministic") {
        auto plan = make_conditioning_plan(z1, z2, 8, net);
        CHECK(Tensor::equal(denoise_with_plan(net, x, 5, plan), denoise_with_plan(net, x, 5, plan)));
    }
}

TEST_CASE("semantic encoder basics") {
    EncoderConfig cfg;
    cfg.image_size = 16;
    SemanticEncoder enc(cfg, 23);
    Rng rng(5);

    Tensor img = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);
    Tensor z1 = enc.encode(img);
    Tensor z2 = enc.encode(img);
    CHECK(z1.dim(0) == 64);
    CHECK(Tensor::equal(z1, z2));

    // zero image maps to a finite latent
    Tensor z0 = enc.encode(Tensor::zeros({3, 16, 16}));
    CHECK(z0.all_finite());

    // collision check over random pairs
    int distinct = 0;
    for (int i = 0; i < 100; ++i) {
        Tensor a = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);
        Tensor b = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);
        if (!Tensor::equal(enc.encode(a), enc.encode(b))) ++distinct;
    }
    CHECK(distinct == 100);

    CHECK_THROWS_AS(enc.encode(Tensor::zeros({3, 8, 8})), error);
}

TEST_CASE("spn properties") {
    SPNConfig cfg;
    SPN spn(cfg, 31);
    Rng rng(6);
    spn.params().randomize(rng, 0.3);
    Tensor img = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);

    SUBCASE("output shape equals input shape; deterministic") {
        Tensor r1 = spn.apply(img, 10);
        Tensor r2 = spn.apply(img, 10);
        CHECK(r1.shape() == img.shape());
        CHECK(Tensor::equal(r1, r2));
    }
    SUBCASE("distinct timesteps give distinct outputs") {
        CHECK(!Tensor::equal(spn.apply(img, 10), spn.apply(img, 60)));
    }
    SUBCASE("1x1 locality: permuting pixels permutes the output identically") {
        int h = img.dim(1), w = img.dim(2);
        Rng prng(7);
        std::vector<int> perm(static_cast<size_t>(h * w));
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
        for (size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[static_cast<size_t>(prng.uniform_int(static_cast<int>(i)))]);

        Tensor permuted({3, h, w});
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < h * w; ++i)
                permuted[static_cast<int64_t>(c) * h * w + i] =
                    img[static_cast<int64_t>(c) * h * w + perm[static_cast<size_t>(i)]];

        Tensor out = spn.apply(img, 10);
        Tensor out_permuted = spn.apply(permuted, 10);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < h * w; ++i)
                CHECK(out_permuted[static_cast<int64_t>(c) * h * w + i] ==
                      doctest::Approx(out[static_cast<int64_t>(c) * h * w +
                                          perm[static_cast<size_t>(i)]])
                          .epsilon(1e-12));
    }
    SUBCASE("shape mismatch and bad timestep") {
        CHECK_THROWS_AS(spn.apply(Tensor::zeros({1, 4, 4}), 10), error);
        CHECK_THROWS_AS(spn.apply(img, 0), error);
    }
}

TEST_CASE("blend") {
    Rng rng(8);
    Tensor x = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);
    Tensor r = rng.uniform_tensor({3, 4, 4}, -1.0, 1.0);

    SUBCASE("lambda 0 returns x bit-exactly") {
        Tensor out = blend(x, r, 0.0);
        CHECK(Tensor::equal(out, x));
    }
    SUBCASE("lambda 1 with residual -x gives zero") {
        Tensor neg_x = x.clone();
        for (int64_t i = 0; i < neg_x.size(); ++i) neg_x[i] = -neg_x[i];
        Tensor out = blend(x, neg_x, 1.0);
        for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.0));
    }
    SUBCASE("linearity: blend(x,r,a) + blend(x,r,b) - x == blend(x,r,a+b)") {
        double a = 0.3, b = 1.1;
        Tensor lhs = blend(x, r, a);
        Tensor rhs = blend(x, r, b);
        Tensor sum_ab = blend(x, r, a + b);
        for (int64_t i = 0; i < x.size(); ++i)
            CHECK(lhs[i] + rhs[i] - x[i] == doctest::Approx(sum_ab[i]).epsilon(1e-12));
    }
    SUBCASE("negative lambda is a parameter error") {
        CHECK_THROWS_AS(blend(x, r, -0.1), error);
    }
}

TEST_CASE("reverse_step_with_spn collapses to the plain ddim step at lambda 0") {
    UNet net(small_unet_cfg(), 41);
    SPNConfig scfg;
    SPN spn(scfg, 42);
    Rng rng(9);
    net.params().randomize(rng, 0.3);
    spn.params().randomize(rng, 0.3);
    NoiseSchedule sched = default_schedule(100);

    Tensor x = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);
    Tensor img = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);
    Tensor z = rng.normal_tensor({64});

    NoGradGuard ng;
    LatentPair lat = LatentPair::single(constant(z));
    Var plain = ddim_reverse_step(
        [&](const Var& xv, int t) { return net.forward(xv, t, lat); }, constant(x), 50, 40, sched);
    Var with_spn = reverse_step_with_spn(net, lat, constant(x), 50, 40, constant(img), spn, 0.0,
                                         sched);
    CHECK(Tensor::equal(plain->value, with_spn->value));

    // nonzero lambda changes the step
    Var with_spn2 = reverse_step_with_spn(net, lat, constant(x), 50, 40, constant(img), spn, 0.5,
                                          sched);
    CHECK(!Tensor::equal(plain->value, with_spn2->value));

    // determinism
    Var again = reverse_step_with_spn(net, lat, constant(x), 50, 40, constant(img), spn, 0.5,
                                      sched);
    CHECK(Tensor::equal(with_spn2->value, again->value));
}

TEST_CASE("diffae encode/decode basics") {
    UNet net(small_unet_cfg(), 51);
    Rng rng(10);
    net.params().randomize(rng, 0.2);
    NoiseSchedule sched = default_schedule(100);
    Tensor img = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);
    Tensor z = rng.normal_tensor({64});

    SUBCASE("t0 = 0 is the identity") {
        StructuralLatent lat = diffae_encode(net, img, z, 0, 8, sched);
        CHECK(Tensor::equal(lat.tensor, img));
        Tensor back = diffae_decode(net, lat, z, 8, sched);
        CHECK(Tensor::equal(back, img));
    }
    SUBCASE("deterministic") {
        StructuralLatent a = diffae_encode(net, img, z, 50, 8, sched);
        StructuralLatent b = diffae_encode(net, img, z, 50, 8, sched);
        CHECK(Tensor::equal(a.tensor, b.tensor));
        CHECK(a.t0 == 50);
    }
}
