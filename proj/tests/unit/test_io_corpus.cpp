#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stylediff/checkpoint.hpp"
#include "stylediff/corpus.hpp"
#include "stylediff/errors.hpp"
#include "stylediff/image_io.hpp"

using namespace stylediff;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "stylediff_test";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact and deterministic") {
    Rng rng(13);
    Checkpoint ckpt;
    ckpt.meta = {{"kind", "test"}, {"format_version", 1}, {"nested", {{"a", 1}, {"b", "x"}}}};
    ckpt.add("alpha", rng.normal_tensor({4, 3}));
    ckpt.add("beta", rng.normal_tensor({2, 2, 2, 2}));
    ckpt.add("gamma", Tensor::from({3}, {1e-300, -0.0, 3.141592653589793}));

    fs::path p1 = temp_dir() / "a.ckpt";
    fs::path p2 = temp_dir() / "b.ckpt";
    ckpt.save(p1);
    Checkpoint back = Checkpoint::load(p1);
    CHECK(back.meta == ckpt.meta);
    for (const auto& [name, t] : ckpt.tensors()) CHECK(Tensor::equal(back.get(name), t));

    // byte-identical re-serialization
    back.save(p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);

    CHECK_THROWS_AS(ckpt.get("missing"), error);
    CHECK_THROWS_AS(Checkpoint::load(temp_dir() / "nope.ckpt"), error);

    // corrupt magic
    fs::path bad = temp_dir() / "bad.ckpt";
    std::ofstream(bad, std::ios::binary) << "NOTMAGIC garbage";
    CHECK_THROWS_AS(Checkpoint::load(bad), error);
}

TEST_CASE("png round trip at 8-bit quantization") {
    Rng rng(14);
    Tensor img = rng.uniform_tensor({3, 16, 16}, -1.0, 1.0);
    fs::path p = temp_dir() / "img.png";
    write_png(p, img);
    Tensor back = read_png(p);
    CHECK(back.shape() == img.shape());
    double max_err = 0.0;
    for (int64_t i = 0; i < img.size(); ++i) max_err = std::max(max_err, std::abs(back[i] - img[i]));
    CHECK(max_err <= 1.0 / 255.0 + 1e-12);

    // out-of-range values clamp
    Tensor loud = Tensor::full({3, 4, 4}, 3.0);
    write_png(p, loud);
    Tensor clamped = read_png(p);
    for (int64_t i = 0; i < clamped.size(); ++i) CHECK(clamped[i] == doctest::Approx(1.0));

    CHECK_THROWS_AS(read_png(temp_dir() / "missing.png"), error);
    CHECK_THROWS_AS(write_png(p, Tensor::zeros({1, 4, 4})), error);
}

TEST_CASE("procedural corpus determinism and captions") {
    auto a = make_corpus(8, 32, 99);
    auto b = make_corpus(8, 32, 99);
    REQUIRE(a.size() == 8);
    for (size_t i = 0; i < a.size(); ++i) CHECK(Tensor::equal(a[i], b[i]));
    for (const auto& img : a) {
        CHECK(img.all_finite());
        for (int64_t i = 0; i < img.size(); ++i) {
            CHECK(img[i] <= 1.0);
            CHECK(img[i] >= -1.0);
        }
    }

    Rng rng(7);
    auto vocab = toy_vocabulary();
    for (int i = 0; i < 20; ++i) {
        FaceParams p = sample_face_params(rng);
        auto caption = caption_tokens(p);
        CHECK(caption.size() == 6);
        for (const auto& tok : caption)
            CHECK(std::find(vocab.begin(), vocab.end(), tok) != vocab.end());
    }
}

TEST_CASE("style variant and occluders differ from the clean render") {
    Rng rng(21);
    FaceParams p = sample_face_params(rng);
    Tensor clean = render_face(p, 32);
    Tensor styled = render_style_face(p, 32);
    CHECK(!Tensor::equal(clean, styled));

    Tensor occluded = add_occluders(clean, rng);
    CHECK(!Tensor::equal(clean, occluded));
    int changed = 0;
    for (int64_t i = 0; i < clean.size(); ++i)
        if (clean[i] != occluded[i]) ++changed;
    CHECK(changed > 100);  // occluders cover a meaningful area

    // restyle keeps geometry words, may change color words
    FaceParams restyled = restyle_face_params(p, rng);
    CHECK(restyled.cx == p.cx);
    CHECK(restyled.rx == p.rx);
    CHECK(restyled.mouth_curve == p.mouth_curve);
}
