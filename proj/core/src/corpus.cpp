#include "stylediff/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace stylediff {

namespace {

double smoothstep(double edge0, double edge1, double x) {
    double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

struct Color {
    double r, g, b;
};

Color lerp(const Color& a, const Color& b, double t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

const std::array<Color, 4> kHairColors = {Color{-0.75, -0.75, -0.70}, Color{0.60, -0.55, -0.55},
                                          Color{-0.55, 0.50, -0.55}, Color{-0.55, -0.50, 0.60}};

void put(Tensor& img, int y, int x, const Color& c, double alpha) {
    int hw = img.dim(1) * img.dim(2);
    int idx = y * img.dim(2) + x;
    double* d = img.data();
    d[idx] += (c.r - d[idx]) * alpha;
    d[hw + idx] += (c.g - d[hw + idx]) * alpha;
    d[2 * hw + idx] += (c.b - d[2 * hw + idx]) * alpha;
}

}  // namespace

FaceParams sample_face_params(Rng& rng) {
    FaceParams p;
    p.bg_brightness = rng.uniform(0.05, 0.95);
    p.skin_tone = rng.uniform(0.05, 0.95);
    p.cx = rng.uniform(0.42, 0.58);
    p.cy = rng.uniform(0.46, 0.58);
    p.rx = rng.uniform(0.20, 0.32);
    p.ry = rng.uniform(0.26, 0.38);
    p.eye_dx = rng.uniform(0.34, 0.52);
    p.eye_r = rng.uniform(0.040, 0.070);
    p.mouth_curve = rng.uniform(-1.0, 1.0);
    if (std::abs(p.mouth_curve) < 0.15) p.mouth_curve = (p.mouth_curve >= 0.0) ? 0.15 : -0.15;
    p.mouth_w = rng.uniform(0.10, 0.17);
    p.hair = rng.uniform_int(4);
    return p;
}

FaceParams restyle_face_params(const FaceParams& base, Rng& rng) {
    FaceParams p = base;
    p.bg_brightness = rng.uniform(0.05, 0.95);
    p.skin_tone = rng.uniform(0.05, 0.95);
    p.hair = rng.uniform_int(4);
    return p;
}

Tensor render_face(const FaceParams& p, int size) {
    Tensor img({3, size, size});
    double* d = img.data();
    int hw = size * size;

    double bg = -0.85 + 1.70 * p.bg_brightness;
    for (int y = 0; y < size; ++y) {
        double fy = static_cast<double>(y) / (size - 1);
        double v = bg - 0.25 * fy;
        for (int x = 0; x < size; ++x) {
            int idx = y * size + x;
            d[idx] = v - 0.05;
            d[hw + idx] = v;
            d[2 * hw + idx] = v + 0.10;
        }
    }

    Color skin = lerp({0.72, 0.47, 0.28}, {-0.02, -0.28, -0.46}, p.skin_tone);
    Color hair = kHairColors[static_cast<size_t>(p.hair)];
    Color eye{-0.85, -0.85, -0.85};
    Color mouth{0.35, -0.55, -0.50};

    double px = 1.0 / size;
    for (int y = 0; y < size; ++y) {
        double fy = (y + 0.5) / size;
        for (int x = 0; x < size; ++x) {
            double fx = (x + 0.5) / size;

            double ex = (fx - p.cx) / p.rx;
            double ey = (fy - p.cy) / p.ry;
            double e = ex * ex + ey * ey;
            double face_a = smoothstep(1.15, 0.92, e);
            if (face_a > 0.0) put(img, y, x, skin, face_a);

            // hair: upper band of a slightly larger ellipse
            double hx = (fx - p.cx) / (p.rx * 1.12);
            double hy = (fy - (p.cy - 0.06)) / (p.ry * 1.12);
            double he = hx * hx + hy * hy;
            if (fy < p.cy - 0.55 * p.ry) {
                double hair_a = smoothstep(1.15, 0.92, he);
                if (hair_a > 0.0) put(img, y, x, hair, hair_a);
            }

            // eyes
            for (int sgn : {-1, 1}) {
                double ox = fx - (p.cx + sgn * p.eye_dx * p.rx);
                double oy = fy - (p.cy - 0.18 * p.ry);
                double r = std::sqrt(ox * ox + oy * oy);
                double a = smoothstep(p.eye_r + px, p.eye_r - px, r);
                if (a > 0.0) put(img, y, x, eye, a);
            }

            // mouth: parabolic arc below center
            double mx = (fx - p.cx) / p.mouth_w;
            if (std::abs(mx) <= 1.0) {
                double my = p.cy + 0.48 * p.ry + 0.05 * p.mouth_curve * (mx * mx - 0.5);
                double dist = std::abs(fy - my);
                double a = smoothstep(1.6 * px, 0.5 * px, dist);
                if (a > 0.0) put(img, y, x, mouth, a);
            }
        }
    }
    return img;
}

Tensor render_style_face(const FaceParams& p, int size) {
    Tensor base = render_face(p, size);
    Tensor img({3, size, size});
    double* s = base.data();
    double* d = img.data();
    int hw = size * size;

    // Posterize luminance into four bands with a warm/cool split palette.
    const std::array<Color, 4> palette = {Color{-0.80, -0.45, -0.35}, Color{-0.30, 0.05, 0.25},
                                          Color{0.45, 0.20, -0.15}, Color{0.85, 0.70, 0.35}};
    for (int i = 0; i < hw; ++i) {
        double lum = (s[i] + s[hw + i] + s[2 * hw + i]) / 3.0;
        int band = std::clamp(static_cast<int>((lum + 1.0) * 0.5 * 4.0), 0, 3);
        const Color& c = palette[static_cast<size_t>(band)];
        d[i] = c.r;
        d[hw + i] = c.g;
        d[2 * hw + i] = c.b;
    }

    // Ink outline around the head.
    Color ink{-0.9, -0.9, -0.85};
    for (int y = 0; y < size; ++y) {
        double fy = (y + 0.5) / size;
        for (int x = 0; x < size; ++x) {
            double fx = (x + 0.5) / size;
            double ex = (fx - p.cx) / p.rx;
            double ey = (fy - p.cy) / p.ry;
            double e = std::sqrt(ex * ex + ey * ey);
            double a = smoothstep(0.14, 0.04, std::abs(e - 1.0));
            if (a > 0.0) put(img, y, x, ink, a);
        }
    }
    return img;
}

std::vector<std::string> toy_vocabulary() {
    return {"face",  "bright", "dim",   "pale",    "tan",       "smile",    "frown",
            "small", "large",  "darkhair", "redhair", "greenhair", "bluehair"};
}

std::vector<std::string> caption_tokens(const FaceParams& p) {
    static const char* hair_words[] = {"darkhair", "redhair", "greenhair", "bluehair"};
    std::vector<std::string> toks;
    toks.emplace_back("face");
    toks.emplace_back(p.bg_brightness > 0.5 ? "bright" : "dim");
    toks.emplace_back(p.skin_tone > 0.5 ? "tan" : "pale");
    toks.emplace_back(p.mouth_curve > 0.0 ? "smile" : "frown");
    toks.emplace_back(p.rx * p.ry > 0.082 ? "large" : "small");
    toks.emplace_back(hair_words[p.hair]);
    return toks;
}

Tensor add_occluders(const Tensor& image, Rng& rng) {
    Tensor out = image.clone();
    int size = out.dim(1);
    int hw = size * size;
    double* d = out.data();
    int n = 2 + rng.uniform_int(3);
    for (int i = 0; i < n; ++i) {
        int w = 6 + rng.uniform_int(9);
        int h = 6 + rng.uniform_int(9);
        int x0 = rng.uniform_int(std::max(1, size - w));
        int y0 = rng.uniform_int(std::max(1, size - h));
        double cr = rng.uniform(-1.0, 1.0);
        double cg = rng.uniform(-1.0, 1.0);
        double cb = rng.uniform(-1.0, 1.0);
        // push toward saturation so occluders are far from the face palette
        cr = cr > 0 ? 0.9 : -0.9;
        cg = cg > 0 ? 0.9 : -0.9;
        cb = cb > 0 ? 0.9 : -0.9;
        for (int y = y0; y < std::min(size, y0 + h); ++y)
            for (int x = x0; x < std::min(size, x0 + w); ++x) {
                int idx = y * size + x;
                d[idx] = cr;
                d[hw + idx] = cg;
                d[2 * hw + idx] = cb;
            }
    }
    return out;
}

std::vector<Tensor> make_corpus(int count, int size, uint64_t seed) {
    Rng rng(seed);
    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(render_face(sample_face_params(rng), size));
    return out;
}

}  // namespace stylediff
