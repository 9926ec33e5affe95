#pragma once

#include <string>
#include <vector>

#include "stylediff/rng.hpp"
#include "stylediff/tensor.hpp"

namespace stylediff {

// Procedural 32x32 "face" domain: soft-edged ellipse head over a vertical
// gradient background, with eyes, mouth and hair controlled by a small
// parameter vector. Geometry parameters define an identity; color parameters
// are the style axis the captions describe.
struct FaceParams {
    double bg_brightness = 0.5;  // 0 dim .. 1 bright
    double skin_tone = 0.5;      // 0 pale .. 1 tan
    double cx = 0.5, cy = 0.52;
    double rx = 0.27, ry = 0.31;
    double eye_dx = 0.42;        // eye offset as a fraction of rx
    double eye_r = 0.055;
    double mouth_curve = 0.5;    // < 0 frown, > 0 smile
    double mouth_w = 0.14;
    int hair = 0;                // 0 dark, 1 red, 2 green, 3 blue
};

FaceParams sample_face_params(Rng& rng);

// Resamples only the color attributes (background, skin, hair) so the result
// shares the identity (geometry) of `base`.
FaceParams restyle_face_params(const FaceParams& base, Rng& rng);

Tensor render_face(const FaceParams& p, int size);

// Stylized-domain rendering of the same parameters: posterized palette,
// flattened background and an ink outline around the head.
Tensor render_style_face(const FaceParams& p, int size);

// Caption for the rendered face, drawn from toy_vocabulary().
std::vector<std::string> caption_tokens(const FaceParams& p);
std::vector<std::string> toy_vocabulary();

// Paints 2-4 saturated occluding rectangles over the image (density-ranking
// artifact corpus).
Tensor add_occluders(const Tensor& image, Rng& rng);

std::vector<Tensor> make_corpus(int count, int size, uint64_t seed);

}  // namespace stylediff
