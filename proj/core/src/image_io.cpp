#include "stylediff/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "stylediff/errors.hpp"

namespace stylediff {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Tensor read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw_io("png: cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw_io("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw_io("png: allocation failure");
    }
    std::vector<png_bytep> rows;
    std::vector<unsigned char> pixels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw_io("png: decode failure for " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    pixels.resize(static_cast<size_t>(w) * h * 3);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor out({3, static_cast<int>(h), static_cast<int>(w)});
    double* d = out.data();
    int64_t hw = static_cast<int64_t>(h) * w;
    for (int64_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c)
            d[c * hw + i] = static_cast<double>(pixels[static_cast<size_t>(i) * 3 + c]) / 255.0 * 2.0 - 1.0;
    return out;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
    if (image.ndim() != 3 || image.dim(0) != 3) throw_contract("png: expected [3,H,W] image");
    int h = image.dim(1), w = image.dim(2);
    int64_t hw = static_cast<int64_t>(h) * w;
    std::vector<unsigned char> pixels(static_cast<size_t>(hw) * 3);
    const double* d = image.data();
    for (int64_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) {
            double v = std::clamp(d[c * hw + i], -1.0, 1.0);
            pixels[static_cast<size_t>(i) * 3 + c] =
                static_cast<unsigned char>(std::lround((v + 1.0) * 0.5 * 255.0));
        }

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        FilePtr fp(std::fopen(tmp.string().c_str(), "wb"));
        if (!fp) throw_io("png: cannot open " + tmp.string() + " for writing");
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) throw_io("png: allocation failure");
        png_infop info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw_io("png: allocation failure");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw_io("png: encode failure for " + path.string());
        }
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                     PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        std::vector<png_bytep> rows(static_cast<size_t>(h));
        for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = pixels.data() + static_cast<size_t>(y) * w * 3;
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw_io("png: rename failed: " + ec.message());
}

}  // namespace stylediff
