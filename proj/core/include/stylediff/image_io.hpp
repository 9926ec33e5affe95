#pragma once

#include <filesystem>

#include "stylediff/tensor.hpp"

namespace stylediff {

// 8-bit RGB PNG <-> [C,H,W] tensor in [-1, 1], mapped linearly
// (u8 = round((v+1)/2 * 255), v = u8/255 * 2 - 1). Values are clamped on
// write. Writes are atomic (tmp file + rename).
Tensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Tensor& image);

}  // namespace stylediff
