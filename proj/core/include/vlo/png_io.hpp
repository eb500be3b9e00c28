#pragma once

#include <filesystem>

#include "vlo/imaging.hpp"

namespace vlo {

// 8- or 16-bit gray or RGB PNG (palette/alpha are expanded or stripped); intensities scaled to [0, 1].
Image read_image_png(const std::filesystem::path& path);
// Writes gray or RGB at bit_depth 8 or 16, rounding intensity * (2^bit_depth - 1).
void write_image_png(const std::filesystem::path& path, const Image& img, int bit_depth = 8);

// 16-bit gray PNG with value = depth_m * 256; zero marks a missing sample.
SparseDepthMap read_depth_png(const std::filesystem::path& path);
void write_depth_png(const std::filesystem::path& path, const Grid& depth);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

}  // namespace vlo
