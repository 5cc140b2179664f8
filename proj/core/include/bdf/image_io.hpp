#pragma once

#include <array>
#include <filesystem>

#include "bdf/tensor.hpp"

namespace bdf {

/// RGB triple for a scalar in [0,1], looked up in a fixed 256-entry
/// jet-style color table.
std::array<unsigned char, 3> jet_color(float v);

/// Writes a [H,W] tensor in [0,1] as a grayscale P6 PPM.
void save_gray_ppm(const Tensor& values, const std::filesystem::path& path);

/// Writes a [H,W] tensor in [0,1] as a jet-colored P6 PPM.
void save_jet_ppm(const Tensor& values, const std::filesystem::path& path);

/// 0.5 * image + 0.5 * jet(values), both [*,H,W]; single-channel images are
/// broadcast to gray.
void save_overlay_ppm(const Tensor& values, const Tensor& image,
                      const std::filesystem::path& path);

/// Writes a [H,W] tensor as CSV rows of raw values.
void save_matrix_csv(const Tensor& values, const std::filesystem::path& path);

}  // namespace bdf
