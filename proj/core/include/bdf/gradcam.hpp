#pragma once

#include <filesystem>

#include "bdf/data.hpp"
#include "bdf/model.hpp"

namespace bdf {

/// Normalized class-discriminative heatmap at input resolution. Max value
/// is exactly 1 unless the map is identically zero.
struct Heatmap {
    Tensor values;  // [H,W] in [0,1]
    int label_used = 0;
    InputSetting input_setting = InputSetting::clean;
};

/// Heatmap over the final conv layer for one logit: per-channel weights are
/// the spatial means of the logit's gradient on the activation maps, the
/// raw map is ReLU of the weighted sum, upsampled nearest-neighbor to input
/// resolution and divided by its max when positive. The image is expected
/// to be stamped already; `setting` only annotates the result.
Heatmap grad_cam(const ModelParams& params, const Tensor& image, int label,
                 InputSetting setting = InputSetting::clean);

/// Fraction of total heatmap mass inside the trigger mask's bounding box
/// dilated by `dilation` pixels. Zero for an all-zero heatmap.
double localization_score(const Heatmap& heatmap, const Tensor& trigger_mask, int dilation);

void save_heatmap_ppm(const Heatmap& heatmap, const std::filesystem::path& path);
void save_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path);
void save_heatmap_overlay(const Heatmap& heatmap, const Tensor& image,
                          const std::filesystem::path& path);

}  // namespace bdf
