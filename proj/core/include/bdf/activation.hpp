#pragma once

#include <filesystem>
#include <vector>

#include "bdf/data.hpp"
#include "bdf/model.hpp"

namespace bdf {

enum class NormKind { L1, L2, Linf };

inline constexpr NormKind kAllNorms[] = {NormKind::L1, NormKind::L2, NormKind::Linf};

const char* to_string(NormKind p);
NormKind norm_from_string(const std::string& s);

/// Per-channel norm of each [h,w] activation map. Maps are nonnegative
/// post-ReLU, so |a| = a throughout.
std::vector<float> neuron_norms(const Tensor& final_conv_maps, NormKind p);

struct Histogram {
    std::vector<float> bin_edges;  // nbins + 1 edges, uniform
    std::vector<std::int64_t> counts;
};

/// Per-neuron norms of one input setting over a batch of images.
struct ActivationStats {
    InputSetting setting = InputSetting::clean;
    NormKind p = NormKind::L1;
    std::vector<std::vector<float>> norms;  // [n_images][channels]
    float max_value = 0.0f;
    Histogram histogram;
};

inline constexpr int kHistogramBins = 50;

/// Runs the first n_images of the test set through the model once per
/// setting and collects per-neuron norms. All returned histograms share
/// one set of bin edges spanning the global min/max so overlays align.
std::vector<ActivationStats> collect_stats(const ModelParams& params, const Dataset& test_set,
                                           const std::vector<InputSetting>& settings,
                                           const TriggerSet& triggers, int n_images, NormKind p);

/// Max-activation separation between clean and each triggered setting.
struct SeparationEntry {
    NormKind p = NormKind::L1;
    float max_clean = 0.0f;
    std::vector<InputSetting> settings;
    std::vector<float> max_triggered;  // parallel to settings
    std::vector<float> ratio;          // max_triggered / max_clean
};

struct SeparationReport {
    std::vector<SeparationEntry> entries;  // one per norm present in the input
    /// Per triggered setting, the norms achieving the largest ratio. More
    /// than one entry means an explicit tie.
    std::vector<InputSetting> settings;
    std::vector<std::vector<NormKind>> best_p;  // parallel to settings
    int channel_count = 0;
};

/// Expects stats covering the clean setting plus at least one triggered
/// setting for each norm present.
SeparationReport separation(const std::vector<ActivationStats>& stats);

/// Tiles the 32 per-channel maps (each normalized to [0,1] independently,
/// zero maps stay zero) into a 4x8 grid with 1-pixel white separators.
Tensor activation_grid(const ModelParams& params, const Tensor& image);

/// CSV rows: p,setting,bin_left,bin_right,count
void save_histograms_csv(const std::vector<ActivationStats>& stats,
                         const std::filesystem::path& path);
std::string separation_report_json(const SeparationReport& report);
void save_separation_report(const SeparationReport& report, const std::filesystem::path& path);

}  // namespace bdf
