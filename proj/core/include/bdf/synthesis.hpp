#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "bdf/data.hpp"
#include "bdf/model.hpp"

namespace bdf {

struct SynthesisConfig {
    float lambda_l1 = 0.01f;  // sparsity weight on the mask's l1 norm
    int iterations = 500;
    float step_size = 0.1f;
    int batch = 32;
    std::uint64_t rng_seed = 42;
    int n_calibration_images = 128;
    float anomaly_cutoff = 2.0f;  // MAD index above which a label is flagged
};

struct SynthesisResult {
    TriggerSpec trigger;  // provenance synthetic
    float mask_l1 = 0.0f;
    float final_loss = 0.0f;  // objective of the returned iterate
    int label = 0;
    std::vector<float> loss_trace;  // objective after 0..iterations updates
};

/// Reverse-engineers a (mask, pattern) trigger that flips clean calibration
/// images to `label`: minimizes mean cross-entropy of the stamped batch
/// plus lambda * ||mask||_1 by plain gradient descent. Mask and pattern are
/// parameterized through (tanh+1)/2, so they stay in [0,1] structurally;
/// both start at 0.5 everywhere. Returns the best iterate by objective
/// value. Deterministic given the seed (the per-label stream is derived
/// from cfg.rng_seed and the label).
SynthesisResult synthesize(const ModelParams& params, const std::vector<Tensor>& calib_images,
                           int label, const SynthesisConfig& cfg);

struct TargetIdReport {
    std::vector<float> mask_l1;       // per label
    std::vector<float> anomaly_index; // |x - median| / (1.4826 * MAD)
    std::optional<int> identified_target;
    float cutoff = 2.0f;
};

/// MAD outlier scoring of per-label mask norms. The target is the argmin
/// mask_l1 when its anomaly index exceeds the cutoff, absent otherwise.
TargetIdReport identify_from_mask_norms(const std::vector<float>& mask_l1, float cutoff);

/// Synthesizes a trigger for every label and flags the l1 outlier. Requires
/// at least 3 classes for a meaningful MAD.
TargetIdReport identify_target(const ModelParams& params,
                               const std::vector<Tensor>& calib_images,
                               const SynthesisConfig& cfg);

/// Intersection-over-union of the synthetic mask binarized at bin_threshold
/// against the binary original mask.
double mask_similarity(const Tensor& synthetic_mask, const Tensor& original_mask,
                       float bin_threshold);

std::string target_id_report_json(const TargetIdReport& report);
void save_target_id_report(const TargetIdReport& report, const std::filesystem::path& path);

/// CSV with header "iteration,objective".
void save_loss_trace(const SynthesisResult& result, const std::filesystem::path& path);

}  // namespace bdf
