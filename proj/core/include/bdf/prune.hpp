#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "bdf/data.hpp"
#include "bdf/model.hpp"
#include "bdf/train.hpp"

namespace bdf {

/// Per-neuron max activations (l-infinity over each channel's map) of the
/// calibration set, once clean and once stamped with the synthetic trigger.
struct CalibrationResult {
    std::vector<float> per_neuron_clean_max;      // 32 entries
    std::vector<float> per_neuron_triggered_max;  // 32 entries
    float global_clean_max = 0.0f;
};

CalibrationResult calibrate(const ModelParams& params, const std::vector<Tensor>& clean_images,
                            const TriggerSpec& synthetic_trigger);

/// Which per-neuron maxima drive pruning. The defender owns only the
/// synthetic trigger, so triggered maxima are the default; clean maxima are
/// exposed for comparison.
enum class PruneCriterion { triggered_max, clean_max };

/// Masks every final-conv channel whose calibration maximum exceeds the
/// threshold. Returns a new ModelParams (mask entries AND the input's);
/// the input is untouched. threshold must be nonnegative.
ModelParams prune(const ModelParams& params, float threshold, const CalibrationResult& calibration,
                  PruneCriterion criterion = PruneCriterion::triggered_max);

struct SweepRow {
    float threshold = 0.0f;
    int pruned_count = 0;
    EvalReport eval;
};

struct SweepReport {
    EvalReport unpruned;
    std::vector<SweepRow> rows;  // thresholds strictly decreasing
    std::optional<float> selected_threshold;
    int channel_count = 0;
};

/// Prunes fresh from `params` at every grid threshold (no cumulative state)
/// and evaluates each pruned model on all supplied settings. Thresholds
/// must be strictly decreasing.
SweepReport sweep(const ModelParams& params, const CalibrationResult& calibration,
                  const Dataset& test_set, const TriggerSet& triggers,
                  const std::vector<float>& thresholds,
                  PruneCriterion criterion = PruneCriterion::triggered_max);

/// Among rows whose clean-accuracy drop versus unpruned is at most
/// max_acc_drop percentage points, the threshold minimizing SR(clean+ori);
/// ties break toward the larger threshold. Absent when nothing qualifies.
std::optional<float> select_threshold(const SweepReport& report, double max_acc_drop);

/// 20 uniform steps from global_clean_max down to global_clean_max / 10.
std::vector<float> default_threshold_grid(const CalibrationResult& calibration);

/// CSV rows: threshold,pruned_count,acc,sr_ori,sr_syn,sr_ori_syn with a
/// leading "none" row for the unpruned baseline.
void save_sweep_csv(const SweepReport& report, const std::filesystem::path& path);
std::string sweep_report_json(const SweepReport& report);
void save_sweep_report(const SweepReport& report, const std::filesystem::path& path);

}  // namespace bdf
