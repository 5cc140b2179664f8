#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "bdf/data.hpp"
#include "bdf/model.hpp"

namespace bdf {

struct TrainConfig {
    int epochs = 5;
    int batch_size = 64;
    float learning_rate = 0.01f;
    float momentum = 0.9f;  // in [0,1)
    std::uint64_t rng_seed = 42;
};

struct TrainResult {
    ModelParams params;
    std::vector<float> loss_history;  // mean batch loss per epoch
};

/// Mini-batch SGD with momentum over a seeded per-epoch shuffle. Fully
/// deterministic: identical seed and config give bitwise-identical weights.
/// Throws TrainingError naming epoch and batch if the loss goes non-finite.
TrainResult train(const ModelParams& params_init, const Dataset& train_set,
                  const TrainConfig& cfg);

/// Fraction of test images whose argmax logit matches the label. Argmax
/// ties break toward the lower class index.
double accuracy(const ModelParams& params, const Dataset& test_set);

/// Fraction of test images with true label != trigger.target_label that the
/// model classifies as the target label after stamping. pre_stamp, when
/// present, is applied first (the clean+ori+syn setting).
double attack_success_rate(const ModelParams& params, const Dataset& test_set,
                           const TriggerSpec& trigger, const TriggerSpec* pre_stamp = nullptr);

/// Clean accuracy plus the attack success rate of each triggered setting.
/// SR entries are absent when the corresponding trigger was not supplied.
struct EvalReport {
    double clean_accuracy = 0.0;
    std::optional<double> sr_clean_ori;
    std::optional<double> sr_clean_syn;
    std::optional<double> sr_clean_ori_syn;
    int n_eval = 0;
    std::optional<double> threshold_used;
};

EvalReport evaluate_all(const ModelParams& params, const Dataset& test_set,
                        const TriggerSet& triggers,
                        std::optional<double> threshold_used = std::nullopt);

/// JSON object with exactly the EvalReport field names; absent values are
/// serialized as null.
std::string eval_report_json(const EvalReport& report);
void save_eval_report(const EvalReport& report, const std::filesystem::path& path);

/// CSV with header "epoch,mean_loss".
void save_loss_history(const std::vector<float>& loss_history,
                       const std::filesystem::path& path);

}  // namespace bdf
