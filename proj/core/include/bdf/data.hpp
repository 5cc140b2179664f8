#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bdf/tensor.hpp"

namespace bdf {

enum class Split { train, test };

/// Immutable after construction; concurrent reads are safe.
struct Dataset {
    std::vector<Tensor> images;  // each [C,H,W], values in [0,1]
    std::vector<int> labels;
    int num_classes = 0;
    std::string name;
    Split split = Split::train;

    std::size_t size() const { return images.size(); }
};

enum class TriggerProvenance { original, synthetic };

/// A spatial mask in [0,1] plus a pattern image plus a target label. Covers
/// both the planted trigger and reverse-engineered ones.
struct TriggerSpec {
    Tensor mask;     // [H,W], values in [0,1]
    Tensor pattern;  // [C,H,W] (C may be 1 to share one plane across channels)
    int target_label = 0;
    TriggerProvenance provenance = TriggerProvenance::original;
};

struct PoisonConfig {
    TriggerSpec trigger;
    float poison_rate = 0.05f;  // in (0,1)
    std::uint64_t rng_seed = 0;
};

/// The four image/trigger combinations used throughout the analyses.
enum class InputSetting { clean, clean_ori, clean_syn, clean_ori_syn };

inline constexpr InputSetting kAllSettings[] = {InputSetting::clean, InputSetting::clean_ori,
                                                InputSetting::clean_syn,
                                                InputSetting::clean_ori_syn};

const char* to_string(InputSetting s);
InputSetting setting_from_string(const std::string& s);

/// The triggers a given analysis has available.
struct TriggerSet {
    std::optional<TriggerSpec> original;
    std::optional<TriggerSpec> synthetic;
};

/// Reads a standard IDX image/label file pair (big-endian magic 0x00000803
/// for images, 0x00000801 for labels). Pixels are scaled from [0,255] to
/// [0,1].
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Writes a single-channel dataset as an IDX pair, bit-exact inverse of
/// load_idx for u8-quantized pixels.
void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

/// Deterministic desk-scale dataset: class k rendered as a fixed bar/diagonal
/// glyph plus seeded uniform noise of amplitude 0.1, quantized to the u8
/// grid so IDX round-trips are exact.
Dataset gen_synthetic(int num_classes, int per_class, int h, int w, std::uint64_t seed);

/// out = (1 - m) * image + m * pattern, applied per channel.
Tensor stamp(const Tensor& image, const TriggerSpec& trigger);

/// Stamps an image according to an input setting; clean_ori_syn applies the
/// original trigger first, then the synthetic one.
Tensor apply_setting(const Tensor& image, InputSetting setting, const TriggerSet& triggers);

/// Binary square x square mask of ones at the bottom-right corner, offset
/// inward by margin, with an all-ones (white) pattern inside the block.
TriggerSpec make_original_trigger(int h, int w, int square, int margin, int target);

struct PoisonResult {
    Dataset dataset;
    std::vector<int> poisoned_indices;  // sorted
};

/// Stamps and relabels a seeded uniform sample of floor(rate*N) training
/// images to the trigger's target label. Unsampled images are untouched.
PoisonResult poison(const Dataset& train, const PoisonConfig& cfg);

/// Trigger file: JSON with base64-encoded little-endian float payloads.
void save_trigger(const TriggerSpec& trigger, const std::filesystem::path& path);
TriggerSpec load_trigger(const std::filesystem::path& path);

}  // namespace bdf
