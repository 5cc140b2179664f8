#include "bdf/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "bdf/errors.hpp"
#include "bdf/ops.hpp"
#include "bdf/rng.hpp"

namespace bdf {

namespace {

float squash(float theta) { return (std::tanh(theta) + 1.0f) * 0.5f; }
float squash_grad(float theta) {
    const float t = std::tanh(theta);
    return (1.0f - t * t) * 0.5f;
}

float mask_l1_of(const Tensor& mask) {
    float s = 0.0f;
    for (float v : mask.data) s += v;  // mask is in [0,1], |m| = m
    return s;
}

float median_of(std::vector<float> v) {
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    if (n % 2 == 1) return v[mid];
    const float hi = v[mid];
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1, v.end());
    return 0.5f * (v[mid - 1] + hi);
}

}  // namespace

SynthesisResult synthesize(const ModelParams& params, const std::vector<Tensor>& calib_images,
                           int label, const SynthesisConfig& cfg) {
    if (calib_images.empty()) {
        throw ConfigError("synthesize: calibration image set is empty");
    }
    if (label < 0 || label >= params.num_classes) {
        throw DomainError("synthesize: label " + std::to_string(label) + " outside [0," +
                          std::to_string(params.num_classes) + ")");
    }
    if (cfg.iterations < 0 || cfg.batch < 1 || cfg.lambda_l1 < 0.0f) {
        throw ConfigError("synthesize: iterations must be >=0, batch >=1, lambda >=0");
    }
    if (cfg.iterations > 0 && cfg.step_size == 0.0f) {
        throw ConfigError("synthesize: iterations > 0 with zero step size cannot progress");
    }

    const int c = params.input_shape[0], h = params.input_shape[1], w = params.input_shape[2];
    const int n = static_cast<int>(calib_images.size());
    const int batch = std::min(cfg.batch, n);

    Tensor theta_m({h, w});        // tanh(0) -> mask 0.5 everywhere
    Tensor theta_p({c, h, w});     // pattern 0.5 everywhere
    Tensor mask({h, w});
    Tensor pattern({c, h, w});
    auto refresh = [&] {
        for (std::size_t i = 0; i < mask.size(); ++i) mask.data[i] = squash(theta_m.data[i]);
        for (std::size_t i = 0; i < pattern.size(); ++i) pattern.data[i] = squash(theta_p.data[i]);
    };
    refresh();

    Rng rng(derived_seed(cfg.rng_seed, "synthesis/label-" + std::to_string(label)));
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    int cursor = 0;
    auto next_batch = [&](std::vector<int>& idx) {
        idx.clear();
        for (int i = 0; i < batch; ++i) {
            if (cursor == n) {
                rng.shuffle(order);
                cursor = 0;
            }
            idx.push_back(order[static_cast<std::size_t>(cursor++)]);
        }
    };

    TriggerSpec current;
    current.target_label = label;
    current.provenance = TriggerProvenance::synthetic;

    SynthesisResult best;
    best.label = label;
    best.final_loss = std::numeric_limits<float>::max();
    std::vector<float> trace;
    trace.reserve(static_cast<std::size_t>(cfg.iterations) + 1);

    Tensor d_m({h, w});
    Tensor d_p({c, h, w});
    std::vector<int> idx;

    for (int iter = 0; iter <= cfg.iterations; ++iter) {
        next_batch(idx);
        current.mask = mask;
        current.pattern = pattern;

        std::fill(d_m.data.begin(), d_m.data.end(), 0.0f);
        std::fill(d_p.data.begin(), d_p.data.end(), 0.0f);
        float ce_sum = 0.0f;
        for (int bi : idx) {
            const Tensor& x = calib_images[static_cast<std::size_t>(bi)];
            const Tensor stamped = stamp(x, current);
            const ForwardTrace t = forward(params, stamped);
            const XentResult xe = softmax_xent(t.logits, label);
            ce_sum += xe.loss;
            const Tensor dx = backward_to_input(params, t, xe.d_logits);
            for (int ci = 0; ci < c; ++ci) {
                for (int y = 0; y < h; ++y) {
                    for (int xx = 0; xx < w; ++xx) {
                        const float g = dx.at(ci, y, xx);
                        d_m.at(y, xx) += g * (pattern.at(ci, y, xx) - x.at(ci, y, xx));
                        d_p.at(ci, y, xx) += g * mask.at(y, xx);
                    }
                }
            }
        }
        const float inv_b = 1.0f / static_cast<float>(batch);
        const float objective = ce_sum * inv_b + cfg.lambda_l1 * mask_l1_of(mask);
        trace.push_back(objective);

        if (objective < best.final_loss) {
            best.final_loss = objective;
            best.trigger = current;
        }
        if (iter == cfg.iterations) break;

        for (std::size_t i = 0; i < d_m.size(); ++i) {
            const float g = d_m.data[i] * inv_b + cfg.lambda_l1;
            theta_m.data[i] -= cfg.step_size * g * squash_grad(theta_m.data[i]);
        }
        for (std::size_t i = 0; i < d_p.size(); ++i) {
            theta_p.data[i] -= cfg.step_size * d_p.data[i] * inv_b * squash_grad(theta_p.data[i]);
        }
        refresh();
    }

    best.mask_l1 = mask_l1_of(best.trigger.mask);
    best.loss_trace = std::move(trace);
    return best;
}

TargetIdReport identify_from_mask_norms(const std::vector<float>& mask_l1, float cutoff) {
    if (mask_l1.size() < 3) {
        throw ConfigError("identify_target: need at least 3 classes, got " +
                          std::to_string(mask_l1.size()));
    }
    const float med = median_of(mask_l1);
    std::vector<float> dev(mask_l1.size());
    for (std::size_t i = 0; i < mask_l1.size(); ++i) dev[i] = std::abs(mask_l1[i] - med);
    const float mad_scaled = 1.4826f * median_of(dev);

    TargetIdReport r;
    r.mask_l1 = mask_l1;
    r.cutoff = cutoff;
    r.anomaly_index.resize(mask_l1.size());
    for (std::size_t i = 0; i < mask_l1.size(); ++i) {
        if (mad_scaled > 0.0f) {
            r.anomaly_index[i] = dev[i] / mad_scaled;
        } else {
            // Degenerate spread: identical norms score 0, anything apart is
            // an unbounded outlier.
            r.anomaly_index[i] = dev[i] == 0.0f ? 0.0f : 1e30f;
        }
    }

    std::size_t lowest = 0;
    for (std::size_t i = 1; i < mask_l1.size(); ++i) {
        if (mask_l1[i] < mask_l1[lowest]) lowest = i;
    }
    if (r.anomaly_index[lowest] > cutoff) {
        r.identified_target = static_cast<int>(lowest);
    }
    return r;
}

TargetIdReport identify_target(const ModelParams& params,
                               const std::vector<Tensor>& calib_images,
                               const SynthesisConfig& cfg) {
    if (params.num_classes < 3) {
        throw ConfigError("identify_target: need at least 3 classes, got " +
                          std::to_string(params.num_classes));
    }
    std::vector<float> norms;
    norms.reserve(static_cast<std::size_t>(params.num_classes));
    for (int label = 0; label < params.num_classes; ++label) {
        norms.push_back(synthesize(params, calib_images, label, cfg).mask_l1);
    }
    return identify_from_mask_norms(norms, cfg.anomaly_cutoff);
}

double mask_similarity(const Tensor& synthetic_mask, const Tensor& original_mask,
                       float bin_threshold) {
    if (!synthetic_mask.same_shape(original_mask)) {
        throw DimensionError("mask_similarity: shapes " + shape_str(synthetic_mask.shape) +
                             " and " + shape_str(original_mask.shape) + " differ");
    }
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < synthetic_mask.size(); ++i) {
        const bool a = synthetic_mask.data[i] > bin_threshold;
        const bool b = original_mask.data[i] > 0.0f;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    if (uni == 0) return 1.0;  // both empty: identical
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string target_id_report_json(const TargetIdReport& report) {
    nlohmann::ordered_json j;
    j["mask_l1"] = report.mask_l1;
    j["anomaly_index"] = report.anomaly_index;
    if (report.identified_target) {
        j["identified_target"] = *report.identified_target;
    } else {
        j["identified_target"] = nullptr;
    }
    j["cutoff"] = report.cutoff;
    return j.dump(2) + "\n";
}

void save_target_id_report(const TargetIdReport& report, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("target id report: cannot open " + path.string() + " for writing");
    }
    f << target_id_report_json(report);
}

void save_loss_trace(const SynthesisResult& result, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("loss trace: cannot open " + path.string() + " for writing");
    }
    f << "iteration,objective\n";
    char buf[64];
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i,
                      static_cast<double>(result.loss_trace[i]));
        f << buf;
    }
}

}  // namespace bdf
