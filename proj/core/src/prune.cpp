#include "bdf/prune.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bdf/activation.hpp"
#include "bdf/errors.hpp"

namespace bdf {

CalibrationResult calibrate(const ModelParams& params, const std::vector<Tensor>& clean_images,
                            const TriggerSpec& synthetic_trigger) {
    if (clean_images.empty()) {
        throw EvalError("calibrate: calibration image set is empty");
    }
    CalibrationResult r;
    r.per_neuron_clean_max.assign(kFinalConvChannels, 0.0f);
    r.per_neuron_triggered_max.assign(kFinalConvChannels, 0.0f);

    for (const Tensor& img : clean_images) {
        const auto clean = neuron_norms(forward(params, img).final_conv_maps, NormKind::Linf);
        const auto trig = neuron_norms(
            forward(params, stamp(img, synthetic_trigger)).final_conv_maps, NormKind::Linf);
        for (int c = 0; c < kFinalConvChannels; ++c) {
            const auto u = static_cast<std::size_t>(c);
            r.per_neuron_clean_max[u] = std::max(r.per_neuron_clean_max[u], clean[u]);
            r.per_neuron_triggered_max[u] = std::max(r.per_neuron_triggered_max[u], trig[u]);
        }
    }
    r.global_clean_max =
        *std::max_element(r.per_neuron_clean_max.begin(), r.per_neuron_clean_max.end());
    return r;
}

ModelParams prune(const ModelParams& params, float threshold, const CalibrationResult& calibration,
                  PruneCriterion criterion) {
    if (!(threshold >= 0.0f)) {
        throw ConfigError("prune: threshold must be nonnegative");
    }
    const auto& maxima = criterion == PruneCriterion::triggered_max
                             ? calibration.per_neuron_triggered_max
                             : calibration.per_neuron_clean_max;
    if (maxima.size() != static_cast<std::size_t>(kFinalConvChannels)) {
        throw ConfigError("prune: calibration has " + std::to_string(maxima.size()) +
                          " entries, expected " + std::to_string(kFinalConvChannels));
    }
    ModelParams out = params;
    for (int c = 0; c < kFinalConvChannels; ++c) {
        if (maxima[static_cast<std::size_t>(c)] > threshold) {
            out.prune_mask[static_cast<std::size_t>(c)] = 0;
        }
    }
    return out;
}

SweepReport sweep(const ModelParams& params, const CalibrationResult& calibration,
                  const Dataset& test_set, const TriggerSet& triggers,
                  const std::vector<float>& thresholds, PruneCriterion criterion) {
    if (thresholds.empty()) {
        throw ConfigError("sweep: threshold grid is empty");
    }
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
        if (!(thresholds[i] < thresholds[i - 1])) {
            throw ConfigError("sweep: thresholds must be strictly decreasing");
        }
    }
    if (!triggers.synthetic) {
        throw ConfigError("sweep: a synthetic trigger is required");
    }

    SweepReport report;
    report.channel_count = kFinalConvChannels;
    report.unpruned = evaluate_all(params, test_set, triggers);
    report.rows.reserve(thresholds.size());
    for (float t : thresholds) {
        SweepRow row;
        row.threshold = t;
        const ModelParams pruned = prune(params, t, calibration, criterion);
        row.pruned_count = static_cast<int>(
            std::count(pruned.prune_mask.begin(), pruned.prune_mask.end(), 0));
        row.eval = evaluate_all(pruned, test_set, triggers, static_cast<double>(t));
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::optional<float> select_threshold(const SweepReport& report, double max_acc_drop) {
    std::optional<float> best;
    double best_sr = 0.0;
    for (const SweepRow& row : report.rows) {
        if (!row.eval.sr_clean_ori) continue;
        const double drop = (report.unpruned.clean_accuracy - row.eval.clean_accuracy) * 100.0;
        if (drop > max_acc_drop) continue;
        const double sr = *row.eval.sr_clean_ori;
        // Strict < keeps the earlier (larger) threshold on ties.
        if (!best || sr < best_sr) {
            best = row.threshold;
            best_sr = sr;
        }
    }
    return best;
}

std::vector<float> default_threshold_grid(const CalibrationResult& calibration) {
    const float hi = calibration.global_clean_max;
    const float lo = hi / 10.0f;
    std::vector<float> grid(20);
    for (int i = 0; i < 20; ++i) {
        grid[static_cast<std::size_t>(i)] = hi - (hi - lo) * static_cast<float>(i) / 19.0f;
    }
    return grid;
}

namespace {

void csv_cell(std::ofstream& f, const std::optional<double>& v) {
    if (v) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.9g", *v);
        f << buf;
    }
}

nlohmann::ordered_json eval_to_json(const EvalReport& e) {
    nlohmann::ordered_json j;
    j["clean_accuracy"] = e.clean_accuracy;
    auto put = [&](const char* k, const std::optional<double>& v) {
        if (v) {
            j[k] = *v;
        } else {
            j[k] = nullptr;
        }
    };
    put("sr_clean_ori", e.sr_clean_ori);
    put("sr_clean_syn", e.sr_clean_syn);
    put("sr_clean_ori_syn", e.sr_clean_ori_syn);
    j["n_eval"] = e.n_eval;
    put("threshold_used", e.threshold_used);
    return j;
}

}  // namespace

void save_sweep_csv(const SweepReport& report, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("sweep csv: cannot open " + path.string() + " for writing");
    }
    f << "threshold,pruned_count,acc,sr_ori,sr_syn,sr_ori_syn\n";
    auto row = [&](const char* threshold, int pruned, const EvalReport& e) {
        char buf[48];
        f << threshold << ',' << pruned << ',';
        std::snprintf(buf, sizeof(buf), "%.9g", e.clean_accuracy);
        f << buf << ',';
        csv_cell(f, e.sr_clean_ori);
        f << ',';
        csv_cell(f, e.sr_clean_syn);
        f << ',';
        csv_cell(f, e.sr_clean_ori_syn);
        f << '\n';
    };
    row("none", 0, report.unpruned);
    for (const SweepRow& r : report.rows) {
        char tbuf[48];
        std::snprintf(tbuf, sizeof(tbuf), "%.9g", static_cast<double>(r.threshold));
        row(tbuf, r.pruned_count, r.eval);
    }
}

std::string sweep_report_json(const SweepReport& report) {
    nlohmann::ordered_json j;
    j["channel_count"] = report.channel_count;
    j["unpruned"] = eval_to_json(report.unpruned);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const SweepRow& r : report.rows) {
        nlohmann::ordered_json jr;
        jr["threshold"] = r.threshold;
        jr["pruned_count"] = r.pruned_count;
        jr["eval"] = eval_to_json(r.eval);
        rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    if (report.selected_threshold) {
        j["selected_threshold"] = *report.selected_threshold;
    } else {
        j["selected_threshold"] = nullptr;
    }
    return j.dump(2) + "\n";
}

void save_sweep_report(const SweepReport& report, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("sweep report: cannot open " + path.string() + " for writing");
    }
    f << sweep_report_json(report);
}

}  // namespace bdf
