#include "bdf/activation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "bdf/errors.hpp"

namespace bdf {

const char* to_string(NormKind p) {
    switch (p) {
        case NormKind::L1: return "l1";
        case NormKind::L2: return "l2";
        case NormKind::Linf: return "linf";
    }
    return "?";
}

NormKind norm_from_string(const std::string& s) {
    for (NormKind p : kAllNorms) {
        if (s == to_string(p)) return p;
    }
    throw ConfigError("unknown norm '" + s + "' (expected l1, l2 or linf)");
}

std::vector<float> neuron_norms(const Tensor& final_conv_maps, NormKind p) {
    if (final_conv_maps.rank() != 3) {
        throw DimensionError("neuron_norms: maps must be [C,h,w], got " +
                             shape_str(final_conv_maps.shape));
    }
    const int c = final_conv_maps.shape[0];
    const int area = final_conv_maps.shape[1] * final_conv_maps.shape[2];
    std::vector<float> out(static_cast<std::size_t>(c));
    for (int ci = 0; ci < c; ++ci) {
        const float* map = &final_conv_maps.data[static_cast<std::size_t>(ci) * area];
        float v = 0.0f;
        switch (p) {
            case NormKind::L1:
                for (int i = 0; i < area; ++i) v += std::abs(map[i]);
                break;
            case NormKind::L2:
                for (int i = 0; i < area; ++i) v += map[i] * map[i];
                v = std::sqrt(v);
                break;
            case NormKind::Linf:
                for (int i = 0; i < area; ++i) v = std::max(v, std::abs(map[i]));
                break;
        }
        out[static_cast<std::size_t>(ci)] = v;
    }
    return out;
}

std::vector<ActivationStats> collect_stats(const ModelParams& params, const Dataset& test_set,
                                           const std::vector<InputSetting>& settings,
                                           const TriggerSet& triggers, int n_images, NormKind p) {
    if (n_images < 1 || static_cast<std::size_t>(n_images) > test_set.size()) {
        throw EvalError("collect_stats: n_images " + std::to_string(n_images) +
                        " exceeds test set size " + std::to_string(test_set.size()));
    }

    std::vector<ActivationStats> out;
    out.reserve(settings.size());
    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();

    for (InputSetting setting : settings) {
        ActivationStats st;
        st.setting = setting;
        st.p = p;
        st.norms.reserve(static_cast<std::size_t>(n_images));
        for (int i = 0; i < n_images; ++i) {
            const Tensor img =
                apply_setting(test_set.images[static_cast<std::size_t>(i)], setting, triggers);
            std::vector<float> norms = neuron_norms(forward(params, img).final_conv_maps, p);
            for (float v : norms) {
                st.max_value = std::max(st.max_value, v);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            st.norms.push_back(std::move(norms));
        }
        out.push_back(std::move(st));
    }

    // Shared bin edges across settings so the per-setting histograms overlay.
    if (hi <= lo) hi = lo + 1.0f;
    const float width = (hi - lo) / static_cast<float>(kHistogramBins);
    std::vector<float> edges(kHistogramBins + 1);
    for (int i = 0; i <= kHistogramBins; ++i) {
        edges[static_cast<std::size_t>(i)] = lo + width * static_cast<float>(i);
    }
    for (ActivationStats& st : out) {
        st.histogram.bin_edges = edges;
        st.histogram.counts.assign(kHistogramBins, 0);
        for (const auto& row : st.norms) {
            for (float v : row) {
                int bin = static_cast<int>((v - lo) / width);
                bin = std::clamp(bin, 0, kHistogramBins - 1);
                ++st.histogram.counts[static_cast<std::size_t>(bin)];
            }
        }
    }
    return out;
}

SeparationReport separation(const std::vector<ActivationStats>& stats) {
    SeparationReport report;
    report.channel_count = kFinalConvChannels;

    for (NormKind p : kAllNorms) {
        const ActivationStats* clean = nullptr;
        std::vector<const ActivationStats*> triggered;
        for (const auto& st : stats) {
            if (st.p != p) continue;
            if (st.setting == InputSetting::clean) {
                clean = &st;
            } else {
                triggered.push_back(&st);
            }
        }
        if (triggered.empty()) continue;
        if (clean == nullptr) {
            throw ConfigError(std::string("separation: no clean-setting stats for norm ") +
                              to_string(p));
        }
        if (!(clean->max_value > 0.0f)) {
            throw ConfigError(std::string("separation: clean max is zero for norm ") +
                              to_string(p) + ", ratios undefined");
        }
        SeparationEntry e;
        e.p = p;
        e.max_clean = clean->max_value;
        for (const auto* st : triggered) {
            e.settings.push_back(st->setting);
            e.max_triggered.push_back(st->max_value);
            e.ratio.push_back(st->max_value / clean->max_value);
        }
        report.entries.push_back(std::move(e));
    }
    if (report.entries.empty()) {
        throw ConfigError("separation: no triggered-setting stats given");
    }

    // Per setting, which norm grows the most; ties listed explicitly.
    for (std::size_t si = 0; si < report.entries[0].settings.size(); ++si) {
        const InputSetting setting = report.entries[0].settings[si];
        float best = 0.0f;
        for (const auto& e : report.entries) {
            if (si < e.ratio.size()) best = std::max(best, e.ratio[si]);
        }
        std::vector<NormKind> winners;
        for (const auto& e : report.entries) {
            if (si < e.ratio.size() && e.ratio[si] == best) winners.push_back(e.p);
        }
        report.settings.push_back(setting);
        report.best_p.push_back(std::move(winners));
    }
    return report;
}

Tensor activation_grid(const ModelParams& params, const Tensor& image) {
    const Tensor maps = forward(params, image).final_conv_maps;
    const int c = maps.shape[0], mh = maps.shape[1], mw = maps.shape[2];
    const int rows = 4, cols = 8;

    Tensor grid = Tensor::full({rows * mh + (rows - 1), cols * mw + (cols - 1)}, 1.0f);
    for (int ci = 0; ci < c; ++ci) {
        float mx = 0.0f;
        for (int y = 0; y < mh; ++y) {
            for (int x = 0; x < mw; ++x) mx = std::max(mx, maps.at(ci, y, x));
        }
        const int gy = (ci / cols) * (mh + 1);
        const int gx = (ci % cols) * (mw + 1);
        for (int y = 0; y < mh; ++y) {
            for (int x = 0; x < mw; ++x) {
                const float v = maps.at(ci, y, x);
                grid.at(gy + y, gx + x) = mx > 0.0f ? v / mx : 0.0f;
            }
        }
    }
    return grid;
}

void save_histograms_csv(const std::vector<ActivationStats>& stats,
                         const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("histogram csv: cannot open " + path.string() + " for writing");
    }
    f << "p,setting,bin_left,bin_right,count\n";
    char buf[96];
    for (const auto& st : stats) {
        for (std::size_t i = 0; i < st.histogram.counts.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.9g,%.9g,%lld\n", to_string(st.p),
                          to_string(st.setting), static_cast<double>(st.histogram.bin_edges[i]),
                          static_cast<double>(st.histogram.bin_edges[i + 1]),
                          static_cast<long long>(st.histogram.counts[i]));
            f << buf;
        }
    }
}

std::string separation_report_json(const SeparationReport& report) {
    nlohmann::ordered_json j;
    j["channel_count"] = report.channel_count;
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const auto& e : report.entries) {
        nlohmann::ordered_json je;
        je["p"] = to_string(e.p);
        je["max_clean"] = e.max_clean;
        nlohmann::ordered_json per_setting = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < e.settings.size(); ++i) {
            per_setting[to_string(e.settings[i])] = {{"max_triggered", e.max_triggered[i]},
                                                     {"ratio", e.ratio[i]}};
        }
        je["triggered"] = std::move(per_setting);
        entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);

    nlohmann::ordered_json best = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < report.settings.size(); ++i) {
        nlohmann::ordered_json winners = nlohmann::ordered_json::array();
        for (NormKind p : report.best_p[i]) winners.push_back(to_string(p));
        best[to_string(report.settings[i])] = {{"best_p", winners},
                                               {"tie", report.best_p[i].size() > 1}};
    }
    j["largest_ratio"] = std::move(best);
    return j.dump(2) + "\n";
}

void save_separation_report(const SeparationReport& report, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("separation report: cannot open " + path.string() + " for writing");
    }
    f << separation_report_json(report);
}

}  // namespace bdf
