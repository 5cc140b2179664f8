#include "bdf/gradcam.hpp"

#include <algorithm>

#include "bdf/errors.hpp"
#include "bdf/image_io.hpp"

namespace bdf {

Heatmap grad_cam(const ModelParams& params, const Tensor& image, int label,
                 InputSetting setting) {
    if (label < 0 || label >= params.num_classes) {
        throw DomainError("grad_cam: label " + std::to_string(label) + " outside [0," +
                          std::to_string(params.num_classes) + ")");
    }

    const ForwardTrace trace = forward(params, image);
    Tensor d_logits({params.num_classes});
    d_logits.at(label) = 1.0f;
    const Tensor grads = backward_to_final_conv(params, trace, d_logits);

    const int channels = grads.shape[0], mh = grads.shape[1], mw = grads.shape[2];
    const float inv_area = 1.0f / static_cast<float>(mh * mw);

    // alpha_k: spatial mean of the gradient per channel.
    std::vector<float> alpha(static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c) {
        float s = 0.0f;
        for (int y = 0; y < mh; ++y) {
            for (int x = 0; x < mw; ++x) s += grads.at(c, y, x);
        }
        alpha[static_cast<std::size_t>(c)] = s * inv_area;
    }

    Tensor raw({mh, mw});
    for (int y = 0; y < mh; ++y) {
        for (int x = 0; x < mw; ++x) {
            float s = 0.0f;
            for (int c = 0; c < channels; ++c) {
                s += alpha[static_cast<std::size_t>(c)] * trace.final_conv_maps.at(c, y, x);
            }
            raw.at(y, x) = s > 0.0f ? s : 0.0f;
        }
    }

    const int h = params.input_shape[1], w = params.input_shape[2];
    const int fy = h / mh, fx = w / mw;
    Heatmap hm;
    hm.label_used = label;
    hm.input_setting = setting;
    hm.values = Tensor({h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            hm.values.at(y, x) = raw.at(y / fy, x / fx);
        }
    }

    float mx = 0.0f;
    for (float v : hm.values.data) mx = std::max(mx, v);
    if (mx > 0.0f) {
        for (float& v : hm.values.data) v /= mx;
    }
    return hm;
}

double localization_score(const Heatmap& heatmap, const Tensor& trigger_mask, int dilation) {
    if (trigger_mask.shape != heatmap.values.shape) {
        throw DimensionError("localization_score: mask " + shape_str(trigger_mask.shape) +
                             " != heatmap " + shape_str(heatmap.values.shape));
    }
    const int h = trigger_mask.shape[0], w = trigger_mask.shape[1];

    int top = h, left = w, bottom = -1, right = -1;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (trigger_mask.at(y, x) > 0.0f) {
                top = std::min(top, y);
                left = std::min(left, x);
                bottom = std::max(bottom, y);
                right = std::max(right, x);
            }
        }
    }
    if (bottom < 0) return 0.0;  // empty mask has no box
    top = std::max(0, top - dilation);
    left = std::max(0, left - dilation);
    bottom = std::min(h - 1, bottom + dilation);
    right = std::min(w - 1, right + dilation);

    double inside = 0.0, total = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = static_cast<double>(heatmap.values.at(y, x));
            total += v;
            if (y >= top && y <= bottom && x >= left && x <= right) inside += v;
        }
    }
    if (total <= 0.0) return 0.0;
    return inside / total;
}

void save_heatmap_ppm(const Heatmap& heatmap, const std::filesystem::path& path) {
    save_jet_ppm(heatmap.values, path);
}

void save_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path) {
    save_matrix_csv(heatmap.values, path);
}

void save_heatmap_overlay(const Heatmap& heatmap, const Tensor& image,
                          const std::filesystem::path& path) {
    save_overlay_ppm(heatmap.values, image, path);
}

}  // namespace bdf
