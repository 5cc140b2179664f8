#pragma once

// Double-precision reference of the fixed architecture, used as the
// finite-difference oracle for the whole-model backward paths. The f32
// analytic gradients are compared against central differences of this
// function; at double precision the difference quotient resolves even
// small gradients that f32 forward evaluations cannot.

#include <algorithm>
#include <vector>

#include "bdf/model.hpp"
#include "bdf/tensor.hpp"

namespace oracle {

struct ModelF64 {
    int num_classes, c, h, w;
    std::vector<double> w1, b1, w2, b2, w3, b3, fw, fb;
    std::vector<std::uint8_t> mask;

    static std::vector<double> widen(const bdf::Tensor& t) {
        return {t.data.begin(), t.data.end()};
    }

    explicit ModelF64(const bdf::ModelParams& p)
        : num_classes(p.num_classes),
          c(p.input_shape[0]),
          h(p.input_shape[1]),
          w(p.input_shape[2]),
          w1(widen(p.conv1.w)),
          b1(widen(p.conv1.b)),
          w2(widen(p.conv2.w)),
          b2(widen(p.conv2.b)),
          w3(widen(p.conv3.w)),
          b3(widen(p.conv3.b)),
          fw(widen(p.fc.w)),
          fb(widen(p.fc.b)),
          mask(p.prune_mask) {}

    // conv 3x3 pad 1 + relu, plain loops.
    static std::vector<double> conv_relu(const std::vector<double>& in, int ci_n, int hh, int ww,
                                         const std::vector<double>& kw,
                                         const std::vector<double>& kb, int co_n) {
        std::vector<double> out(static_cast<std::size_t>(co_n) * hh * ww);
        for (int co = 0; co < co_n; ++co) {
            for (int y = 0; y < hh; ++y) {
                for (int x = 0; x < ww; ++x) {
                    double acc = kb[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < ci_n; ++ci) {
                        for (int ky = 0; ky < 3; ++ky) {
                            for (int kx = 0; kx < 3; ++kx) {
                                const int yy = y + ky - 1, xx = x + kx - 1;
                                if (yy < 0 || yy >= hh || xx < 0 || xx >= ww) continue;
                                acc += in[static_cast<std::size_t>((ci * hh + yy) * ww + xx)] *
                                       kw[static_cast<std::size_t>(((co * ci_n + ci) * 3 + ky) * 3 + kx)];
                            }
                        }
                    }
                    out[static_cast<std::size_t>((co * hh + y) * ww + x)] = acc > 0.0 ? acc : 0.0;
                }
            }
        }
        return out;
    }

    static std::vector<double> pool(const std::vector<double>& in, int cn, int hh, int ww,
                                    std::vector<int>& route) {
        std::vector<double> out(static_cast<std::size_t>(cn) * (hh / 2) * (ww / 2));
        route.clear();
        std::size_t o = 0;
        for (int ci = 0; ci < cn; ++ci) {
            for (int y = 0; y < hh; y += 2) {
                for (int x = 0; x < ww; x += 2) {
                    double best = in[static_cast<std::size_t>((ci * hh + y) * ww + x)];
                    int idx = (ci * hh + y) * ww + x;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const int j = (ci * hh + y + dy) * ww + x + dx;
                            if (in[static_cast<std::size_t>(j)] > best) {
                                best = in[static_cast<std::size_t>(j)];
                                idx = j;
                            }
                        }
                    }
                    out[o++] = best;
                    route.push_back(idx);
                }
            }
        }
        return out;
    }

    // Scalar projection of the logits; `route` records both pool argmax
    // vectors so a caller can detect when a perturbation crossed into a
    // different linear cell (where a difference quotient is meaningless).
    double scalar(const std::vector<double>& image, const std::vector<double>& proj,
                  std::vector<int>& route) const {
        std::vector<int> r1, r2;
        const auto a1 = conv_relu(image, c, h, w, w1, b1, 8);
        const auto p1 = pool(a1, 8, h, w, r1);
        const auto a2 = conv_relu(p1, 8, h / 2, w / 2, w2, b2, 16);
        const auto p2 = pool(a2, 16, h / 2, w / 2, r2);
        auto a3 = conv_relu(p2, 16, h / 4, w / 4, w3, b3, bdf::kFinalConvChannels);
        const int area = (h / 4) * (w / 4);
        for (int ch = 0; ch < bdf::kFinalConvChannels; ++ch) {
            if (!mask[static_cast<std::size_t>(ch)]) {
                std::fill_n(a3.begin() + static_cast<std::ptrdiff_t>(ch) * area, area, 0.0);
            }
        }
        double s = 0.0;
        for (int o = 0; o < num_classes; ++o) {
            double acc = fb[static_cast<std::size_t>(o)];
            for (std::size_t i = 0; i < a3.size(); ++i) {
                acc += fw[static_cast<std::size_t>(o) * a3.size() + i] * a3[i];
            }
            s += acc * proj[static_cast<std::size_t>(o)];
        }
        route = std::move(r1);
        route.insert(route.end(), r2.begin(), r2.end());
        return s;
    }
};

struct ModelFdStats {
    float worst = 0.0f;
    long checked = 0;
    long skipped = 0;  // coordinates whose probes crossed a pool-route cell
};

// Central finite differences of the f64 reference against an f32 analytic
// gradient, coordinate by coordinate. `slot` must point into the oracle's
// own parameter (or image) storage.
inline void model_fd_compare(ModelFdStats& stats, const ModelF64& model,
                             std::vector<double>& slot, const bdf::Tensor& analytic,
                             const std::vector<double>& image, const std::vector<double>& proj,
                             bool slot_is_image, double step = 1e-4) {
    std::vector<int> route_up, route_dn;
    for (std::size_t i = 0; i < slot.size(); ++i) {
        const double orig = slot[i];
        slot[i] = orig + step;
        const double up = model.scalar(slot_is_image ? slot : image, proj, route_up);
        slot[i] = orig - step;
        const double dn = model.scalar(slot_is_image ? slot : image, proj, route_dn);
        slot[i] = orig;
        if (route_up != route_dn) {
            ++stats.skipped;
            continue;
        }
        const double numeric = (up - dn) / (2.0 * step);
        const double a = static_cast<double>(analytic.data[i]);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        stats.worst = std::max(stats.worst, static_cast<float>(std::abs(a - numeric) / denom));
        ++stats.checked;
    }
}

}  // namespace oracle
