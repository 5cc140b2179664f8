#pragma once

// Independent reference implementations used as test oracles. These stay
// deliberately naive and separate from the library's own kernels.

#include <algorithm>
#include <cmath>
#include <vector>

#include "bdf/rng.hpp"
#include "bdf/tensor.hpp"

namespace oracle {

// Direct six-nested-loop cross-correlation over the zero-padded input,
// accumulating in float in the same documented order (C_in, then kernel
// row, then kernel column) so results must match bit for bit.
inline bdf::Tensor conv2d(const bdf::Tensor& input, const bdf::Tensor& weights,
                          const bdf::Tensor& bias, int stride, int pad) {
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int c_out = weights.shape[0], k = weights.shape[2];
    const int h_out = (h + 2 * pad - k) / stride + 1;
    const int w_out = (w + 2 * pad - k) / stride + 1;

    bdf::Tensor out({c_out, h_out, w_out});
    for (int co = 0; co < c_out; ++co) {
        for (int ho = 0; ho < h_out; ++ho) {
            for (int wo = 0; wo < w_out; ++wo) {
                float acc = bias.at(co);
                for (int ci = 0; ci < c_in; ++ci) {
                    for (int kh = 0; kh < k; ++kh) {
                        for (int kw = 0; kw < k; ++kw) {
                            const int y = ho * stride + kh - pad;
                            const int x = wo * stride + kw - pad;
                            const float pix =
                                (y >= 0 && y < h && x >= 0 && x < w) ? input.at(ci, y, x) : 0.0f;
                            acc += pix * weights.at(co, ci, kh, kw);
                        }
                    }
                }
                out.at(co, ho, wo) = acc;
            }
        }
    }
    return out;
}

// 2x2 stride-2 max pooling by direct scanning, ties to the first value in
// row-major order.
inline bdf::Tensor maxpool2(const bdf::Tensor& x) {
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    bdf::Tensor out({c, h / 2, w / 2});
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < h / 2; ++y) {
            for (int xx = 0; xx < w / 2; ++xx) {
                float best = x.at(ci, 2 * y, 2 * xx);
                best = std::max(best, x.at(ci, 2 * y, 2 * xx + 1));
                best = std::max(best, x.at(ci, 2 * y + 1, 2 * xx));
                best = std::max(best, x.at(ci, 2 * y + 1, 2 * xx + 1));
                out.at(ci, y, xx) = best;
            }
        }
    }
    return out;
}

// Uniform values in +-[lo, hi]: magnitudes bounded away from zero keep
// finite-difference quotients well conditioned.
inline bdf::Tensor random_signed(std::vector<int> shape, bdf::Rng& rng, float lo = 0.25f,
                                 float hi = 1.25f) {
    bdf::Tensor t(std::move(shape));
    for (auto& v : t.data) {
        const float mag = rng.uniform(lo, hi);
        v = rng.uniform() < 0.5f ? -mag : mag;
    }
    return t;
}

inline bdf::Tensor random_unit(std::vector<int> shape, bdf::Rng& rng) {
    bdf::Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform();
    return t;
}

// Uniform values in [lo, hi]. Positive operands keep the gradients of the
// linear layers away from cancellation, which the f32 forward could not
// resolve at the fixed difference step.
inline bdf::Tensor random_positive(std::vector<int> shape, bdf::Rng& rng, float lo = 0.25f,
                                   float hi = 1.25f) {
    bdf::Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Scalar projection sum(R . y) in double; pairs with d_output = R.
inline double project(const bdf::Tensor& y, const bdf::Tensor& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += static_cast<double>(y.data[i]) * static_cast<double>(r.data[i]);
    }
    return s;
}

// Reference softmax cross-entropy evaluated in double so the central
// difference resolves small gradient entries.
inline double xent(const bdf::Tensor& logits, int label) {
    double mx = logits.data[0];
    for (float v : logits.data) mx = std::max(mx, static_cast<double>(v));
    double sum = 0.0;
    for (float v : logits.data) sum += std::exp(static_cast<double>(v) - mx);
    return std::log(sum) - (static_cast<double>(logits.data[static_cast<std::size_t>(label)]) - mx);
}

}  // namespace oracle
