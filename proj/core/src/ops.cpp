#include "bdf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bdf/errors.hpp"

namespace bdf {

namespace {

void require_rank(const Tensor& t, int rank, const char* name) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(name) + " must have rank " + std::to_string(rank) +
                             ", got shape " + shape_str(t.shape));
    }
}

struct ConvDims {
    int c_in, h, w, c_out, k, h_out, w_out;
};

ConvDims conv_dims(const Tensor& input, const Tensor& weights, int stride, int pad) {
    require_rank(input, 3, "conv2d input");
    require_rank(weights, 4, "conv2d weights");
    ConvDims d{};
    d.c_in = input.shape[0];
    d.h = input.shape[1];
    d.w = input.shape[2];
    d.c_out = weights.shape[0];
    d.k = weights.shape[2];
    if (weights.shape[1] != d.c_in) {
        throw DimensionError("conv2d: weights axis 1 (" + std::to_string(weights.shape[1]) +
                             ") != input channels (" + std::to_string(d.c_in) + ")");
    }
    if (weights.shape[3] != d.k) {
        throw DimensionError("conv2d: kernel not square, shape " + shape_str(weights.shape));
    }
    if (d.k % 2 == 0) {
        throw DimensionError("conv2d: kernel size " + std::to_string(d.k) + " must be odd");
    }
    if (stride < 1 || pad < 0) {
        throw DimensionError("conv2d: stride must be >=1 and pad >=0");
    }
    const int hn = d.h + 2 * pad - d.k;
    const int wn = d.w + 2 * pad - d.k;
    if (hn < 0 || wn < 0 || hn % stride != 0 || wn % stride != 0) {
        throw DimensionError("conv2d: input " + shape_str(input.shape) + " with k=" +
                             std::to_string(d.k) + " stride=" + std::to_string(stride) +
                             " pad=" + std::to_string(pad) + " has no integral output size");
    }
    d.h_out = hn / stride + 1;
    d.w_out = wn / stride + 1;
    return d;
}

/// Zero-padded copy of a [C,H,W] tensor.
Tensor pad_input(const Tensor& input, int pad) {
    if (pad == 0) return input;
    const int c = input.shape[0], h = input.shape[1], w = input.shape[2];
    Tensor out({c, h + 2 * pad, w + 2 * pad});
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < h; ++y) {
            const float* src = &input.data[static_cast<std::size_t>((ci * h + y) * w)];
            float* dst = &out.at(ci, y + pad, pad);
            std::copy(src, src + w, dst);
        }
    }
    return out;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
                      int pad) {
    const ConvDims d = conv_dims(input, weights, stride, pad);
    require_rank(bias, 1, "conv2d bias");
    if (bias.shape[0] != d.c_out) {
        throw DimensionError("conv2d: bias length " + std::to_string(bias.shape[0]) +
                             " != output channels " + std::to_string(d.c_out));
    }

    const Tensor padded = pad_input(input, pad);
    const int hp = padded.shape[1], wp = padded.shape[2];
    Tensor out({d.c_out, d.h_out, d.w_out});

    for (int co = 0; co < d.c_out; ++co) {
        for (int ho = 0; ho < d.h_out; ++ho) {
            for (int wo = 0; wo < d.w_out; ++wo) {
                float acc = bias.at(co);
                for (int ci = 0; ci < d.c_in; ++ci) {
                    const float* in_plane =
                        &padded.data[static_cast<std::size_t>(ci) * hp * wp];
                    const float* w_plane =
                        &weights.data[static_cast<std::size_t>((co * d.c_in + ci)) * d.k * d.k];
                    for (int kh = 0; kh < d.k; ++kh) {
                        const float* in_row = in_plane + (ho * stride + kh) * wp + wo * stride;
                        const float* w_row = w_plane + kh * d.k;
                        for (int kw = 0; kw < d.k; ++kw) {
                            acc += in_row[kw] * w_row[kw];
                        }
                    }
                }
                out.at(co, ho, wo) = acc;
            }
        }
    }
    ensure_finite(out, "conv2d_forward");
    return out;
}

LayerGrads conv2d_backward(const Tensor& input, const Tensor& weights, int stride, int pad,
                           const Tensor& d_output) {
    const ConvDims d = conv_dims(input, weights, stride, pad);
    if (d_output.shape != std::vector<int>{d.c_out, d.h_out, d.w_out}) {
        throw DimensionError("conv2d_backward: d_output " + shape_str(d_output.shape) +
                             " != forward output [" + std::to_string(d.c_out) + "," +
                             std::to_string(d.h_out) + "," + std::to_string(d.w_out) + "]");
    }

    const Tensor padded = pad_input(input, pad);
    const int hp = padded.shape[1], wp = padded.shape[2];
    Tensor d_padded({d.c_in, hp, wp});
    Tensor d_weights(weights.shape);
    Tensor d_bias({d.c_out});

    for (int co = 0; co < d.c_out; ++co) {
        for (int ho = 0; ho < d.h_out; ++ho) {
            for (int wo = 0; wo < d.w_out; ++wo) {
                const float g = d_output.at(co, ho, wo);
                d_bias.at(co) += g;
                if (g == 0.0f) continue;
                for (int ci = 0; ci < d.c_in; ++ci) {
                    for (int kh = 0; kh < d.k; ++kh) {
                        const int y = ho * stride + kh;
                        const std::size_t row_at =
                            static_cast<std::size_t>((ci * hp + y) * wp + wo * stride);
                        const std::size_t w_at =
                            static_cast<std::size_t>(((co * d.c_in + ci) * d.k + kh) * d.k);
                        float* dp_row = &d_padded.data[row_at];
                        const float* p_row = &padded.data[row_at];
                        float* dw_row = &d_weights.data[w_at];
                        const float* w_row = &weights.data[w_at];
                        for (int kw = 0; kw < d.k; ++kw) {
                            dp_row[kw] += w_row[kw] * g;
                            dw_row[kw] += p_row[kw] * g;
                        }
                    }
                }
            }
        }
    }

    LayerGrads grads;
    grads.d_weights = std::move(d_weights);
    grads.d_bias = std::move(d_bias);
    if (pad == 0) {
        grads.d_input = std::move(d_padded);
    } else {
        Tensor d_input(input.shape);
        for (int ci = 0; ci < d.c_in; ++ci) {
            for (int y = 0; y < d.h; ++y) {
                const float* src = &d_padded.at(ci, y + pad, pad);
                float* dst = &d_input.at(ci, y, 0);
                std::copy(src, src + d.w, dst);
            }
        }
        grads.d_input = std::move(d_input);
    }
    return grads;
}

Tensor relu_forward(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.data[i] = x.data[i] > 0.0f ? x.data[i] : 0.0f;
    }
    return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& d_out) {
    if (!x.same_shape(d_out)) {
        throw DimensionError("relu_backward: x " + shape_str(x.shape) + " != d_out " +
                             shape_str(d_out.shape));
    }
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.data[i] = x.data[i] > 0.0f ? d_out.data[i] : 0.0f;
    }
    return out;
}

PoolResult maxpool2_forward(const Tensor& x) {
    require_rank(x, 3, "maxpool2 input");
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    if (h % 2 != 0 || w % 2 != 0) {
        throw DimensionError("maxpool2: spatial dims of " + shape_str(x.shape) +
                             " must be even");
    }
    PoolResult r;
    r.output = Tensor({c, h / 2, w / 2});
    r.argmax.resize(r.output.size());
    std::size_t o = 0;
    for (int ci = 0; ci < c; ++ci) {
        for (int ho = 0; ho < h / 2; ++ho) {
            for (int wo = 0; wo < w / 2; ++wo) {
                float best = x.at(ci, 2 * ho, 2 * wo);
                int best_idx = (ci * h + 2 * ho) * w + 2 * wo;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const float v = x.at(ci, 2 * ho + dy, 2 * wo + dx);
                        if (v > best) {  // strict: ties keep the first scan-order index
                            best = v;
                            best_idx = (ci * h + 2 * ho + dy) * w + 2 * wo + dx;
                        }
                    }
                }
                r.output.data[o] = best;
                r.argmax[o] = best_idx;
                ++o;
            }
        }
    }
    return r;
}

Tensor maxpool2_backward(const std::vector<int>& argmax, const Tensor& d_out,
                         const std::vector<int>& input_shape) {
    if (argmax.size() != d_out.size()) {
        throw DimensionError("maxpool2_backward: argmax size " + std::to_string(argmax.size()) +
                             " != d_out size " + std::to_string(d_out.size()));
    }
    Tensor d_in(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) {
        d_in.data[static_cast<std::size_t>(argmax[i])] += d_out.data[i];
    }
    return d_in;
}

Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
    require_rank(W, 2, "dense weights");
    require_rank(b, 1, "dense bias");
    const int out_n = W.shape[0], in_n = W.shape[1];
    if (static_cast<int>(x.size()) != in_n) {
        throw DimensionError("dense: input " + shape_str(x.shape) + " has " +
                             std::to_string(x.size()) + " elements, weights expect " +
                             std::to_string(in_n));
    }
    if (b.shape[0] != out_n) {
        throw DimensionError("dense: bias length " + std::to_string(b.shape[0]) +
                             " != output size " + std::to_string(out_n));
    }
    Tensor y({out_n});
    for (int o = 0; o < out_n; ++o) {
        float acc = b.at(o);
        const float* w_row = &W.data[static_cast<std::size_t>(o) * in_n];
        for (int i = 0; i < in_n; ++i) {
            acc += w_row[i] * x.data[static_cast<std::size_t>(i)];
        }
        y.at(o) = acc;
    }
    ensure_finite(y, "dense_forward");
    return y;
}

LayerGrads dense_backward(const Tensor& x, const Tensor& W, const Tensor& d_out) {
    require_rank(W, 2, "dense weights");
    const int out_n = W.shape[0], in_n = W.shape[1];
    if (static_cast<int>(x.size()) != in_n) {
        throw DimensionError("dense_backward: input has " + std::to_string(x.size()) +
                             " elements, weights expect " + std::to_string(in_n));
    }
    if (static_cast<int>(d_out.size()) != out_n) {
        throw DimensionError("dense_backward: d_out has " + std::to_string(d_out.size()) +
                             " elements, weights produce " + std::to_string(out_n));
    }
    LayerGrads g;
    g.d_input = Tensor(x.shape);
    g.d_weights = Tensor(W.shape);
    g.d_bias = Tensor({out_n});
    for (int o = 0; o < out_n; ++o) {
        const float go = d_out.data[static_cast<std::size_t>(o)];
        g.d_bias.at(o) = go;
        const float* w_row = &W.data[static_cast<std::size_t>(o) * in_n];
        float* dw_row = &g.d_weights.data[static_cast<std::size_t>(o) * in_n];
        for (int i = 0; i < in_n; ++i) {
            dw_row[i] = x.data[static_cast<std::size_t>(i)] * go;
            g.d_input.data[static_cast<std::size_t>(i)] += w_row[i] * go;
        }
    }
    return g;
}

XentResult softmax_xent(const Tensor& logits, int label) {
    const int n = static_cast<int>(logits.size());
    if (label < 0 || label >= n) {
        throw DomainError("softmax_xent: label " + std::to_string(label) +
                          " outside [0," + std::to_string(n) + ")");
    }
    float mx = logits.data[0];
    for (float v : logits.data) mx = std::max(mx, v);

    XentResult r;
    r.d_logits = Tensor({n});
    float sum = 0.0f;
    for (int i = 0; i < n; ++i) {
        const float e = std::exp(logits.data[static_cast<std::size_t>(i)] - mx);
        r.d_logits.data[static_cast<std::size_t>(i)] = e;
        sum += e;
    }
    for (int i = 0; i < n; ++i) {
        r.d_logits.data[static_cast<std::size_t>(i)] /= sum;
    }
    r.loss = std::log(sum) - (logits.data[static_cast<std::size_t>(label)] - mx);
    r.d_logits.data[static_cast<std::size_t>(label)] -= 1.0f;
    ensure_finite(r.d_logits, "softmax_xent");
    if (!std::isfinite(r.loss)) {
        throw NumericError("softmax_xent produced a non-finite loss");
    }
    return r;
}

float finite_diff_check(const std::function<double(const Tensor&)>& forward_fn,
                        const Tensor& analytic_grad, const Tensor& point, float step) {
    if (!analytic_grad.same_shape(point)) {
        throw DimensionError("finite_diff_check: gradient " + shape_str(analytic_grad.shape) +
                             " != point " + shape_str(point.shape));
    }
    Tensor probe = point;
    double worst = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const float orig = probe.data[i];
        probe.data[i] = orig + step;
        const double up = forward_fn(probe);
        probe.data[i] = orig - step;
        const double down = forward_fn(probe);
        probe.data[i] = orig;
        const double numeric = (up - down) / (2.0 * static_cast<double>(step));
        const double analytic = static_cast<double>(analytic_grad.data[i]);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return static_cast<float>(worst);
}

}  // namespace bdf
