#pragma once

#include <functional>
#include <vector>

#include "bdf/tensor.hpp"

namespace bdf {

/// Gradients of one layer. d_weights/d_bias stay empty for parameterless
/// layers.
struct LayerGrads {
    Tensor d_input;
    Tensor d_weights;
    Tensor d_bias;
};

/// 2-D cross-correlation (no kernel flip) plus bias.
///
/// input [C_in,H,W], weights [C_out,C_in,k,k] with k odd, bias [C_out].
/// Output [C_out,H',W'], H' = (H + 2*pad - k)/stride + 1, which must be
/// integral. Each output value accumulates in 32-bit float starting from
/// the bias, summing over C_in, then kernel row, then kernel column, over
/// the zero-padded input. The fixed order makes results bit-reproducible.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
                      int pad);

/// Analytic gradients of conv2d_forward with respect to input, weights and
/// bias, given d_output of the forward output's shape.
LayerGrads conv2d_backward(const Tensor& input, const Tensor& weights, int stride, int pad,
                           const Tensor& d_output);

/// Elementwise max(0, x).
Tensor relu_forward(const Tensor& x);

/// d_out masked to zero where x <= 0.
Tensor relu_backward(const Tensor& x, const Tensor& d_out);

struct PoolResult {
    Tensor output;
    /// Per output cell, the flat index into the input tensor of the max.
    /// Ties go to the first index in row-major scan order.
    std::vector<int> argmax;
};

/// 2x2 stride-2 max pooling over [C,H,W]. H and W must be even.
PoolResult maxpool2_forward(const Tensor& x);

/// Routes each gradient to its recorded argmax cell.
Tensor maxpool2_backward(const std::vector<int>& argmax, const Tensor& d_out,
                         const std::vector<int>& input_shape);

/// y = W x + b with W [out,in], x flattened to length in, b [out].
Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b);

LayerGrads dense_backward(const Tensor& x, const Tensor& W, const Tensor& d_out);

struct XentResult {
    float loss;
    Tensor d_logits;  // softmax(logits) - onehot(label)
};

/// Softmax cross-entropy of a 1-D logits vector against an integer label,
/// stabilized by max subtraction.
XentResult softmax_xent(const Tensor& logits, int label);

/// Max relative error between analytic_grad and central finite differences
/// of forward_fn at point, using the given step. The relative error of a
/// pair (a, n) is |a - n| / max(|a|, |n|, 1e-6).
float finite_diff_check(const std::function<double(const Tensor&)>& forward_fn,
                        const Tensor& analytic_grad, const Tensor& point, float step);

}  // namespace bdf
