#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "bdf/tensor.hpp"

namespace bdf {

inline constexpr int kFinalConvChannels = 32;

struct ConvLayer {
    Tensor w;  // [C_out, C_in, 3, 3]
    Tensor b;  // [C_out]
};

struct DenseLayer {
    Tensor w;  // [out, in]
    Tensor b;  // [out]
};

/// The fixed architecture: three 3x3 pad-1 conv blocks (8, 16, 32 channels,
/// 2x2 max pool after the first two) into one dense layer. conv3 is the
/// final convolutional layer; its 32 output channels carry a prune mask.
///
/// Immutable during inference; concurrent forward/backward over the same
/// params is safe.
struct ModelParams {
    int num_classes = 0;
    std::array<int, 3> input_shape{};  // C, H, W; H and W divisible by 4
    ConvLayer conv1, conv2, conv3;
    DenseLayer fc;
    std::vector<std::uint8_t> prune_mask;  // 32 entries of 0/1, all 1 initially

    /// Fresh parameters: weights seeded uniform in +-sqrt(6/(fan_in+fan_out)),
    /// biases zero, mask all true. H and W must be divisible by 4.
    static ModelParams init(int num_classes, int c, int h, int w, std::uint64_t seed);

    int final_map_h() const { return input_shape[1] / 4; }
    int final_map_w() const { return input_shape[2] / 4; }
};

/// Everything forward produces plus the caches backward needs.
struct ForwardTrace {
    Tensor logits;           // [num_classes]
    Tensor final_conv_maps;  // [32, H/4, W/4], post-ReLU, post-mask

    Tensor input;
    Tensor pre1, pre2, pre3;  // conv outputs before ReLU
    Tensor relu1, relu2;      // pool inputs
    Tensor pool1, pool2;
    std::vector<int> argmax1, argmax2;
};

struct ParamGrads {
    ConvLayer conv1, conv2, conv3;
    DenseLayer fc;
};

/// conv1 -> ReLU -> pool -> conv2 -> ReLU -> pool -> conv3 -> ReLU -> mask
/// -> flatten -> fc. Pixel values are expected in [0,1].
ForwardTrace forward(const ModelParams& params, const Tensor& image);

/// Gradients of the scalar d_logits . logits with respect to every
/// parameter. Masked conv3 channels receive zero weight gradients.
ParamGrads backward_params(const ModelParams& params, const ForwardTrace& trace,
                           const Tensor& d_logits);

/// Gradient with respect to final_conv_maps (post-mask). [32, H/4, W/4].
Tensor backward_to_final_conv(const ModelParams& params, const ForwardTrace& trace,
                              const Tensor& d_logits);

/// Gradient with respect to the input image. [C, H, W].
Tensor backward_to_input(const ModelParams& params, const ForwardTrace& trace,
                         const Tensor& d_logits);

/// Binary model file, magic "BDF1" version 1, little-endian, CRC32 trailer.
void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace bdf
