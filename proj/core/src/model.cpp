#include "bdf/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "bdf/checksum.hpp"
#include "bdf/errors.hpp"
#include "bdf/ops.hpp"
#include "bdf/rng.hpp"

namespace bdf {

namespace {

Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

void check_image(const ModelParams& p, const Tensor& image) {
    const std::vector<int> want{p.input_shape[0], p.input_shape[1], p.input_shape[2]};
    if (image.shape != want) {
        throw DimensionError("model forward: image " + shape_str(image.shape) +
                             " != expected " + shape_str(want));
    }
}

Tensor masked(const Tensor& maps, const std::vector<std::uint8_t>& mask) {
    Tensor out = maps;
    const int hw = maps.shape[1] * maps.shape[2];
    for (int c = 0; c < maps.shape[0]; ++c) {
        if (!mask[static_cast<std::size_t>(c)]) {
            std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(c) * hw, hw, 0.0f);
        }
    }
    return out;
}

/// Shared tail of the three backward entry points: propagates d_logits back
/// to the requested depth. Returns d with respect to final_conv_maps, and
/// optionally fills param grads / d_input along the way.
struct BackwardResult {
    Tensor d_final;  // wrt final_conv_maps (post-mask)
    Tensor d_input;
    ParamGrads grads;
};

BackwardResult run_backward(const ModelParams& p, const ForwardTrace& t, const Tensor& d_logits,
                            bool want_params, bool want_input) {
    if (static_cast<int>(d_logits.size()) != p.num_classes) {
        throw DimensionError("backward: d_logits has " + std::to_string(d_logits.size()) +
                             " elements, model has " + std::to_string(p.num_classes) +
                             " classes");
    }
    BackwardResult r;

    Tensor flat({static_cast<int>(t.final_conv_maps.size())});
    flat.data = t.final_conv_maps.data;
    LayerGrads fc_g = dense_backward(flat, p.fc.w, d_logits);
    r.d_final = Tensor(t.final_conv_maps.shape, std::move(fc_g.d_input.data));
    if (want_params) {
        r.grads.fc.w = std::move(fc_g.d_weights);
        r.grads.fc.b = std::move(fc_g.d_bias);
    }
    if (!want_params && !want_input) return r;

    // Masked channels contribute nothing downstream, so their gradients stay
    // zero through the whole chain.
    Tensor d_relu3 = masked(r.d_final, p.prune_mask);
    Tensor d_pre3 = relu_backward(t.pre3, d_relu3);
    LayerGrads g3 = conv2d_backward(t.pool2, p.conv3.w, 1, 1, d_pre3);
    if (want_params) {
        r.grads.conv3.w = std::move(g3.d_weights);
        r.grads.conv3.b = std::move(g3.d_bias);
    }

    Tensor d_pool2 = std::move(g3.d_input);
    Tensor d_relu2 = maxpool2_backward(t.argmax2, d_pool2, t.relu2.shape);
    Tensor d_pre2 = relu_backward(t.pre2, d_relu2);
    LayerGrads g2 = conv2d_backward(t.pool1, p.conv2.w, 1, 1, d_pre2);
    if (want_params) {
        r.grads.conv2.w = std::move(g2.d_weights);
        r.grads.conv2.b = std::move(g2.d_bias);
    }

    Tensor d_pool1 = std::move(g2.d_input);
    Tensor d_relu1 = maxpool2_backward(t.argmax1, d_pool1, t.relu1.shape);
    Tensor d_pre1 = relu_backward(t.pre1, d_relu1);
    LayerGrads g1 = conv2d_backward(t.input, p.conv1.w, 1, 1, d_pre1);
    if (want_params) {
        r.grads.conv1.w = std::move(g1.d_weights);
        r.grads.conv1.b = std::move(g1.d_bias);
    }
    if (want_input) {
        r.d_input = std::move(g1.d_input);
    }
    return r;
}

}  // namespace

ModelParams ModelParams::init(int num_classes, int c, int h, int w, std::uint64_t seed) {
    if (num_classes < 1) {
        throw ConfigError("model init: num_classes must be positive");
    }
    if (c < 1 || h < 4 || w < 4 || h % 4 != 0 || w % 4 != 0) {
        throw ConfigError("model init: input " + std::to_string(c) + "x" + std::to_string(h) +
                          "x" + std::to_string(w) + " needs H and W divisible by 4");
    }
    ModelParams p;
    p.num_classes = num_classes;
    p.input_shape = {c, h, w};

    Rng rng(seed);
    p.conv1.w = glorot_uniform({8, c, 3, 3}, c * 9, 8 * 9, rng);
    p.conv1.b = Tensor({8});
    p.conv2.w = glorot_uniform({16, 8, 3, 3}, 8 * 9, 16 * 9, rng);
    p.conv2.b = Tensor({16});
    p.conv3.w = glorot_uniform({kFinalConvChannels, 16, 3, 3}, 16 * 9, kFinalConvChannels * 9, rng);
    p.conv3.b = Tensor({kFinalConvChannels});
    const int flat = kFinalConvChannels * (h / 4) * (w / 4);
    p.fc.w = glorot_uniform({num_classes, flat}, flat, num_classes, rng);
    p.fc.b = Tensor({num_classes});
    p.prune_mask.assign(kFinalConvChannels, 1);
    return p;
}

ForwardTrace forward(const ModelParams& p, const Tensor& image) {
    check_image(p, image);
    ForwardTrace t;
    t.input = image;

    t.pre1 = conv2d_forward(t.input, p.conv1.w, p.conv1.b, 1, 1);
    t.relu1 = relu_forward(t.pre1);
    PoolResult p1 = maxpool2_forward(t.relu1);
    t.pool1 = std::move(p1.output);
    t.argmax1 = std::move(p1.argmax);

    t.pre2 = conv2d_forward(t.pool1, p.conv2.w, p.conv2.b, 1, 1);
    t.relu2 = relu_forward(t.pre2);
    PoolResult p2 = maxpool2_forward(t.relu2);
    t.pool2 = std::move(p2.output);
    t.argmax2 = std::move(p2.argmax);

    t.pre3 = conv2d_forward(t.pool2, p.conv3.w, p.conv3.b, 1, 1);
    t.final_conv_maps = masked(relu_forward(t.pre3), p.prune_mask);

    Tensor flat({static_cast<int>(t.final_conv_maps.size())});
    flat.data = t.final_conv_maps.data;
    t.logits = dense_forward(flat, p.fc.w, p.fc.b);
    return t;
}

ParamGrads backward_params(const ModelParams& p, const ForwardTrace& t, const Tensor& d_logits) {
    return run_backward(p, t, d_logits, true, false).grads;
}

Tensor backward_to_final_conv(const ModelParams& p, const ForwardTrace& t,
                              const Tensor& d_logits) {
    return run_backward(p, t, d_logits, false, false).d_final;
}

Tensor backward_to_input(const ModelParams& p, const ForwardTrace& t, const Tensor& d_logits) {
    return run_backward(p, t, d_logits, false, true).d_input;
}

// --- model file ---
//
// offset 0: magic "BDF1"
// offset 4: version byte 1
// then little-endian u32 num_classes, C, H, W
// then each layer in order conv1.w conv1.b conv2.w conv2.b conv3.w conv3.b
//   fc.w fc.b as u32 rank, u32 dims..., raw f32 little-endian data
// then 32 bytes of 0/1 prune mask
// then u32 CRC32 of all preceding bytes

namespace {

constexpr char kMagic[4] = {'B', 'D', 'F', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_tensor(std::string& out, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    static_assert(sizeof(float) == 4);
    const std::size_t base = out.size();
    out.resize(base + t.size() * 4);
    std::memcpy(out.data() + base, t.data.data(), t.size() * 4);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size()) {
            throw FormatError("model file: truncated " + std::string(what) + " at byte " +
                              std::to_string(pos));
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)]);
        }
        pos += 4;
        return v;
    }
    Tensor tensor(const char* what, const std::vector<int>& expect_shape) {
        const std::size_t at = pos;
        const std::uint32_t rank = u32(what);
        if (rank != expect_shape.size()) {
            throw FormatError("model file: " + std::string(what) + " rank " +
                              std::to_string(rank) + " != " + std::to_string(expect_shape.size()) +
                              " at byte " + std::to_string(at));
        }
        std::vector<int> shape(rank);
        std::size_t count = 1;
        for (auto& d : shape) {
            d = static_cast<int>(u32(what));
            count *= static_cast<std::size_t>(d);
        }
        if (shape != expect_shape) {
            throw FormatError("model file: " + std::string(what) + " shape " + shape_str(shape) +
                              " != expected " + shape_str(expect_shape) + " at byte " +
                              std::to_string(at));
        }
        need(count * 4, what);
        Tensor t(shape);
        std::memcpy(t.data.data(), buf.data() + pos, count * 4);
        pos += count * 4;
        return t;
    }
};

}  // namespace

void save_model(const ModelParams& p, const std::filesystem::path& path) {
    std::string out;
    out.append(kMagic, 4);
    out.push_back(1);
    put_u32(out, static_cast<std::uint32_t>(p.num_classes));
    put_u32(out, static_cast<std::uint32_t>(p.input_shape[0]));
    put_u32(out, static_cast<std::uint32_t>(p.input_shape[1]));
    put_u32(out, static_cast<std::uint32_t>(p.input_shape[2]));
    put_tensor(out, p.conv1.w);
    put_tensor(out, p.conv1.b);
    put_tensor(out, p.conv2.w);
    put_tensor(out, p.conv2.b);
    put_tensor(out, p.conv3.w);
    put_tensor(out, p.conv3.b);
    put_tensor(out, p.fc.w);
    put_tensor(out, p.fc.b);
    for (std::uint8_t m : p.prune_mask) out.push_back(static_cast<char>(m ? 1 : 0));
    put_u32(out, crc32_bytes(out.data(), out.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw FormatError("model file: cannot open " + path.string() + " for writing");
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw FormatError("model file: short write to " + path.string());
    }
}

ModelParams load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw FormatError("model file: cannot open " + path.string());
    }
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r{buf};
    r.need(5, "header");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw FormatError("model file: bad magic at byte 0");
    }
    r.pos = 4;
    if (buf[4] != 1) {
        throw FormatError("model file: unsupported version at byte 4");
    }
    r.pos = 5;

    ModelParams p;
    p.num_classes = static_cast<int>(r.u32("num_classes"));
    const int c = static_cast<int>(r.u32("C"));
    const int h = static_cast<int>(r.u32("H"));
    const int w = static_cast<int>(r.u32("W"));
    if (p.num_classes < 1 || c < 1 || h < 4 || w < 4 || h % 4 != 0 || w % 4 != 0) {
        throw FormatError("model file: implausible header dimensions at byte 5");
    }
    p.input_shape = {c, h, w};

    const int flat = kFinalConvChannels * (h / 4) * (w / 4);
    p.conv1.w = r.tensor("conv1.w", {8, c, 3, 3});
    p.conv1.b = r.tensor("conv1.b", {8});
    p.conv2.w = r.tensor("conv2.w", {16, 8, 3, 3});
    p.conv2.b = r.tensor("conv2.b", {16});
    p.conv3.w = r.tensor("conv3.w", {kFinalConvChannels, 16, 3, 3});
    p.conv3.b = r.tensor("conv3.b", {kFinalConvChannels});
    p.fc.w = r.tensor("fc.w", {p.num_classes, flat});
    p.fc.b = r.tensor("fc.b", {p.num_classes});

    r.need(kFinalConvChannels, "prune mask");
    p.prune_mask.resize(kFinalConvChannels);
    for (int i = 0; i < kFinalConvChannels; ++i) {
        const char m = buf[r.pos + static_cast<std::size_t>(i)];
        if (m != 0 && m != 1) {
            throw FormatError("model file: prune mask byte not 0/1 at byte " +
                              std::to_string(r.pos + static_cast<std::size_t>(i)));
        }
        p.prune_mask[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(m);
    }
    r.pos += kFinalConvChannels;

    const std::size_t crc_at = r.pos;
    const std::uint32_t stored = r.u32("crc32");
    if (r.pos != buf.size()) {
        throw FormatError("model file: trailing bytes at byte " + std::to_string(r.pos));
    }
    const std::uint32_t actual = crc32_bytes(buf.data(), crc_at);
    if (stored != actual) {
        throw FormatError("model file: CRC mismatch at byte " + std::to_string(crc_at));
    }
    return p;
}

}  // namespace bdf
