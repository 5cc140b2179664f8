#include "bdf/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bdf/errors.hpp"
#include "bdf/rng.hpp"

namespace bdf {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw FormatError("idx file: cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::uint32_t be_u32(const std::string& buf, std::size_t pos, const char* what) {
    if (pos + 4 > buf.size()) {
        throw FormatError("idx file: truncated " + std::string(what) + " at byte " +
                          std::to_string(pos));
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v = (v << 8) | static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)]);
    }
    return v;
}

void put_be_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

// Plain base64, RFC 4648 alphabet with padding.
const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        const std::uint32_t v = (p[i] << 16) | (p[i + 1] << 8) | p[i + 2];
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out.push_back(kB64[v & 63]);
    }
    if (i + 1 == len) {
        const std::uint32_t v = p[i] << 16;
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == len) {
        const std::uint32_t v = (p[i] << 16) | (p[i + 1] << 8);
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

std::vector<unsigned char> b64_decode(const std::string& s) {
    int rev[256];
    std::fill(std::begin(rev), std::end(rev), -1);
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64[i])] = i;

    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : s) {
        if (c == '=') break;
        const int v = rev[static_cast<unsigned char>(c)];
        if (v < 0) {
            throw FormatError("trigger file: invalid base64 character");
        }
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

nlohmann::ordered_json tensor_to_json(const Tensor& t) {
    static_assert(sizeof(float) == 4);
    nlohmann::ordered_json j;
    j["shape"] = t.shape;
    j["data_b64"] = b64_encode(t.data.data(), t.size() * 4);
    return j;
}

Tensor tensor_from_json(const nlohmann::json& j, const char* what) {
    if (!j.contains("shape") || !j.contains("data_b64")) {
        throw FormatError("trigger file: " + std::string(what) + " missing shape or data_b64");
    }
    std::vector<int> shape = j["shape"].get<std::vector<int>>();
    std::vector<unsigned char> raw = b64_decode(j["data_b64"].get<std::string>());
    if (raw.size() % 4 != 0) {
        throw FormatError("trigger file: " + std::string(what) + " payload is not whole floats");
    }
    std::vector<float> data(raw.size() / 4);
    std::memcpy(data.data(), raw.data(), raw.size());
    return Tensor(std::move(shape), std::move(data));  // validates shape/count
}

}  // namespace

const char* to_string(InputSetting s) {
    switch (s) {
        case InputSetting::clean: return "clean";
        case InputSetting::clean_ori: return "clean_ori";
        case InputSetting::clean_syn: return "clean_syn";
        case InputSetting::clean_ori_syn: return "clean_ori_syn";
    }
    return "?";
}

InputSetting setting_from_string(const std::string& s) {
    for (InputSetting v : kAllSettings) {
        if (s == to_string(v)) return v;
    }
    throw ConfigError("unknown input setting '" + s + "'");
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
    const std::string ibuf = read_file(images_path);
    const std::string lbuf = read_file(labels_path);

    if (be_u32(ibuf, 0, "image magic") != kImagesMagic) {
        throw FormatError("idx file " + images_path.string() + ": bad magic at byte 0");
    }
    if (be_u32(lbuf, 0, "label magic") != kLabelsMagic) {
        throw FormatError("idx file " + labels_path.string() + ": bad magic at byte 0");
    }
    const std::uint32_t n = be_u32(ibuf, 4, "image count");
    const std::uint32_t h = be_u32(ibuf, 8, "image rows");
    const std::uint32_t w = be_u32(ibuf, 12, "image cols");
    const std::uint32_t ln = be_u32(lbuf, 4, "label count");
    if (n != ln) {
        throw FormatError("idx files: image count " + std::to_string(n) + " != label count " +
                          std::to_string(ln));
    }
    const std::size_t need_img = 16 + static_cast<std::size_t>(n) * h * w;
    if (ibuf.size() < need_img) {
        throw FormatError("idx file " + images_path.string() + ": truncated pixel data at byte " +
                          std::to_string(ibuf.size()));
    }
    if (lbuf.size() < 8 + n) {
        throw FormatError("idx file " + labels_path.string() + ": truncated labels at byte " +
                          std::to_string(lbuf.size()));
    }

    Dataset ds;
    ds.name = images_path.stem().string();
    ds.images.reserve(n);
    ds.labels.reserve(n);
    int max_label = 0;
    std::size_t pos = 16;
    for (std::uint32_t i = 0; i < n; ++i) {
        Tensor img({1, static_cast<int>(h), static_cast<int>(w)});
        for (std::size_t px = 0; px < static_cast<std::size_t>(h) * w; ++px) {
            img.data[px] = static_cast<float>(static_cast<std::uint8_t>(ibuf[pos + px])) / 255.0f;
        }
        pos += static_cast<std::size_t>(h) * w;
        ds.images.push_back(std::move(img));
        const int label = static_cast<std::uint8_t>(lbuf[8 + i]);
        ds.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
    if (!ds.images.empty() && ds.images[0].shape[0] != 1) {
        throw ConfigError("save_idx: only single-channel datasets are supported");
    }
    const int h = ds.images.empty() ? 0 : ds.images[0].shape[1];
    const int w = ds.images.empty() ? 0 : ds.images[0].shape[2];

    std::string ibuf;
    put_be_u32(ibuf, kImagesMagic);
    put_be_u32(ibuf, static_cast<std::uint32_t>(ds.size()));
    put_be_u32(ibuf, static_cast<std::uint32_t>(h));
    put_be_u32(ibuf, static_cast<std::uint32_t>(w));
    for (const Tensor& img : ds.images) {
        for (float v : img.data) {
            const float clamped = std::clamp(v, 0.0f, 1.0f);
            ibuf.push_back(static_cast<char>(
                static_cast<std::uint8_t>(std::lround(clamped * 255.0f))));
        }
    }

    std::string lbuf;
    put_be_u32(lbuf, kLabelsMagic);
    put_be_u32(lbuf, static_cast<std::uint32_t>(ds.size()));
    for (int label : ds.labels) lbuf.push_back(static_cast<char>(label));

    std::ofstream fi(images_path, std::ios::binary | std::ios::trunc);
    fi.write(ibuf.data(), static_cast<std::streamsize>(ibuf.size()));
    std::ofstream fl(labels_path, std::ios::binary | std::ios::trunc);
    fl.write(lbuf.data(), static_cast<std::streamsize>(lbuf.size()));
    if (!fi || !fl) {
        throw FormatError("save_idx: short write");
    }
}

Dataset gen_synthetic(int num_classes, int per_class, int h, int w, std::uint64_t seed) {
    if (num_classes < 1 || per_class < 0 || h < 8 || w < 8) {
        throw ConfigError("gen_synthetic: need num_classes>=1, per_class>=0, size>=8x8");
    }
    Dataset ds;
    ds.num_classes = num_classes;
    ds.name = "synthetic";
    ds.images.reserve(static_cast<std::size_t>(num_classes) * per_class);
    ds.labels.reserve(ds.images.capacity());

    Rng rng(seed);
    for (int k = 0; k < num_classes; ++k) {
        // Glyph for class k: a thin horizontal bar, a thin vertical bar and
        // optionally the main diagonal, at positions driven by k. Distinct
        // position combinations keep classes separable. Glyphs stay dim and
        // thin so no clean image contains a bright solid patch.
        const int h_pos = k % 5;
        const int v_pos = (k / 5) % 5;
        const bool diag = ((k / 25) % 2) != 0;
        const int bar_r = 3 + (h - 10) * h_pos / 5;
        const int bar_c = 3 + (w - 10) * v_pos / 5;
        const float ink = 0.35f;

        Tensor glyph({1, h, w});
        for (int y = bar_r; y < bar_r + 3; ++y) {
            for (int x = 2; x < w - 2; ++x) glyph.at(0, y, x) = ink;
        }
        for (int y = 2; y < h - 2; ++y) {
            for (int x = bar_c; x < bar_c + 3; ++x) glyph.at(0, y, x) = ink;
        }
        if (diag) {
            for (int y = 0; y < std::min(h, w); ++y) {
                glyph.at(0, y, y) = ink;
                if (y + 1 < w) glyph.at(0, y, y + 1) = ink;
            }
        }

        for (int i = 0; i < per_class; ++i) {
            Tensor img({1, h, w});
            for (std::size_t px = 0; px < img.size(); ++px) {
                const float v = glyph.data[px] + rng.uniform(-0.1f, 0.1f);
                const float clamped = std::clamp(v, 0.0f, 1.0f);
                // Quantize to the u8 grid so IDX round-trips exactly.
                img.data[px] = static_cast<float>(std::lround(clamped * 255.0f)) / 255.0f;
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(k);
        }
    }
    return ds;
}

Tensor stamp(const Tensor& image, const TriggerSpec& trigger) {
    if (image.rank() != 3) {
        throw DimensionError("stamp: image must be [C,H,W], got " + shape_str(image.shape));
    }
    const int c = image.shape[0], h = image.shape[1], w = image.shape[2];
    if (trigger.mask.shape != std::vector<int>{h, w}) {
        throw DimensionError("stamp: mask " + shape_str(trigger.mask.shape) +
                             " != image spatial dims [" + std::to_string(h) + "," +
                             std::to_string(w) + "]");
    }
    const int pc = trigger.pattern.shape.empty() ? 0 : trigger.pattern.shape[0];
    if (trigger.pattern.rank() != 3 || (pc != c && pc != 1) ||
        trigger.pattern.shape[1] != h || trigger.pattern.shape[2] != w) {
        throw DimensionError("stamp: pattern " + shape_str(trigger.pattern.shape) +
                             " incompatible with image " + shape_str(image.shape));
    }

    Tensor out(image.shape);
    for (int ci = 0; ci < c; ++ci) {
        const int pci = pc == 1 ? 0 : ci;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const float m = trigger.mask.at(y, x);
                out.at(ci, y, x) =
                    (1.0f - m) * image.at(ci, y, x) + m * trigger.pattern.at(pci, y, x);
            }
        }
    }
    return out;
}

Tensor apply_setting(const Tensor& image, InputSetting setting, const TriggerSet& triggers) {
    auto need = [&](const std::optional<TriggerSpec>& t, const char* which) -> const TriggerSpec& {
        if (!t) {
            throw ConfigError(std::string("input setting ") + to_string(setting) + " needs the " +
                              which + " trigger");
        }
        return *t;
    };
    switch (setting) {
        case InputSetting::clean:
            return image;
        case InputSetting::clean_ori:
            return stamp(image, need(triggers.original, "original"));
        case InputSetting::clean_syn:
            return stamp(image, need(triggers.synthetic, "synthetic"));
        case InputSetting::clean_ori_syn:
            return stamp(stamp(image, need(triggers.original, "original")),
                         need(triggers.synthetic, "synthetic"));
    }
    throw ConfigError("unknown input setting");
}

TriggerSpec make_original_trigger(int h, int w, int square, int margin, int target) {
    if (square < 0 || margin < 0 || margin + square > h || margin + square > w) {
        throw ConfigError("trigger: square " + std::to_string(square) + " with margin " +
                          std::to_string(margin) + " does not fit in " + std::to_string(h) + "x" +
                          std::to_string(w));
    }
    TriggerSpec t;
    t.mask = Tensor({h, w});
    t.pattern = Tensor({1, h, w});
    t.target_label = target;
    t.provenance = TriggerProvenance::original;
    for (int y = h - margin - square; y < h - margin; ++y) {
        for (int x = w - margin - square; x < w - margin; ++x) {
            t.mask.at(y, x) = 1.0f;
            t.pattern.at(0, y, x) = 1.0f;
        }
    }
    return t;
}

PoisonResult poison(const Dataset& train, const PoisonConfig& cfg) {
    if (!(cfg.poison_rate > 0.0f && cfg.poison_rate < 1.0f)) {
        throw ConfigError("poison: rate must be in (0,1)");
    }
    const int n = static_cast<int>(train.size());
    const int count = static_cast<int>(std::floor(static_cast<double>(cfg.poison_rate) * n));
    if (count < 1) {
        throw ConfigError("poison: rate " + std::to_string(cfg.poison_rate) + " on " +
                          std::to_string(n) + " samples selects no image");
    }

    Rng rng(cfg.rng_seed);
    std::vector<int> picked = rng.sample_indices(n, count);
    std::sort(picked.begin(), picked.end());

    PoisonResult r;
    r.dataset = train;
    r.poisoned_indices = std::move(picked);
    for (int idx : r.poisoned_indices) {
        const auto u = static_cast<std::size_t>(idx);
        r.dataset.images[u] = stamp(r.dataset.images[u], cfg.trigger);
        r.dataset.labels[u] = cfg.trigger.target_label;
    }
    r.dataset.num_classes = std::max(r.dataset.num_classes, cfg.trigger.target_label + 1);
    return r;
}

void save_trigger(const TriggerSpec& trigger, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["mask"] = tensor_to_json(trigger.mask);
    j["pattern"] = tensor_to_json(trigger.pattern);
    j["target_label"] = trigger.target_label;
    j["provenance"] =
        trigger.provenance == TriggerProvenance::original ? "original" : "synthetic";

    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("trigger file: cannot open " + path.string() + " for writing");
    }
    f << j.dump(2) << '\n';
}

TriggerSpec load_trigger(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw FormatError("trigger file: cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("trigger file " + path.string() + ": " + e.what());
    }
    TriggerSpec t;
    t.mask = tensor_from_json(j.at("mask"), "mask");
    t.pattern = tensor_from_json(j.at("pattern"), "pattern");
    t.target_label = j.at("target_label").get<int>();
    const std::string prov = j.at("provenance").get<std::string>();
    if (prov == "original") {
        t.provenance = TriggerProvenance::original;
    } else if (prov == "synthetic") {
        t.provenance = TriggerProvenance::synthetic;
    } else {
        throw FormatError("trigger file: unknown provenance '" + prov + "'");
    }
    if (t.mask.rank() != 2) {
        throw FormatError("trigger file: mask must be rank 2");
    }
    return t;
}

}  // namespace bdf
