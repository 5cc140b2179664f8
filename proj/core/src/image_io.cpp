#include "bdf/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "bdf/errors.hpp"

namespace bdf {

namespace {

std::array<std::array<unsigned char, 3>, 256> build_jet_table() {
    std::array<std::array<unsigned char, 3>, 256> table{};
    for (int i = 0; i < 256; ++i) {
        const float t = static_cast<float>(i) / 255.0f;
        const float r = std::clamp(1.5f - std::abs(4.0f * t - 3.0f), 0.0f, 1.0f);
        const float g = std::clamp(1.5f - std::abs(4.0f * t - 2.0f), 0.0f, 1.0f);
        const float b = std::clamp(1.5f - std::abs(4.0f * t - 1.0f), 0.0f, 1.0f);
        table[static_cast<std::size_t>(i)] = {static_cast<unsigned char>(std::lround(r * 255.0f)),
                                              static_cast<unsigned char>(std::lround(g * 255.0f)),
                                              static_cast<unsigned char>(std::lround(b * 255.0f))};
    }
    return table;
}

void require_hw(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(what) + " must be [H,W], got " + shape_str(t.shape));
    }
}

void write_ppm(const std::filesystem::path& path, int h, int w,
               const std::vector<unsigned char>& rgb) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw FormatError("ppm: cannot open " + path.string() + " for writing");
    }
    f << "P6\n" << w << ' ' << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!f) {
        throw FormatError("ppm: short write to " + path.string());
    }
}

unsigned char quantize(float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

std::array<unsigned char, 3> jet_color(float v) {
    static const auto table = build_jet_table();
    return table[quantize(v)];
}

void save_gray_ppm(const Tensor& values, const std::filesystem::path& path) {
    require_hw(values, "gray ppm input");
    std::vector<unsigned char> rgb;
    rgb.reserve(values.size() * 3);
    for (float v : values.data) {
        const unsigned char g = quantize(v);
        rgb.insert(rgb.end(), {g, g, g});
    }
    write_ppm(path, values.shape[0], values.shape[1], rgb);
}

void save_jet_ppm(const Tensor& values, const std::filesystem::path& path) {
    require_hw(values, "jet ppm input");
    std::vector<unsigned char> rgb;
    rgb.reserve(values.size() * 3);
    for (float v : values.data) {
        const auto c = jet_color(v);
        rgb.insert(rgb.end(), c.begin(), c.end());
    }
    write_ppm(path, values.shape[0], values.shape[1], rgb);
}

void save_overlay_ppm(const Tensor& values, const Tensor& image,
                      const std::filesystem::path& path) {
    require_hw(values, "overlay heatmap");
    if (image.rank() != 3 || image.shape[1] != values.shape[0] ||
        image.shape[2] != values.shape[1]) {
        throw DimensionError("overlay: image " + shape_str(image.shape) +
                             " does not match heatmap " + shape_str(values.shape));
    }
    const int c = image.shape[0], h = values.shape[0], w = values.shape[1];
    std::vector<unsigned char> rgb;
    rgb.reserve(values.size() * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto heat = jet_color(values.at(y, x));
            for (int ch = 0; ch < 3; ++ch) {
                const float pix = image.at(c == 1 ? 0 : std::min(ch, c - 1), y, x);
                const float mixed = 0.5f * pix + 0.5f * static_cast<float>(heat[static_cast<std::size_t>(ch)]) / 255.0f;
                rgb.push_back(quantize(mixed));
            }
        }
    }
    write_ppm(path, h, w, rgb);
}

void save_matrix_csv(const Tensor& values, const std::filesystem::path& path) {
    require_hw(values, "csv matrix");
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("csv: cannot open " + path.string() + " for writing");
    }
    char buf[48];
    for (int y = 0; y < values.shape[0]; ++y) {
        for (int x = 0; x < values.shape[1]; ++x) {
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(values.at(y, x)));
            if (x) f << ',';
            f << buf;
        }
        f << '\n';
    }
}

}  // namespace bdf
