#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace bdf {

/// Dense n-dimensional array of 32-bit floats, row-major.
///
/// Shapes are validated on construction: every dimension positive and
/// product(shape) == data.size(). Element access is unchecked in release
/// builds; callers validate shapes at operation boundaries.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<float> d);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, float v);

    int rank() const { return static_cast<int>(shape.size()); }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    float& at(int i) { return data[static_cast<std::size_t>(i)]; }
    float at(int i) const { return data[static_cast<std::size_t>(i)]; }
    float& at(int a, int b) { return data[static_cast<std::size_t>(a * shape[1] + b)]; }
    float at(int a, int b) const { return data[static_cast<std::size_t>(a * shape[1] + b)]; }
    float& at(int a, int b, int c) {
        return data[static_cast<std::size_t>((a * shape[1] + b) * shape[2] + c)];
    }
    float at(int a, int b, int c) const {
        return data[static_cast<std::size_t>((a * shape[1] + b) * shape[2] + c)];
    }
    float& at(int a, int b, int c, int d) {
        return data[static_cast<std::size_t>(((a * shape[1] + b) * shape[2] + c) * shape[3] + d)];
    }
    float at(int a, int b, int c, int d) const {
        return data[static_cast<std::size_t>(((a * shape[1] + b) * shape[2] + c) * shape[3] + d)];
    }

    bool all_finite() const;
};

/// "[2,3,4]" -- for error messages.
std::string shape_str(const std::vector<int>& shape);

/// Throws NumericError naming `what` if t contains a NaN or infinity.
void ensure_finite(const Tensor& t, const char* what);

}  // namespace bdf
