#include "bdf/tensor.hpp"

#include <cmath>
#include <cstdint>

#include "bdf/errors.hpp"

namespace bdf {

namespace {

std::size_t checked_count(const std::vector<int>& shape) {
    std::uint64_t n = 1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] <= 0) {
            throw DimensionError("tensor shape " + shape_str(shape) + ": axis " +
                                 std::to_string(i) + " is not positive");
        }
        n *= static_cast<std::uint64_t>(shape[i]);
    }
    return static_cast<std::size_t>(n);
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(checked_count(shape), 0.0f);
}

Tensor::Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    if (checked_count(shape) != data.size()) {
        throw DimensionError("tensor shape " + shape_str(shape) + " expects " +
                             std::to_string(checked_count(shape)) + " elements, got " +
                             std::to_string(data.size()));
    }
}

Tensor Tensor::full(std::vector<int> s, float v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
}

bool Tensor::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(shape[i]);
    }
    s += ']';
    return s;
}

void ensure_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) {
        throw NumericError(std::string(what) + " produced a non-finite value");
    }
}

}  // namespace bdf
