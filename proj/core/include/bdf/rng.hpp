#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace bdf {

/// Derive a subsystem seed from the global seed: root XOR FNV-1a64(name).
/// One global seed reproduces every stage of a run; distinct subsystem
/// names decorrelate their streams.
inline std::uint64_t derived_seed(std::uint64_t root, std::string_view subsystem) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : subsystem) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return root ^ h;
}

/// Deterministic random source. All distributions are generated from raw
/// mt19937_64 output with fixed arithmetic, so a given seed yields the
/// same stream on every standard library implementation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    /// Uniform in [0, 1), 24 bits of precision.
    float uniform() {
        return static_cast<float>(gen_() >> 40) * (1.0f / 16777216.0f);
    }

    /// Uniform in [lo, hi).
    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    /// First k elements of a shuffled 0..n-1, unsorted.
    std::vector<int> sample_indices(int n, int k) {
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        shuffle(idx);
        idx.resize(static_cast<std::size_t>(k < n ? k : n));
        return idx;
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace bdf
