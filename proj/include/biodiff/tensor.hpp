#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace biodiff {

// Dense row-major (channels x length) buffer of doubles. The universal
// in-memory shape for signals, activations and gradients.
struct Tensor {
    int ch = 0;
    int len = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int channels, int length, double fill = 0.0)
        : ch(channels), len(length), v(static_cast<size_t>(channels) * length, fill) {}

    double& operator()(int c, int i) { return v[static_cast<size_t>(c) * len + i]; }
    double operator()(int c, int i) const { return v[static_cast<size_t>(c) * len + i]; }

    double* row(int c) { return v.data() + static_cast<size_t>(c) * len; }
    const double* row(int c) const { return v.data() + static_cast<size_t>(c) * len; }

    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return ch == o.ch && len == o.len; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                    std::to_string(a.ch) + "x" + std::to_string(a.len) + " vs " +
                                    std::to_string(b.ch) + "x" + std::to_string(b.len) + ")");
}

}  // namespace biodiff
