#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace calseg {

// Dense row-major tensor of doubles. Rank-3 data is laid out [C, H, W].
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)), data(count(shape), fill) {}

    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // [C,H,W] accessors
    double& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data[(c * shape[1] + y) * shape[2] + x];
    }
    double at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * shape[1] + y) * shape[2] + x];
    }
    // [H,W] accessors
    double& at2(std::size_t y, std::size_t x) { return data[y * shape[1] + x]; }
    double at2(std::size_t y, std::size_t x) const { return data[y * shape[1] + x]; }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

inline std::string shape_string(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& s, const char* what) {
    if (t.shape != s)
        throw std::invalid_argument(std::string(what) + ": expected shape " + shape_string(s) +
                                    ", got " + shape_string(t.shape));
}

}  // namespace calseg
