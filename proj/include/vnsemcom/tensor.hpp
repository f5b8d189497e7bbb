#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vnsemcom/errors.hpp"
#include "vnsemcom/rng.hpp"

namespace vnsemcom {

/// Dense row-major tensor of 64-bit floats. The carrier for signals,
/// images, latents, parameters, and gradients across the library.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    Tensor(std::initializer_list<double> values)
        : shape{values.size()}, data(values) {}

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        t.shape = std::move(shape);
        t.data.assign(t.shape_product(), 0.0);
        return t;
    }

    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data) {
        Tensor t;
        t.shape = std::move(shape);
        t.data = std::move(data);
        if (t.shape_product() != t.data.size()) {
            throw DimensionError("tensor data length " + std::to_string(t.data.size()) +
                                 " does not match shape product " +
                                 std::to_string(t.shape_product()));
        }
        return t;
    }

    std::size_t shape_product() const {
        std::size_t p = 1;
        for (std::size_t d : shape) p *= d;
        return p;
    }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    std::size_t cols() const { return shape.size() == 2 ? shape[1] : data.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data).subspan(r * cols(), cols());
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor& other) const {
        return shape == other.shape && data == other.data;
    }
};

inline std::string shape_string(const Tensor& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.shape[i]);
    }
    return s + "]";
}

enum class Dist { Uniform01, StandardNormal };

/// Draw n values from the stream. Deterministic per (seed, stream, call order).
inline Tensor rng_draw(RngStream& stream, Dist dist, std::size_t n) {
    Tensor t = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = dist == Dist::Uniform01 ? stream.uniform01() : stream.standard_normal();
    }
    return t;
}

inline double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

inline double variance(std::span<const double> values) {
    const double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

inline std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

inline void clip01(Tensor& t) {
    for (double& v : t.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

inline Tensor concat(std::span<const double> a, std::span<const double> b,
                     std::span<const double> c) {
    Tensor out = Tensor::zeros({a.size() + b.size() + c.size()});
    std::size_t k = 0;
    for (double v : a) out[k++] = v;
    for (double v : b) out[k++] = v;
    for (double v : c) out[k++] = v;
    return out;
}

} // namespace vnsemcom
