#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "ppgauth/errors.hpp"

namespace ppgauth::net {

/// Dense row-major tensor. Image batches are (N, C, H, W).
template <class T>
struct BasicTensor {
    std::vector<int> shape;
    std::vector<T> values;

    BasicTensor() = default;
    explicit BasicTensor(std::vector<int> dims, T fill = T(0)) : shape(std::move(dims)) {
        values.assign(count(shape), fill);
    }

    static std::size_t count(const std::vector<int>& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                               [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    }

    std::size_t size() const { return values.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    T* data() { return values.data(); }
    const T* data() const { return values.data(); }
    T& operator[](std::size_t i) { return values[i]; }
    const T& operator[](std::size_t i) const { return values[i]; }

    /// Elements per batch item for a batched tensor.
    std::size_t item_size() const { return shape.empty() ? 0 : size() / static_cast<std::size_t>(shape[0]); }

    template <class U>
    BasicTensor<U> cast() const {
        BasicTensor<U> out;
        out.shape = shape;
        out.values.assign(values.begin(), values.end());
        return out;
    }
};

using Tensor = BasicTensor<float>;

std::string shape_string(const std::vector<int>& shape);

/// Spatial shape of one batch item.
struct Shape3 {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(width);
    }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

}  // namespace ppgauth::net
