#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "seastereo/error.hpp"

namespace seastereo::nn {

// Dense row-major tensor. Shapes follow the usual conventions: images and
// feature maps are [N,C,H,W], token matrices [L,C], scalars [1].
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        data.assign(size_t(numel_of(shape)), fill);
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }
    int64_t numel() const { return int64_t(data.size()); }
    int dim(int i) const { return shape[size_t(i)]; }
    int ndim() const { return int(shape.size()); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, T v) { return Tensor(std::move(s), v); }
    static Tensor scalar(T v) { return Tensor({1}, v); }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape[i]);
        return s + "]";
    }
};

template <typename T>
inline void check_shape(bool ok, const std::string& what) {
    if (!ok) raise(ErrorCode::Internal, "shape mismatch: " + what);
}

}  // namespace seastereo::nn
