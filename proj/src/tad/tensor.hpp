#pragma once

#include "core/rng.hpp"

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace detours::tad {

class ShapeMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IndexOutOfRange : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

inline size_t shape_numel(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
}

// Dense row-major tensor. Rank is dynamic but almost everything in the
// model is 1-D or 2-D.
template <class S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> sh) : shape(std::move(sh)), data(shape_numel(shape), S(0)) {}
    Tensor(std::vector<int> sh, std::vector<S> d) : shape(std::move(sh)), data(std::move(d)) {
        if (data.size() != shape_numel(shape))
            throw ShapeMismatch("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
    }

    size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    // 2-D accessors.
    int rows() const { return shape.size() == 2 ? shape[0] : (shape.empty() ? 0 : shape[0]); }
    int cols() const { return shape.size() == 2 ? shape[1] : 1; }
    S* row(int r) { return data.data() + static_cast<size_t>(r) * cols(); }
    const S* row(int r) const { return data.data() + static_cast<size_t>(r) * cols(); }
    S& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    S at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    S scalar() const {
        if (numel() != 1) throw ShapeMismatch("scalar() on tensor of shape " + shape_str(shape));
        return data[0];
    }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }

    static Tensor zeros(std::vector<int> sh) { return Tensor(std::move(sh)); }

    static Tensor full(std::vector<int> sh, S v) {
        Tensor t(std::move(sh));
        t.fill(v);
        return t;
    }

    static Tensor randn(std::vector<int> sh, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(sh));
        for (auto& x : t.data) x = static_cast<S>(rng.normal() * stddev);
        return t;
    }

    template <class T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
        return out;
    }
};

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape != b.shape)
        throw ShapeMismatch(std::string(op) + ": shapes " + shape_str(a.shape) + " vs " +
                            shape_str(b.shape));
}

} // namespace detours::tad
