#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "contime/errors.hpp"

namespace contime {

/// Dense row-major matrix of doubles. Vectors are rows x 1.
struct Tensor {
    int rows = 0;
    int cols = 1;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
    Tensor(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != static_cast<std::size_t>(r) * c)
            throw ShapeError("Tensor: data size does not match " + std::to_string(r) + "x" + std::to_string(c));
    }

    static Tensor vec(std::vector<double> d) {
        const int n = static_cast<int>(d.size());
        return Tensor(n, 1, std::move(d));
    }
    static Tensor zeros(int r, int c = 1) { return Tensor(r, c); }
    static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

    int size() const { return rows * cols; }
    double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
    double& operator[](int i) { return data[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return data[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

/// y = A * x for A rows x cols, x cols x 1.
inline Tensor matvec_value(const Tensor& A, const Tensor& x) {
    if (x.cols != 1 || A.cols != x.rows)
        throw ShapeError("matvec: " + A.shape_str() + " * " + x.shape_str());
    Tensor y(A.rows, 1);
    for (int i = 0; i < A.rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < A.cols; ++j) acc += A(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

inline double dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    double acc = 0.0;
    for (int i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

} // namespace contime
