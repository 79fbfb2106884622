#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ifedrec/common.hpp"

namespace ifedrec {

// Row-major dense matrix of doubles. The whole artifact runs on 64-bit
// floats so gradient checks can use tight tolerances.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

    double* row(std::size_t i) { return values.data() + i * cols; }
    const double* row(std::size_t i) const { return values.data() + i * cols; }

    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void ensure_finite(const std::string& context) const {
        if (!all_finite())
            throw TrainingError(context + ": non-finite entries in " + shape_str() + " matrix");
    }
};

inline bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.values == b.values;
}

// c = a * b
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows)
        throw DimensionError("matmul: " + a.shape_str() + " incompatible with " + b.shape_str());
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* crow = c.row(i);
        const double* arow = a.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// c = a * b^T
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.cols)
        throw DimensionError("matmul_nt: " + a.shape_str() + " incompatible with " + b.shape_str());
    DenseMatrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            c(i, j) = acc;
        }
    }
    return c;
}

// c = a^T * b
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows)
        throw DimensionError("matmul_tn: " + a.shape_str() + " incompatible with " + b.shape_str());
    DenseMatrix c(a.cols, b.cols);
    for (std::size_t t = 0; t < a.rows; ++t) {
        const double* arow = a.row(t);
        const double* brow = b.row(t);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double ati = arow[i];
            if (ati == 0.0) continue;
            double* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += ati * brow[j];
        }
    }
    return c;
}

inline DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b))
        throw DimensionError("subtract: " + a.shape_str() + " vs " + b.shape_str());
    DenseMatrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.values.size(); ++i) c.values[i] = a.values[i] - b.values[i];
    return c;
}

// a += s * b
inline void axpy(DenseMatrix& a, double s, const DenseMatrix& b) {
    if (!a.same_shape(b))
        throw DimensionError("axpy: " + a.shape_str() + " vs " + b.shape_str());
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += s * b.values[i];
}

inline std::vector<double> column_sums(const DenseMatrix& a) {
    std::vector<double> out(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) out[j] += arow[j];
    }
    return out;
}

}  // namespace ifedrec
