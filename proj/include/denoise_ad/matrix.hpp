#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "denoise_ad/errors.hpp"

namespace denoise_ad {

// Dense row-major 2-D matrix of doubles. Column vectors are n x 1 matrices.
// Everything in the model (weights, states, windows) lives in these.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
        }
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        Matrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c) {
                throw ShapeError("Matrix::from_rows: ragged rows");
            }
            std::size_t j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    static Matrix column(std::initializer_list<double> values) {
        Matrix m(values.size(), 1);
        std::size_t i = 0;
        for (double v : values) m[i++] = v;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    // Flat row-major access.
    double& operator[](std::size_t i) {
        assert(i < data_.size());
        return data_[i];
    }
    double operator[](std::size_t i) const {
        assert(i < data_.size());
        return data_[i];
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    Matrix extract_column(std::size_t c) const {
        assert(c < cols_);
        Matrix out(rows_, 1);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    void set_column(std::size_t c, const Matrix& col) {
        assert(c < cols_ && col.rows() == rows_ && col.cols() == 1);
        for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = col[r];
    }

    Matrix extract_row_as_column(std::size_t r) const {
        assert(r < rows_);
        Matrix out(cols_, 1);
        for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
        return out;
    }

    void set_row_from_column(std::size_t r, const Matrix& col) {
        assert(r < rows_ && col.rows() == cols_ && col.cols() == 1);
        for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = col[c];
    }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same_shape(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

private:
    void check_same_shape(const Matrix& o, const char* op) const {
        if (!same_shape(o)) {
            throw ShapeError(std::string("Matrix ") + op + ": shapes " + shape_str() +
                             " and " + o.shape_str() + " differ");
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

inline bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a.data() == b.data();
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " * " +
                         b.shape_str());
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    return out;
}

// a^T * b without materializing the transpose.
inline Matrix transposed_matmul(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("transposed_matmul: incompatible shapes " + a.shape_str() +
                         "^T * " + b.shape_str());
    }
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aki * b(k, j);
            }
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
    return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("hadamard: shapes " + a.shape_str() + " and " + b.shape_str() +
                         " differ");
    }
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

// acc += a * b^T, for column vectors a (m x 1) and b (n x 1).
inline void add_outer(Matrix& acc, const Matrix& a, const Matrix& b) {
    if (acc.rows() != a.rows() || acc.cols() != b.rows() || a.cols() != 1 ||
        b.cols() != 1) {
        throw ShapeError("add_outer: shapes " + acc.shape_str() + " += " + a.shape_str() +
                         " * " + b.shape_str() + "^T");
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double ai = a[i];
        for (std::size_t j = 0; j < b.rows(); ++j) acc(i, j) += ai * b[j];
    }
}

inline double sum(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m[i];
    return s;
}

inline double squared_norm(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m[i] * m[i];
    return s;
}

inline bool all_finite(const Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m[i])) return false;
    return true;
}

// Branch on sign so exp never overflows.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

enum class Activation { Sigmoid, Tanh };

inline Matrix apply_activation(const Matrix& m, Activation kind) {
    Matrix out = m;
    if (kind == Activation::Sigmoid) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i]);
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    }
    return out;
}

} // namespace denoise_ad
