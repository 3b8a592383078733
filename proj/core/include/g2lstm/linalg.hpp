#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace g2lstm {

using Vector = std::vector<double>;

/// Dense row-major matrix of 64-bit floats.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::vector<double>& flat() { return data_; }
    const std::vector<double>& flat() const { return data_; }

    std::string shape_str() const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// a * b. Throws std::invalid_argument naming both shapes on a dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// transpose(a) * b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// a * transpose(b) without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// a * x for a column vector x.
Vector matvec(const Matrix& a, const Vector& x);

/// transpose(a) * x without forming the transpose.
Vector matvec_t(const Matrix& a, const Vector& x);

/// Outer product a * b^T (len(a) x len(b)).
Matrix outer(const Vector& a, const Vector& b);

Matrix transpose(const Matrix& a);
double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Numerically stable logistic sigmoid; finite output for any finite input.
double sigmoid(double x);
Vector sigmoid(const Vector& x);

Vector tanh_vec(const Vector& x);

Vector add(const Vector& a, const Vector& b);
Vector hadamard(const Vector& a, const Vector& b);

}  // namespace g2lstm
