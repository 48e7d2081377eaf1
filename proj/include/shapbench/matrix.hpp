#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace shapbench {

class Rng;

// Dense row-major matrix of 64-bit floats. All shape-changing operations
// validate dimensions and throw ShapeError naming both sides.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::vector<double> row_copy(std::size_t r) const;
    void set_row(std::size_t r, std::span<const double> values);

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

    static Matrix from_row(std::span<const double> values);
    static Matrix select_rows(const Matrix& source, std::span<const std::size_t> indices);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
void add_inplace(Matrix& a, const Matrix& b);
void scale_inplace(Matrix& a, double factor);
// Adds the same vector to every row.
void add_row_vector_inplace(Matrix& a, std::span<const double> v);
std::vector<double> column_sums(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// Throws ShapeError on non-square input and a runtime error when the system
// is numerically singular (smallest pivot below tolerance * max |A|).
std::vector<double> solve_dense(Matrix a, std::vector<double> b, double pivot_tolerance = 1e-12);

}  // namespace shapbench
