#include "shapbench/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "shapbench/errors.hpp"

namespace shapbench {

namespace {

std::string dims(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
}

std::vector<double> Matrix::row_copy(std::size_t r) const {
    const auto view = row(r);
    return {view.begin(), view.end()};
}

void Matrix::set_row(std::size_t r, std::span<const double> values) {
    if (values.size() != cols_) {
        throw ShapeError("row length " + std::to_string(values.size()) +
                         " does not match matrix width " + std::to_string(cols_));
    }
    std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(r * cols_));
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::from_row(std::span<const double> values) {
    Matrix m(1, values.size());
    m.set_row(0, values);
    return m;
}

Matrix Matrix::select_rows(const Matrix& source, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), source.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= source.rows()) {
            throw std::out_of_range("row index " + std::to_string(indices[i]) +
                                    " out of range for " + dims(source) + " matrix");
        }
        out.set_row(i, source.row(indices[i]));
    }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch: " + dims(a) + " * " + dims(b));
    }
    Matrix c(a.rows(), b.cols(), 0.0);
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* cd = c.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ad[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = bd + p * m;
            double* crow = cd + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void add_inplace(Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("elementwise add shape mismatch: " + dims(a) + " vs " + dims(b));
    }
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

void scale_inplace(Matrix& a, double factor) {
    for (double& v : a.data()) v *= factor;
}

void add_row_vector_inplace(Matrix& a, std::span<const double> v) {
    if (v.size() != a.cols()) {
        throw ShapeError("row vector length " + std::to_string(v.size()) +
                         " does not match matrix width " + std::to_string(a.cols()));
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < v.size(); ++j) r[j] += v[j];
    }
}

std::vector<double> column_sums(const Matrix& a) {
    std::vector<double> sums(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) sums[j] += r[j];
    }
    return sums;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot length mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> solve_dense(Matrix a, std::vector<double> b, double pivot_tolerance) {
    if (a.rows() != a.cols()) {
        throw ShapeError("solve_dense requires a square system, got " + dims(a));
    }
    const std::size_t n = a.rows();
    if (b.size() != n) {
        throw ShapeError("solve_dense rhs length " + std::to_string(b.size()) +
                         " does not match system size " + std::to_string(n));
    }
    double max_abs = 0.0;
    for (double v : a.data()) max_abs = std::max(max_abs, std::abs(v));
    const double threshold = pivot_tolerance * std::max(max_abs, 1.0);

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        }
        if (std::abs(a(pivot, col)) < threshold) {
            throw std::runtime_error("singular linear system at pivot " + std::to_string(col));
        }
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) * inv;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

}  // namespace shapbench
