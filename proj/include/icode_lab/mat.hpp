#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace icode_lab {

using Vec = std::vector<double>;

// Dense row-major matrix. Just enough linear algebra for this project.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix transposed() const {
        Matrix t(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }
};

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// y = A x
inline void matvec(const Matrix& a, const double* x, double* y) {
    const double* row = a.data.data();
    for (std::size_t i = 0; i < a.rows; ++i, row += a.cols) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
}

// y += A^T d   (row-major streaming: axpy per row)
inline void matvec_transpose_acc(const Matrix& a, const double* d, double* y) {
    const double* row = a.data.data();
    for (std::size_t i = 0; i < a.rows; ++i, row += a.cols) {
        const double di = d[i];
        for (std::size_t j = 0; j < a.cols; ++j) y[j] += row[j] * di;
    }
}

// G += d x^T
inline void outer_acc(Matrix& g, const double* d, const double* x) {
    double* row = g.data.data();
    for (std::size_t i = 0; i < g.rows; ++i, row += g.cols) {
        const double di = d[i];
        for (std::size_t j = 0; j < g.cols; ++j) row[j] += di * x[j];
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: dimension mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

// Gauss-Jordan with partial pivoting. Throws if the matrix is singular to
// working precision.
inline Matrix inverse(const Matrix& a) {
    if (a.rows != a.cols) throw std::invalid_argument("inverse: matrix not square");
    const std::size_t n = a.rows;
    Matrix m = a;
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(m(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(m(r, col)) > best) {
                best = std::abs(m(r, col));
                piv = r;
            }
        }
        if (best < 1e-300) throw std::runtime_error("inverse: singular matrix");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(m(piv, j), m(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        }
        const double d = m(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            m(col, j) /= d;
            inv(col, j) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                m(r, j) -= f * m(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

inline void axpy(double alpha, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

}  // namespace icode_lab
