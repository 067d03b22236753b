#include "r2a/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace r2a {

namespace {

void check_finite(double v)
{
    if (!std::isfinite(v))
        throw DomainError("non-finite matrix entry");
}

void check_all_finite(const std::vector<double>& v)
{
    for (double x : v)
        check_finite(x);
}

} // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
{
    if (rows == 0 || cols == 0)
        throw ShapeError("matrix must be at least 1x1, got " + std::to_string(rows) + "x" + std::to_string(cols));
    check_finite(fill);
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (rows == 0 || cols == 0)
        throw ShapeError("matrix must be at least 1x1, got " + std::to_string(rows) + "x" + std::to_string(cols));
    if (data_.size() != rows * cols)
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match " + shape_str());
    check_all_finite(data_);
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty() || rows.front().empty())
        throw ShapeError("from_rows: empty matrix");
    const std::size_t c = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * c);
    for (const auto& r : rows) {
        if (r.size() != c)
            throw ShapeError("from_rows: ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return DenseMatrix(rows.size(), c, std::move(data));
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows)
{
    std::vector<std::vector<double>> v;
    for (const auto& r : rows)
        v.emplace_back(r);
    return from_rows(v);
}

DenseMatrix DenseMatrix::column(const std::vector<double>& values)
{
    return DenseMatrix(values.size(), 1, values);
}

DenseMatrix DenseMatrix::identity(std::size_t n)
{
    DenseMatrix I(n, n);
    for (std::size_t i = 0; i < n; ++i)
        I.data_[i * n + i] = 1.0;
    return I;
}

double DenseMatrix::at(std::size_t i, std::size_t j) const
{
    if (i >= rows_ || j >= cols_)
        throw ShapeError("index (" + std::to_string(i) + "," + std::to_string(j) + ") outside " + shape_str());
    return data_[i * cols_ + j];
}

void DenseMatrix::set(std::size_t i, std::size_t j, double v)
{
    if (i >= rows_ || j >= cols_)
        throw ShapeError("index (" + std::to_string(i) + "," + std::to_string(j) + ") outside " + shape_str());
    check_finite(v);
    data_[i * cols_ + j] = v;
}

void DenseMatrix::add(std::size_t i, std::size_t j, double v)
{
    set(i, j, at(i, j) + v);
}

DenseMatrix DenseMatrix::transpose() const
{
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            t.data_[j * rows_ + i] = data_[i * cols_ + j];
    return t;
}

std::vector<double> DenseMatrix::column_values(std::size_t j) const
{
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        out[i] = at(i, j);
    return out;
}

std::string DenseMatrix::shape_str() const
{
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_shape(bool ok, const std::string& what, const DenseMatrix& a, const DenseMatrix& b)
{
    if (!ok)
        throw ShapeError(what + ": shapes " + a.shape_str() + " and " + b.shape_str() + " are incompatible");
}

void matmul_accumulate(const DenseMatrix& A, const DenseMatrix& B, DenseMatrix& C)
{
    require_shape(A.cols() == B.rows(), "matmul", A, B);
    if (C.rows() != A.rows() || C.cols() != B.cols())
        throw ShapeError("matmul_accumulate: output " + C.shape_str() + " does not match " + A.shape_str() + " * " +
                         B.shape_str());
    const std::size_t n = A.rows(), m = A.cols(), p = B.cols();
    const double* a = A.raw();
    const double* b = B.raw();
    double* c = C.raw();
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c + i * p;
        for (std::size_t k = 0; k < m; ++k) {
            const double aik = a[i * m + k];
            if (aik == 0.0)
                continue;
            const double* brow = b + k * p;
            for (std::size_t j = 0; j < p; ++j)
                crow[j] += aik * brow[j];
        }
    }
    for (std::size_t i = 0; i < C.size(); ++i)
        if (!std::isfinite(c[i]))
            throw DomainError("matmul produced a non-finite entry");
}

DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B)
{
    require_shape(A.cols() == B.rows(), "matmul", A, B);
    DenseMatrix C(A.rows(), B.cols());
    matmul_accumulate(A, B, C);
    return C;
}

DenseMatrix add(const DenseMatrix& A, const DenseMatrix& B)
{
    require_shape(A.rows() == B.rows() && A.cols() == B.cols(), "add", A, B);
    std::vector<double> v(A.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = A.data()[i] + B.data()[i];
    return DenseMatrix(A.rows(), A.cols(), std::move(v));
}

DenseMatrix subtract(const DenseMatrix& A, const DenseMatrix& B)
{
    require_shape(A.rows() == B.rows() && A.cols() == B.cols(), "subtract", A, B);
    std::vector<double> v(A.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = A.data()[i] - B.data()[i];
    return DenseMatrix(A.rows(), A.cols(), std::move(v));
}

DenseMatrix scale(const DenseMatrix& A, double s)
{
    std::vector<double> v(A.data());
    for (double& x : v)
        x *= s;
    return DenseMatrix(A.rows(), A.cols(), std::move(v));
}

DenseMatrix softmax_columns(const DenseMatrix& M, double lambda)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw DomainError("softmax_columns: lambda must be a positive finite number");
    const std::size_t r = M.rows(), c = M.cols();
    DenseMatrix out(r, c);
    const double* m = M.raw();
    double* o = out.raw();
    std::vector<double> col(r);
    for (std::size_t j = 0; j < c; ++j) {
        double mx = -INFINITY;
        for (std::size_t i = 0; i < r; ++i) {
            col[i] = lambda * m[i * c + j];
            mx = std::max(mx, col[i]);
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            col[i] = std::exp(col[i] - mx);
            sum += col[i];
        }
        for (std::size_t i = 0; i < r; ++i)
            o[i * c + j] = col[i] / sum;
    }
    return out;
}

double stable_sigmoid(double t)
{
    if (t >= 0.0)
        return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double max_norm(const DenseMatrix& M)
{
    double m = 0.0;
    for (double x : M.data())
        m = std::max(m, std::abs(x));
    return m;
}

double fro_norm(const DenseMatrix& M)
{
    // scaled accumulation avoids overflow for very large entries
    const double s = max_norm(M);
    if (s == 0.0)
        return 0.0;
    double acc = 0.0;
    for (double x : M.data()) {
        const double y = x / s;
        acc += y * y;
    }
    return s * std::sqrt(acc);
}

} // namespace r2a
