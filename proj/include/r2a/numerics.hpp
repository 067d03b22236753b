#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "r2a/errors.hpp"

namespace r2a {

/**
 * @brief Row-major dense matrix of finite doubles.
 *
 * Every weight, input and activation in the library lives in one of these.
 * Shapes are at least 1x1. Mutation goes through set()/add(), which reject
 * non-finite values.
 */
class DenseMatrix {
public:
    DenseMatrix() : DenseMatrix(1, 1) {}
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static DenseMatrix column(const std::vector<double>& values);
    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const;
    void set(std::size_t i, std::size_t j, double v);
    void add(std::size_t i, std::size_t j, double v);

    const std::vector<double>& data() const noexcept { return data_; }
    // Raw write access for kernels. Callers must keep entries finite.
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    DenseMatrix transpose() const;
    std::vector<double> column_values(std::size_t j) const;
    std::string shape_str() const;

    bool operator==(const DenseMatrix& other) const = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

// Exact dense product. Zero entries of A are skipped, which is the common
// case for the structured weights built in this library.
DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B);
// C += A * B
void matmul_accumulate(const DenseMatrix& A, const DenseMatrix& B, DenseMatrix& C);

DenseMatrix add(const DenseMatrix& A, const DenseMatrix& B);
DenseMatrix subtract(const DenseMatrix& A, const DenseMatrix& B);
DenseMatrix scale(const DenseMatrix& A, double s);

// Column-wise Softmax_lambda; max-subtracted per column.
DenseMatrix softmax_columns(const DenseMatrix& M, double lambda);
double stable_sigmoid(double t);

double max_norm(const DenseMatrix& M);
double fro_norm(const DenseMatrix& M);

// Throws ShapeError naming both shapes when the predicate fails.
void require_shape(bool ok, const std::string& what, const DenseMatrix& a, const DenseMatrix& b);

} // namespace r2a
