#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace conntra::qubo {

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    Matrix transposed() const;
    double max_abs() const noexcept;

    friend Matrix operator*(const Matrix& a, const Matrix& b);
    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

using Binary = std::vector<std::uint8_t>;

/// min z^T A z + z^T b + c over z in {0,1}^d. A is symmetric positive definite.
struct QuboInstance {
    Matrix A;
    std::vector<double> b;
    double c = 0.0;
};

/// min (1/N) ||X W - Y||^2 over W in {0,1}^d, with X stored N x d (one
/// sample per row). `offset` is c' with (Y^T Y + c') / N equal to the QUBO
/// constant, so objective + offset / N reproduces the QUBO objective.
struct BinaryTrainingInstance {
    Matrix X;
    std::vector<double> Y;
    double offset = 0.0;
};

/// Checks symmetry (1e-12 relative) and positive definiteness.
QuboInstance make_instance(Matrix A, std::vector<double> b, double c);

/// Lower-triangular L with positive diagonal and L L^T = A. Pivots must
/// exceed 1e-12 * max|A|, otherwise NotPositiveDefinite.
Matrix cholesky(const Matrix& A);

/// (A + A^T) / 2; leaves z^T A z unchanged.
Matrix symmetrize(const Matrix& A);

/// Solves L x = rhs for lower-triangular L.
std::vector<double> forward_substitute(const Matrix& L, std::span<const double> rhs);

/// X = sqrt(N) L^T, Y = -(sqrt(N)/2) L^{-1} b, offset = N c - Y^T Y, with N = d.
BinaryTrainingInstance reduce_qubo(const QuboInstance& q);

double qubo_value(const QuboInstance& q, std::span<const std::uint8_t> z);
double training_value(const BinaryTrainingInstance& t, std::span<const std::uint8_t> w);
/// (1/N)(W^T X^T X W - 2 W^T X^T Y + Y^T Y)
double training_value_expanded(const BinaryTrainingInstance& t, std::span<const std::uint8_t> w);

inline constexpr std::size_t kMaxEnumerationDim = 24;

/// z_i = bit (d-1-i) of `mask`, so increasing masks enumerate z in
/// lexicographic order.
Binary binary_from_mask(std::uint64_t mask, std::size_t d);

struct BinarySolution {
    Binary z;
    double value = 0.0;
};

/// Exhaustive minimum; ties resolve to the lexicographically smallest z.
BinarySolution brute_force_qubo(const QuboInstance& q);
BinarySolution brute_force_training(const BinaryTrainingInstance& t);

/// Objective value of every z, indexed by mask.
std::vector<double> enumerate_qubo(const QuboInstance& q);
std::vector<double> enumerate_training(const BinaryTrainingInstance& t);

/// Masks whose value is within `tol` of the minimum.
std::vector<std::uint64_t> argmin_set(std::span<const double> values, double tol);

/// Text format: d, then d rows of A, one row of b, then c. With
/// `symmetrize_input`, A is replaced by (A + A^T) / 2 before validation.
QuboInstance read_qubo(std::istream& in, bool symmetrize_input = false);
void write_qubo(std::ostream& out, const QuboInstance& q);

/// Text format: "N d", N rows of X, one row of Y, then offset.
BinaryTrainingInstance read_training_instance(std::istream& in);
void write_training_instance(std::ostream& out, const BinaryTrainingInstance& t);

} // namespace conntra::qubo
