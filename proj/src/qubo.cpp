#include "conntra/qubo.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "conntra/errors.hpp"

namespace conntra::qubo {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

double Matrix::max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw InvalidArgument("matrix product with mismatched shapes");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

namespace {

void require_square(const Matrix& A) {
    if (A.rows() != A.cols() || A.rows() == 0) {
        throw InvalidArgument("matrix must be square and non-empty");
    }
}

bool is_symmetric(const Matrix& A, double rel_tol) {
    const double tol = rel_tol * std::max(A.max_abs(), 1.0);
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(A(i, j) - A(j, i)) > tol) return false;
    return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void check_dim(std::size_t d) {
    if (d > kMaxEnumerationDim) {
        throw CapacityError("exhaustive enumeration limited to d <= " +
                            std::to_string(kMaxEnumerationDim) + ", got " + std::to_string(d));
    }
}

template <class Objective>
std::vector<double> enumerate(std::size_t d, Objective&& f) {
    check_dim(d);
    const std::uint64_t count = std::uint64_t{1} << d;
    std::vector<double> values(count);
    for (std::uint64_t m = 0; m < count; ++m) values[m] = f(binary_from_mask(m, d));
    return values;
}

BinarySolution minimum(std::span<const double> values, std::size_t d) {
    std::uint64_t best = 0;
    for (std::uint64_t m = 1; m < values.size(); ++m)
        if (values[m] < values[best]) best = m;
    return {binary_from_mask(best, d), values[best]};
}

} // namespace

QuboInstance make_instance(Matrix A, std::vector<double> b, double c) {
    require_square(A);
    if (b.size() != A.rows()) {
        throw InvalidArgument("QUBO vector b has the wrong length");
    }
    if (!std::isfinite(c) || std::any_of(b.begin(), b.end(), [](double v) { return !std::isfinite(v); })) {
        throw InvalidArgument("QUBO instance has non-finite entries");
    }
    if (!is_symmetric(A, 1e-12)) {
        throw InvalidArgument("QUBO matrix is not symmetric; symmetrize it first");
    }
    cholesky(A); // throws when not positive definite
    return {std::move(A), std::move(b), c};
}

Matrix cholesky(const Matrix& A) {
    require_square(A);
    if (!is_symmetric(A, 1e-12)) {
        throw InvalidArgument("cholesky input is not symmetric");
    }
    const std::size_t d = A.rows();
    const double pivot_floor = 1e-12 * A.max_abs();
    Matrix L(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        double diag = A(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
        if (!(diag > pivot_floor)) {
            throw NotPositiveDefinite("non-positive pivot " + std::to_string(diag) + " at row " +
                                      std::to_string(j));
        }
        L(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = A(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / L(j, j);
        }
    }
    return L;
}

Matrix symmetrize(const Matrix& A) {
    require_square(A);
    Matrix S = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double avg = 0.5 * (A(i, j) + A(j, i));
            S(i, j) = avg;
            S(j, i) = avg;
        }
    return S;
}

std::vector<double> forward_substitute(const Matrix& L, std::span<const double> rhs) {
    require_square(L);
    if (rhs.size() != L.rows()) {
        throw InvalidArgument("right-hand side has the wrong length");
    }
    std::vector<double> x(rhs.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * x[k];
        x[i] = s / L(i, i);
    }
    return x;
}

BinaryTrainingInstance reduce_qubo(const QuboInstance& q) {
    const Matrix L = cholesky(q.A);
    const std::size_t d = q.A.rows();
    const double N = static_cast<double>(d);
    const double root = std::sqrt(N);

    BinaryTrainingInstance t;
    t.X = L.transposed();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) t.X(i, j) *= root;

    t.Y = forward_substitute(L, q.b);
    for (double& y : t.Y) y *= -0.5 * root;
    t.offset = N * q.c - dot(t.Y, t.Y);
    return t;
}

double qubo_value(const QuboInstance& q, std::span<const std::uint8_t> z) {
    const std::size_t d = q.b.size();
    if (z.size() != d) {
        throw InvalidArgument("assignment has the wrong length");
    }
    double v = q.c;
    for (std::size_t i = 0; i < d; ++i) {
        if (!z[i]) continue;
        v += q.b[i];
        for (std::size_t j = 0; j < d; ++j)
            if (z[j]) v += q.A(i, j);
    }
    return v;
}

double training_value(const BinaryTrainingInstance& t, std::span<const std::uint8_t> w) {
    if (w.size() != t.X.cols()) {
        throw InvalidArgument("weight vector has the wrong length");
    }
    double s = 0.0;
    for (std::size_t n = 0; n < t.X.rows(); ++n) {
        double p = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j)
            if (w[j]) p += t.X(n, j);
        const double r = p - t.Y[n];
        s += r * r;
    }
    return s / static_cast<double>(t.X.rows());
}

double training_value_expanded(const BinaryTrainingInstance& t, std::span<const std::uint8_t> w) {
    if (w.size() != t.X.cols()) {
        throw InvalidArgument("weight vector has the wrong length");
    }
    const std::size_t N = t.X.rows(), d = t.X.cols();
    const Matrix XtX = t.X.transposed() * t.X;
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        if (!w[i]) continue;
        for (std::size_t j = 0; j < d; ++j)
            if (w[j]) quad += XtX(i, j);
        for (std::size_t n = 0; n < N; ++n) lin += t.X(n, i) * t.Y[n];
    }
    return (quad - 2.0 * lin + dot(t.Y, t.Y)) / static_cast<double>(N);
}

Binary binary_from_mask(std::uint64_t mask, std::size_t d) {
    Binary z(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = static_cast<std::uint8_t>((mask >> (d - 1 - i)) & 1u);
    return z;
}

std::vector<double> enumerate_qubo(const QuboInstance& q) {
    return enumerate(q.b.size(), [&](const Binary& z) { return qubo_value(q, z); });
}

std::vector<double> enumerate_training(const BinaryTrainingInstance& t) {
    return enumerate(t.X.cols(), [&](const Binary& w) { return training_value(t, w); });
}

BinarySolution brute_force_qubo(const QuboInstance& q) {
    return minimum(enumerate_qubo(q), q.b.size());
}

BinarySolution brute_force_training(const BinaryTrainingInstance& t) {
    return minimum(enumerate_training(t), t.X.cols());
}

std::vector<std::uint64_t> argmin_set(std::span<const double> values, double tol) {
    const double m = *std::min_element(values.begin(), values.end());
    std::vector<std::uint64_t> out;
    for (std::uint64_t i = 0; i < values.size(); ++i)
        if (values[i] <= m + tol) out.push_back(i);
    return out;
}

namespace {

double read_number(std::istream& in, const char* what) {
    double v;
    if (!(in >> v)) {
        throw FormatError(std::string("expected a number for ") + what);
    }
    return v;
}

std::size_t read_size(std::istream& in, const char* what) {
    long long v;
    if (!(in >> v) || v <= 0) {
        throw FormatError(std::string("expected a positive integer for ") + what);
    }
    return static_cast<std::size_t>(v);
}

} // namespace

QuboInstance read_qubo(std::istream& in, bool symmetrize_input) {
    const std::size_t d = read_size(in, "dimension d");
    Matrix A(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) A(i, j) = read_number(in, "matrix entry");
    std::vector<double> b(d);
    for (auto& v : b) v = read_number(in, "vector entry");
    const double c = read_number(in, "constant c");
    return make_instance(symmetrize_input ? symmetrize(A) : std::move(A), std::move(b), c);
}

void write_qubo(std::ostream& out, const QuboInstance& q) {
    const std::size_t d = q.b.size();
    out << std::setprecision(17) << d << '\n';
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) out << (j ? " " : "") << q.A(i, j);
        out << '\n';
    }
    for (std::size_t i = 0; i < d; ++i) out << (i ? " " : "") << q.b[i];
    out << '\n' << q.c << '\n';
}

BinaryTrainingInstance read_training_instance(std::istream& in) {
    const std::size_t N = read_size(in, "sample count N");
    const std::size_t d = read_size(in, "dimension d");
    BinaryTrainingInstance t;
    t.X = Matrix(N, d);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < d; ++j) t.X(i, j) = read_number(in, "X entry");
    t.Y.resize(N);
    for (auto& v : t.Y) v = read_number(in, "Y entry");
    t.offset = read_number(in, "offset");
    return t;
}

void write_training_instance(std::ostream& out, const BinaryTrainingInstance& t) {
    out << std::setprecision(17) << t.X.rows() << ' ' << t.X.cols() << '\n';
    for (std::size_t i = 0; i < t.X.rows(); ++i) {
        for (std::size_t j = 0; j < t.X.cols(); ++j) out << (j ? " " : "") << t.X(i, j);
        out << '\n';
    }
    for (std::size_t i = 0; i < t.Y.size(); ++i) out << (i ? " " : "") << t.Y[i];
    out << '\n' << t.offset << '\n';
}

} // namespace conntra::qubo
