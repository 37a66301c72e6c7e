#include "linalg.hpp"

#include <algorithm>
#include <cmath>

#include "vattn/simd.hpp"

namespace vattn::linalg {

bool solve(std::vector<double> A, std::vector<double>& b, std::size_t n, double pivot_tol) {
    double scale = 0.0;
    for (double a : A) scale = std::max(scale, std::abs(a));
    if (scale == 0.0) return false;
    const double threshold = pivot_tol * scale;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::abs(A[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double mag = std::abs(A[r * n + col]);
            if (mag > best) {
                best = mag;
                pivot = r;
            }
        }
        if (best <= threshold) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(A[col * n + c], A[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / A[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = A[r * n + col] * inv;
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) A[r * n + c] -= factor * A[col * n + c];
            b[r] -= factor * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t c = i + 1; c < n; ++c) sum -= A[i * n + c] * b[c];
        b[i] = sum / A[i * n + i];
    }
    return true;
}

bool pseudo_inverse_rows(const Matrix& columns, Matrix& W, double rank_tol) {
    const std::size_t k = columns.rows();
    const std::size_t n = columns.cols();
    Matrix Q(k, n);
    Matrix R(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        auto q = Q.row(i);
        std::copy(columns.row(i).begin(), columns.row(i).end(), q.begin());
        const double original = std::sqrt(simd::squared_norm(q));
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t l = 0; l < i; ++l) {
                const double proj = simd::dot(Q.row(l), q);
                R(l, i) += proj;
                simd::axpy(-proj, Q.row(l), q);
            }
        }
        const double norm = std::sqrt(simd::squared_norm(q));
        if (norm <= rank_tol * std::max(1.0, original)) return false;
        R(i, i) = norm;
        const double inv = 1.0 / norm;
        for (double& x : q) x *= inv;
    }
    // W = R^{-1} Q, by back substitution over rows.
    W = Matrix(k, n);
    for (std::size_t i = k; i-- > 0;) {
        auto w = W.row(i);
        std::copy(Q.row(i).begin(), Q.row(i).end(), w.begin());
        for (std::size_t l = i + 1; l < k; ++l) simd::axpy(-R(i, l), W.row(l), w);
        const double inv = 1.0 / R(i, i);
        for (double& x : w) x *= inv;
    }
    return true;
}

}  // namespace vattn::linalg
