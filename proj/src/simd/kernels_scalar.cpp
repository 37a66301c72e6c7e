#include "kernels.hpp"

namespace vattn::simd::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double max_element(const double* x, std::size_t n) {
    double best = x[0];
    for (std::size_t i = 1; i < n; ++i) {
        if (x[i] > best) best = x[i];
    }
    return best;
}

void gemv(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot(A + r * cols, x, cols);
}

}  // namespace vattn::simd::scalar
