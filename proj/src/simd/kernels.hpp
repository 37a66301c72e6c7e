#pragma once

#include <cstddef>

#include "vattn/simd.hpp"

namespace vattn::simd {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double max_element(const double* x, std::size_t n);
void gemv(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);
}  // namespace scalar

#if VATTN_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double max_element(const double* x, std::size_t n);
void gemv(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);
}  // namespace avx2
#endif

#if VATTN_HAVE_NEON
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double max_element(const double* x, std::size_t n);
void gemv(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);
}  // namespace neon
#endif

}  // namespace vattn::simd
