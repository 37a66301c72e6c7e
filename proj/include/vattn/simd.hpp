#pragma once

// Vector arithmetic primitives behind every inner loop (scores, weighted
// sums, distances).  Each primitive has a scalar reference implementation
// and, where the build and CPU allow it, AVX2/FMA or NEON variants.  The
// variant is picked once at startup (best supported, overridable with the
// VATTN_SIMD environment variable: "scalar", "avx2", "neon") and can be
// switched at runtime with set_level().
//
// Vector variants reassociate sums, so results agree with the scalar
// reference to rounding, not bit-for-bit.  Within one level every call is
// deterministic.

#include <cstddef>
#include <span>
#include <string_view>

namespace vattn::simd {

enum class Level { Scalar, Avx2, Neon };

std::string_view to_string(Level level);
Level level_from_string(std::string_view name);

bool is_supported(Level level);
Level detected_level();
Level active_level();
/// Throws vattn::Error if the level is not supported on this build/CPU.
void set_level(Level level);

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // n >= 1
    double (*max_element)(const double* x, std::size_t n);
    // y[r] = <A[r, :], x> for a row-major rows x cols matrix
    void (*gemv)(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);
};

const KernelTable& table(Level level);
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline double squared_norm(std::span<const double> a) {
    return active().dot(a.data(), a.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double max_element(std::span<const double> x) {
    return active().max_element(x.data(), x.size());
}

}  // namespace vattn::simd
