#pragma once

// Shared helpers for the test suites.  The reference implementations here
// are deliberately naive (plain loops, long double) and share no code with
// the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "vattn/core.hpp"

namespace support {

inline vattn::Matrix random_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t cols,
                                   double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    vattn::Matrix m(rows, cols);
    for (double& x : m.data()) x = normal(gen);
    return m;
}

inline vattn::AttentionInstance random_instance(std::uint64_t seed, std::size_t L, std::size_t d,
                                                bool causal = false, double scale = 1.0) {
    std::mt19937_64 gen(seed);
    vattn::Matrix Q = random_matrix(gen, L, d, scale);
    vattn::Matrix K = random_matrix(gen, L, d, scale);
    vattn::Matrix V = random_matrix(gen, L, d);
    return vattn::AttentionInstance::make(std::move(Q), std::move(K), std::move(V), causal);
}

inline long double naive_dot(std::span<const double> a, std::span<const double> b) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
    return s;
}

/// Unnormalized log-score for the exponential family, raw score otherwise.
inline long double naive_raw(const vattn::KernelSpec& spec, std::span<const double> q,
                             std::span<const double> k) {
    switch (spec.family) {
        case vattn::KernelFamily::Exponential: {
            long double s = naive_dot(q, k);
            if (spec.temperature_scaling) s /= std::sqrt(static_cast<long double>(q.size()));
            return s;
        }
        case vattn::KernelFamily::Polynomial:
            return std::pow(naive_dot(q, k), static_cast<long double>(*spec.degree));
        case vattn::KernelFamily::Elu: {
            long double s = 0.0L;
            for (std::size_t i = 0; i < q.size(); ++i) {
                const long double a = q[i] > 0 ? q[i] + 1.0L : std::exp(static_cast<long double>(q[i]));
                const long double b = k[i] > 0 ? k[i] + 1.0L : std::exp(static_cast<long double>(k[i]));
                s += a * b;
            }
            return s;
        }
    }
    return 0.0L;
}

/// Weights over `keys` by the textbook formula.
inline std::vector<long double> naive_weights(const vattn::KernelSpec& spec, std::span<const double> q,
                                              const vattn::Matrix& K, const std::vector<std::size_t>& keys) {
    std::vector<long double> w(keys.size());
    for (std::size_t j = 0; j < keys.size(); ++j) w[j] = naive_raw(spec, q, K.row(keys[j]));
    if (spec.family == vattn::KernelFamily::Exponential) {
        const long double m = *std::max_element(w.begin(), w.end());
        for (auto& x : w) x = std::exp(x - m);
    }
    long double total = 0.0L;
    for (auto x : w) total += x;
    for (auto& x : w) x /= total;
    return w;
}

inline vattn::Matrix naive_sparse(const vattn::KernelSpec& spec, const vattn::AttentionInstance& inst,
                                  const std::vector<std::vector<std::size_t>>& sets) {
    const std::size_t L = inst.length();
    const std::size_t d = inst.dim();
    vattn::Matrix out(L, d);
    for (std::size_t t = 0; t < L; ++t) {
        const auto w = naive_weights(spec, inst.queries().row(t), inst.keys(), sets[t]);
        for (std::size_t c = 0; c < d; ++c) {
            long double acc = 0.0L;
            for (std::size_t j = 0; j < sets[t].size(); ++j) acc += w[j] * inst.values()(sets[t][j], c);
            out(t, c) = static_cast<double>(acc);
        }
    }
    return out;
}

inline vattn::Matrix naive_attention(const vattn::KernelSpec& spec, const vattn::AttentionInstance& inst) {
    std::vector<std::vector<std::size_t>> sets(inst.length());
    for (std::size_t t = 0; t < inst.length(); ++t) {
        const std::size_t n = inst.causal() ? t + 1 : inst.length();
        for (std::size_t i = 0; i < n; ++i) sets[t].push_back(i);
    }
    return naive_sparse(spec, inst, sets);
}

inline double max_abs_diff(const vattn::Matrix& a, const vattn::Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline double sq_norm(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return s;
}

inline double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace support
