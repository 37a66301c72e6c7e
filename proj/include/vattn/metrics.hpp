#pragma once

// Error measurements of approximate attention outputs against exact
// attention, and a uniform way to run any approximator at a budget r.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vattn/approximators.hpp"
#include "vattn/core.hpp"
#include "vattn/kernels.hpp"

namespace vattn {

/// Added to |o| in the relative error denominator.
inline constexpr double kRelativeErrorEpsilon = 1e-12;

struct ErrorSummary {
    std::vector<double> per_query_sq_error;        // |o_t - o~_t|^2
    std::vector<double> per_query_relative_error;  // |o_t - o~_t| / (|o_t| + eps)
    double mean_sq_error = 0.0;
    double mean_relative_error = 0.0;
};

ErrorSummary compare(const Matrix& exact, const Matrix& approx);

enum class ApproximatorFamily { OptimalVOblivious, OptimalVAware, SlidingWindow, Lsh, Orf };

std::string_view to_string(ApproximatorFamily family);
ApproximatorFamily approximator_family_from_string(std::string_view name);

/// An approximator plus the parameters it needs besides the budget r.  For
/// LSH r is the per-round key count (2B); for ORF it is the feature count.
struct ApproximatorSpec {
    ApproximatorFamily family = ApproximatorFamily::OptimalVOblivious;
    std::size_t rounds = 1;                   // LSH
    std::optional<std::size_t> buckets;       // LSH
    bool deduplicate = false;                 // LSH
    OrfMode orf_mode = OrfMode::OrthogonalChi;
    std::uint64_t seed = 0;                   // LSH, ORF

    static ApproximatorSpec of(ApproximatorFamily family) {
        ApproximatorSpec spec;
        spec.family = family;
        return spec;
    }

    /// Throws unless r satisfies the family's preconditions on this instance.
    void validate(const KernelSpec& kernel, const AttentionInstance& inst, std::size_t r) const;
};

AttentionOutput apply(const ApproximatorSpec& approx, const KernelSpec& kernel,
                      const AttentionInstance& inst, std::size_t r);

/// Mean entropy and mean max weight of the exact attention distributions.
SkewStats mean_skew(const KernelSpec& kernel, const AttentionInstance& inst);

struct ApproximationReport {
    KernelSpec kernel;
    ApproximatorSpec approximator;
    std::size_t r = 0;
    ErrorSummary errors;
    double skew_entropy_mean = 0.0;
    double skew_max_mean = 0.0;
    std::vector<QueryFlag> flags;
};

/// Runs `approx` at budget r and measures it against `exact` (the output of
/// exact_attention for the same kernel and instance).
ApproximationReport evaluate(const ApproximatorSpec& approx, const KernelSpec& kernel,
                             const AttentionInstance& inst, std::size_t r,
                             const AttentionOutput& exact, const SkewStats& skew);

struct CurvePoint {
    std::size_t r = 0;
    double mean_sq_error = 0.0;
    double mean_relative_error = 0.0;
};

std::vector<CurvePoint> error_curve(const KernelSpec& kernel, const AttentionInstance& inst,
                                    const ApproximatorSpec& approx, std::span<const std::size_t> rs);

}  // namespace vattn
