#include "vattn/metrics.hpp"

#include <cmath>

#include "vattn/attention.hpp"
#include "vattn/oracles.hpp"
#include "vattn/parallel.hpp"
#include "vattn/simd.hpp"

namespace vattn {

namespace {

LshConfig lsh_config(const ApproximatorSpec& approx, std::size_t r) {
    LshConfig cfg;
    cfg.r = r;
    cfg.rounds = approx.rounds;
    cfg.buckets = approx.buckets;
    cfg.seed = approx.seed;
    cfg.deduplicate = approx.deduplicate;
    return cfg;
}

OrfConfig orf_config(const ApproximatorSpec& approx, std::size_t r) {
    return OrfConfig{r, approx.orf_mode, approx.seed};
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

}  // namespace

ErrorSummary compare(const Matrix& exact, const Matrix& approx) {
    if (exact.rows() != approx.rows() || exact.cols() != approx.cols()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "compare: exact is " + std::to_string(exact.rows()) + "x" +
                        std::to_string(exact.cols()) + ", approximation is " +
                        std::to_string(approx.rows()) + "x" + std::to_string(approx.cols()));
    }
    const std::size_t L = exact.rows();
    ErrorSummary summary;
    summary.per_query_sq_error.resize(L);
    summary.per_query_relative_error.resize(L);
    for (std::size_t t = 0; t < L; ++t) {
        const double sq = simd::squared_distance(exact.row(t), approx.row(t));
        summary.per_query_sq_error[t] = sq;
        summary.per_query_relative_error[t] =
            std::sqrt(sq) / (std::sqrt(simd::squared_norm(exact.row(t))) + kRelativeErrorEpsilon);
    }
    summary.mean_sq_error = mean(summary.per_query_sq_error);
    summary.mean_relative_error = mean(summary.per_query_relative_error);
    return summary;
}

std::string_view to_string(ApproximatorFamily family) {
    switch (family) {
        case ApproximatorFamily::OptimalVOblivious: return "optimal_v_oblivious";
        case ApproximatorFamily::OptimalVAware: return "optimal_v_aware";
        case ApproximatorFamily::SlidingWindow: return "sliding_window";
        case ApproximatorFamily::Lsh: return "lsh";
        case ApproximatorFamily::Orf: return "orf";
    }
    return "unknown";
}

ApproximatorFamily approximator_family_from_string(std::string_view name) {
    for (auto f : {ApproximatorFamily::OptimalVOblivious, ApproximatorFamily::OptimalVAware,
                   ApproximatorFamily::SlidingWindow, ApproximatorFamily::Lsh,
                   ApproximatorFamily::Orf}) {
        if (name == to_string(f)) return f;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown approximator '" + std::string(name) + "'");
}

void ApproximatorSpec::validate(const KernelSpec& kernel, const AttentionInstance& inst,
                                std::size_t r) const {
    kernel.validate();
    switch (family) {
        case ApproximatorFamily::OptimalVOblivious:
            if (r < 1) throw Error(ErrorCode::InvalidArgument, "optimal_v_oblivious needs r >= 1");
            break;
        case ApproximatorFamily::OptimalVAware:
            v_aware_regime(inst.length(), inst.dim(), r);
            break;
        case ApproximatorFamily::SlidingWindow:
            if (r < 2 || r % 2 != 0) {
                throw Error(ErrorCode::InvalidArgument,
                            "sliding_window needs an even r >= 2, got " + std::to_string(r));
            }
            break;
        case ApproximatorFamily::Lsh:
            if (kernel.family != KernelFamily::Exponential) {
                throw Error(ErrorCode::Unsupported, "lsh supports the exponential kernel only");
            }
            lsh_config(*this, r).validate(inst.length());
            break;
        case ApproximatorFamily::Orf:
            if (kernel.family != KernelFamily::Exponential) {
                throw Error(ErrorCode::Unsupported, "orf supports the exponential kernel only");
            }
            if (inst.causal()) throw Error(ErrorCode::Unsupported, "orf supports non-causal instances only");
            orf_config(*this, r).validate();
            break;
    }
}

AttentionOutput apply(const ApproximatorSpec& approx, const KernelSpec& kernel,
                      const AttentionInstance& inst, std::size_t r) {
    switch (approx.family) {
        case ApproximatorFamily::OptimalVOblivious: return optimal_v_oblivious(kernel, inst, r);
        case ApproximatorFamily::OptimalVAware: return optimal_v_aware(kernel, inst, r);
        case ApproximatorFamily::SlidingWindow: return sliding_window_attention(kernel, inst, r);
        case ApproximatorFamily::Lsh: return lsh_attention(kernel, inst, lsh_config(approx, r));
        case ApproximatorFamily::Orf: return orf_attention(kernel, inst, orf_config(approx, r));
    }
    throw Error(ErrorCode::InvalidArgument, "unknown approximator");
}

SkewStats mean_skew(const KernelSpec& kernel, const AttentionInstance& inst) {
    const std::size_t L = inst.length();
    const KeyScorer scorer(kernel, inst.keys());
    std::vector<double> entropy(L), max_weight(L);
    parallel_for(L, [&](Index t) {
        const SelectionWeights sel = scorer.prefix_weights(inst.queries().row(t), inst.allowed_count(t));
        const SkewStats s = skew_stats(sel.weights);
        entropy[t] = s.entropy;
        max_weight[t] = s.max_weight;
    });
    return SkewStats{mean(entropy), mean(max_weight)};
}

ApproximationReport evaluate(const ApproximatorSpec& approx, const KernelSpec& kernel,
                             const AttentionInstance& inst, std::size_t r,
                             const AttentionOutput& exact, const SkewStats& skew) {
    approx.validate(kernel, inst, r);
    AttentionOutput out = apply(approx, kernel, inst, r);
    ApproximationReport report;
    report.kernel = kernel;
    report.approximator = approx;
    report.r = r;
    report.errors = compare(exact.values, out.values);
    report.skew_entropy_mean = skew.entropy;
    report.skew_max_mean = skew.max_weight;
    report.flags = std::move(out.flags);
    return report;
}

std::vector<CurvePoint> error_curve(const KernelSpec& kernel, const AttentionInstance& inst,
                                    const ApproximatorSpec& approx, std::span<const std::size_t> rs) {
    for (std::size_t r : rs) approx.validate(kernel, inst, r);
    const AttentionOutput exact = exact_attention(kernel, inst);
    std::vector<CurvePoint> curve;
    curve.reserve(rs.size());
    for (std::size_t r : rs) {
        const ErrorSummary e = compare(exact.values, apply(approx, kernel, inst, r).values);
        curve.push_back({r, e.mean_sq_error, e.mean_relative_error});
    }
    return curve;
}

}  // namespace vattn
