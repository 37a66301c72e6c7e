#pragma once

// Similarity kernels, their normalization into attention distributions,
// explicit feature maps and skewness statistics.

#include <span>
#include <vector>

#include "vattn/core.hpp"

namespace vattn {

/// Raw scores at or below this are treated as an all-zero denominator.
inline constexpr double kDegenerateScore = 1e-300;

struct SkewStats {
    double entropy = 0.0;     // natural log
    double max_weight = 0.0;
};

/// Multiplier applied to <q, k> before exponentiation: 1/sqrt(d) when the
/// spec asks for temperature scaling (both sides divided by d^{1/4}), else 1.
double logit_scale(const KernelSpec& spec, std::size_t dim);

/// kappa(q, k) >= 0.
double kernel_score(const KernelSpec& spec, std::span<const double> q, std::span<const double> k);

/// Normalized weights over a selection, aligned with the selection order.
struct SelectionWeights {
    std::vector<double> weights;
    bool degenerate = false;  // all raw scores <= kDegenerateScore; weights are uniform
};

struct AttentionWeights {
    Distribution alpha;
    bool degenerate = false;
};

/// Scores one query against a fixed key matrix.  Precomputes whatever the
/// kernel needs per key (elu features), so build one per instance and share
/// it across queries; it is immutable and safe to use concurrently.
class KeyScorer {
public:
    KeyScorer(const KernelSpec& spec, const Matrix& keys);

    const KernelSpec& spec() const noexcept { return spec_; }

    /// Weights over keys[indices], renormalized over the selection.
    SelectionWeights weights(std::span<const double> q, std::span<const Index> indices) const;
    /// Weights over keys [0, count).
    SelectionWeights prefix_weights(std::span<const double> q, std::size_t count) const;

private:
    void base_values(std::span<const double> q, std::span<const Index> indices,
                     std::vector<double>& out) const;
    void prefix_base_values(std::span<const double> q, std::size_t count,
                            std::vector<double>& out) const;
    SelectionWeights normalize(std::vector<double> base) const;

    KernelSpec spec_;
    const Matrix* keys_;
    Matrix features_;  // elu: phi(k) per key
    double scale_ = 1.0;
};

/// Full-length distribution: alpha_i = kappa(q, k_i) / sum_{j in allowed}
/// kappa(q, k_j) for i in allowed, 0 elsewhere.
AttentionWeights attention_weights(const KernelSpec& spec, std::span<const double> q,
                                   const Matrix& K, std::span<const Index> allowed);

/// Softmax with the max logit subtracted first.
std::vector<double> softmax_from_logits(std::span<const double> logits);

/// Explicit feature map with <Phi(x), Phi(y)> = kappa(x, y).  Supported for
/// elu (d features) and polynomial degree 2 (d^2 pairwise products).
std::vector<double> feature_map(const KernelSpec& spec, std::span<const double> x);

SkewStats skew_stats(const Distribution& alpha);
SkewStats skew_stats(std::span<const double> weights);

}  // namespace vattn
