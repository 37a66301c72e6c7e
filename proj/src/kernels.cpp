#include "vattn/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "vattn/simd.hpp"

namespace vattn {

namespace {

double int_power(double x, int n) {
    double result = 1.0;
    while (n > 0) {
        if (n & 1) result *= x;
        x *= x;
        n >>= 1;
    }
    return result;
}

inline double elu_plus_one(double x) { return x > 0.0 ? x + 1.0 : std::exp(x); }

void elu_features(std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = elu_plus_one(x[i]);
}

void require_same_dim(std::span<const double> q, std::span<const double> k) {
    if (q.size() != k.size()) {
        throw Error(ErrorCode::ShapeMismatch, "query and key dimensions differ (" +
                                                  std::to_string(q.size()) + " vs " +
                                                  std::to_string(k.size()) + ")");
    }
}

std::vector<double> uniform_weights(std::size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

void normalize_in_place(std::vector<double>& w) {
    double sum = 0.0;
    for (double x : w) sum += x;
    const double inv = 1.0 / sum;
    for (double& x : w) x *= inv;
}

}  // namespace

double logit_scale(const KernelSpec& spec, std::size_t dim) {
    if (spec.family == KernelFamily::Exponential && spec.temperature_scaling) {
        return 1.0 / std::sqrt(static_cast<double>(dim));
    }
    return 1.0;
}

double kernel_score(const KernelSpec& spec, std::span<const double> q, std::span<const double> k) {
    spec.validate();
    require_same_dim(q, k);
    switch (spec.family) {
        case KernelFamily::Exponential:
            return std::exp(logit_scale(spec, q.size()) * simd::dot(q, k));
        case KernelFamily::Polynomial: {
            const int degree = *spec.degree;
            if (degree == 0) return 1.0;
            return int_power(simd::dot(q, k), degree);
        }
        case KernelFamily::Elu: {
            std::vector<double> fq(q.size());
            std::vector<double> fk(k.size());
            elu_features(q, fq);
            elu_features(k, fk);
            return simd::dot(fq, fk);
        }
    }
    return 0.0;
}

KeyScorer::KeyScorer(const KernelSpec& spec, const Matrix& keys) : spec_(spec), keys_(&keys) {
    spec_.validate();
    scale_ = logit_scale(spec_, keys.cols());
    if (spec_.family == KernelFamily::Elu) {
        features_ = Matrix(keys.rows(), keys.cols());
        for (std::size_t i = 0; i < keys.rows(); ++i) elu_features(keys.row(i), features_.row(i));
    }
}

void KeyScorer::base_values(std::span<const double> q, std::span<const Index> indices,
                            std::vector<double>& out) const {
    out.resize(indices.size());
    if (spec_.family == KernelFamily::Elu) {
        std::vector<double> fq(q.size());
        elu_features(q, fq);
        for (std::size_t j = 0; j < indices.size(); ++j) out[j] = simd::dot(fq, features_.row(indices[j]));
        return;
    }
    for (std::size_t j = 0; j < indices.size(); ++j) out[j] = simd::dot(q, keys_->row(indices[j]));
}

void KeyScorer::prefix_base_values(std::span<const double> q, std::size_t count,
                                   std::vector<double>& out) const {
    out.resize(count);
    const std::size_t d = keys_->cols();
    if (spec_.family == KernelFamily::Elu) {
        std::vector<double> fq(q.size());
        elu_features(q, fq);
        simd::active().gemv(features_.data().data(), count, d, fq.data(), out.data());
        return;
    }
    simd::active().gemv(keys_->data().data(), count, d, q.data(), out.data());
}

SelectionWeights KeyScorer::normalize(std::vector<double> base) const {
    SelectionWeights result;
    const std::size_t n = base.size();
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "attention over an empty selection");
    switch (spec_.family) {
        case KernelFamily::Exponential: {
            for (double& x : base) x *= scale_;
            const double m = simd::max_element(base);
            for (double& x : base) x = std::exp(x - m);
            normalize_in_place(base);
            result.weights = std::move(base);
            return result;
        }
        case KernelFamily::Polynomial: {
            const int degree = *spec_.degree;
            if (degree == 0) {
                result.weights = uniform_weights(n);
                return result;
            }
            double m = 0.0;
            for (double x : base) m = std::max(m, std::abs(x));
            // The largest raw score is m^C; compare in log space to avoid underflow.
            if (m == 0.0 || degree * std::log(m) <= std::log(kDegenerateScore)) {
                result.weights = uniform_weights(n);
                result.degenerate = true;
                return result;
            }
            for (double& x : base) x = int_power(x / m, degree);
            normalize_in_place(base);
            result.weights = std::move(base);
            return result;
        }
        case KernelFamily::Elu: {
            double m = 0.0;
            for (double x : base) m = std::max(m, x);
            if (m <= kDegenerateScore) {
                result.weights = uniform_weights(n);
                result.degenerate = true;
                return result;
            }
            normalize_in_place(base);
            result.weights = std::move(base);
            return result;
        }
    }
    return result;
}

SelectionWeights KeyScorer::weights(std::span<const double> q, std::span<const Index> indices) const {
    std::vector<double> base;
    base_values(q, indices, base);
    return normalize(std::move(base));
}

SelectionWeights KeyScorer::prefix_weights(std::span<const double> q, std::size_t count) const {
    std::vector<double> base;
    prefix_base_values(q, count, base);
    return normalize(std::move(base));
}

AttentionWeights attention_weights(const KernelSpec& spec, std::span<const double> q,
                                   const Matrix& K, std::span<const Index> allowed) {
    if (allowed.empty()) throw Error(ErrorCode::InvalidArgument, "allowed index set is empty");
    if (q.size() != K.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "query dimension does not match keys");
    }
    for (Index i : allowed) {
        if (i >= K.rows()) throw Error(ErrorCode::InvalidArgument, "allowed index out of range");
    }
    const KeyScorer scorer(spec, K);
    SelectionWeights sel = scorer.weights(q, allowed);
    std::vector<double> full(K.rows(), 0.0);
    for (std::size_t j = 0; j < allowed.size(); ++j) full[allowed[j]] += sel.weights[j];
    return AttentionWeights{Distribution::make(std::move(full)), sel.degenerate};
}

std::vector<double> softmax_from_logits(std::span<const double> logits) {
    if (logits.empty()) throw Error(ErrorCode::InvalidArgument, "softmax of an empty vector");
    std::vector<double> out(logits.begin(), logits.end());
    const double m = simd::max_element(out);
    for (double& x : out) x = std::exp(x - m);
    normalize_in_place(out);
    return out;
}

std::vector<double> feature_map(const KernelSpec& spec, std::span<const double> x) {
    spec.validate();
    if (spec.family == KernelFamily::Elu) {
        std::vector<double> out(x.size());
        elu_features(x, out);
        return out;
    }
    if (spec.family == KernelFamily::Polynomial && *spec.degree == 2) {
        std::vector<double> out;
        out.reserve(x.size() * x.size());
        for (double a : x) {
            for (double b : x) out.push_back(a * b);
        }
        return out;
    }
    throw Error(ErrorCode::Unsupported,
                "no finite explicit feature map for kernel " + spec.describe() +
                    " (use ORF attention for a randomized exponential map)");
}

SkewStats skew_stats(std::span<const double> weights) {
    SkewStats stats;
    for (double w : weights) {
        if (w > 0.0) stats.entropy -= w * std::log(w);
        stats.max_weight = std::max(stats.max_weight, w);
    }
    stats.entropy = std::max(stats.entropy, 0.0);
    return stats;
}

SkewStats skew_stats(const Distribution& alpha) { return skew_stats(alpha.weights()); }

}  // namespace vattn
