#include "vattn/approximators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "vattn/attention.hpp"
#include "vattn/kernels.hpp"
#include "vattn/parallel.hpp"
#include "vattn/simd.hpp"

namespace vattn {

namespace {

void require_exponential(const KernelSpec& spec, std::string_view who) {
    spec.validate();
    if (spec.family != KernelFamily::Exponential) {
        throw Error(ErrorCode::Unsupported,
                    std::string(who) + " approximates the exponential kernel only, got " +
                        spec.describe());
    }
}

void require_window(std::size_t r) {
    if (r < 2 || r % 2 != 0) {
        throw Error(ErrorCode::InvalidArgument,
                    "sliding window needs an even r >= 2, got " + std::to_string(r));
    }
}

}  // namespace

std::vector<Index> sliding_window_set(std::size_t length, Index t, std::size_t r, bool causal) {
    require_window(r);
    if (t >= length) throw Error(ErrorCode::InvalidArgument, "query index out of range");
    const std::size_t half = r / 2;
    const Index lo = t >= half ? t - half : 0;
    const Index hi = causal ? t : std::min(length - 1, t + half);
    std::vector<Index> set(hi - lo + 1);
    std::iota(set.begin(), set.end(), lo);
    return set;
}

SelectionPlan sliding_window_plan(const AttentionInstance& inst, std::size_t r) {
    require_window(r);
    std::vector<std::vector<Index>> sets(inst.length());
    for (Index t = 0; t < inst.length(); ++t) {
        sets[t] = sliding_window_set(inst.length(), t, r, inst.causal());
    }
    return SelectionPlan::make(std::move(sets), inst.length(), inst.causal());
}

AttentionOutput sliding_window_attention(const KernelSpec& spec, const AttentionInstance& inst,
                                         std::size_t r) {
    return sparse_attention(spec, inst, sliding_window_plan(inst, r));
}

std::size_t LshConfig::bucket_count(std::size_t length) const {
    return buckets ? *buckets : 4 * length / r;
}

void LshConfig::validate(std::size_t length) const {
    if (r < 2 || r % 2 != 0) {
        throw Error(ErrorCode::InvalidArgument, "LSH needs an even r >= 2, got " + std::to_string(r));
    }
    if (length % chunk() != 0) {
        throw Error(ErrorCode::InvalidArgument, "LSH chunk size B=" + std::to_string(chunk()) +
                                                    " does not divide L=" + std::to_string(length));
    }
    if (rounds < 1) throw Error(ErrorCode::InvalidArgument, "LSH needs at least one round");
    const std::size_t c = bucket_count(length);
    if (c < 2 || c % 2 != 0) {
        throw Error(ErrorCode::InvalidArgument,
                    "LSH bucket count must be even and >= 2, got " + std::to_string(c));
    }
}

std::size_t lsh_hash(const Matrix& R, std::span<const double> x) {
    if (R.rows() == 0) throw Error(ErrorCode::InvalidArgument, "LSH projection has no rows");
    if (R.cols() != x.size()) throw Error(ErrorCode::ShapeMismatch, "LSH projection dimension mismatch");
    const std::size_t half = R.rows();
    std::vector<double> proj(half);
    simd::active().gemv(R.data().data(), half, R.cols(), x.data(), proj.data());
    // Scan (-Rx, Rx) in order; strict comparison keeps the first maximum.
    std::size_t best = 0;
    double best_value = -proj[0];
    for (std::size_t j = 1; j < half; ++j) {
        if (-proj[j] > best_value) {
            best_value = -proj[j];
            best = j;
        }
    }
    for (std::size_t j = 0; j < half; ++j) {
        if (proj[j] > best_value) {
            best_value = proj[j];
            best = half + j;
        }
    }
    return best;
}

Matrix lsh_projection(const LshConfig& cfg, std::size_t round, std::size_t buckets,
                      std::size_t dim) {
    RngStream rng(cfg.seed, stream_key(kLshStreamTag, round));
    return gaussian_matrix(rng, buckets / 2, dim);
}

AttentionOutput lsh_attention(const KernelSpec& spec, const AttentionInstance& inst,
                              const LshConfig& cfg) {
    require_exponential(spec, "LSH attention");
    const std::size_t L = inst.length();
    const std::size_t d = inst.dim();
    cfg.validate(L);
    const std::size_t B = cfg.chunk();
    const std::size_t C = cfg.bucket_count(L);
    const Matrix& Q = inst.queries();
    const Matrix& K = inst.keys();

    // candidates[t]: keys met by query t, one entry per (round, meeting).
    std::vector<std::vector<Index>> candidates(L);
    std::vector<std::vector<Index>> first_round(L);
    std::vector<std::size_t> qhash(L), khash(L), qorder(L), korder(L);
    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        const Matrix R = lsh_projection(cfg, round, C, d);
        for (Index t = 0; t < L; ++t) {
            qhash[t] = lsh_hash(R, Q.row(t));
            khash[t] = lsh_hash(R, K.row(t));
        }
        std::iota(qorder.begin(), qorder.end(), Index{0});
        std::iota(korder.begin(), korder.end(), Index{0});
        std::stable_sort(qorder.begin(), qorder.end(),
                         [&](Index a, Index b) { return qhash[a] < qhash[b]; });
        std::stable_sort(korder.begin(), korder.end(),
                         [&](Index a, Index b) { return khash[a] < khash[b]; });
        for (std::size_t p = 0; p < L; ++p) {
            const Index t = qorder[p];
            const std::size_t block = p / B;
            const std::size_t begin = (block == 0 ? 0 : block - 1) * B;
            const std::size_t end = (block + 1) * B;
            for (std::size_t s = begin; s < end; ++s) {
                candidates[t].push_back(korder[s]);
                if (round == 0) first_round[t].push_back(korder[s]);
            }
        }
    }

    const double scale = logit_scale(spec, d);
    AttentionOutput result{Matrix(L, d), {}};
    std::vector<char> fallback(L, 0);
    parallel_for(L, [&](Index t) {
        std::vector<Index>& keys = candidates[t];
        if (inst.causal()) {
            std::erase_if(keys, [t](Index i) { return i > t; });
        }
        if (cfg.deduplicate) {
            std::sort(keys.begin(), keys.end());
            keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        }
        auto out = result.values.row(t);
        if (keys.empty()) {
            // Every candidate was masked: average the first round's keys.
            std::vector<Index> rows = first_round[t];
            std::sort(rows.begin(), rows.end());
            std::vector<double> w(rows.size(), 1.0 / static_cast<double>(rows.size()));
            combine_rows(inst.values(), rows, w, out);
            fallback[t] = 1;
            return;
        }
        const auto q = Q.row(t);
        std::vector<double> logits(keys.size());
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < keys.size(); ++j) {
            logits[j] = scale * simd::dot(q, K.row(keys[j]));
            max_logit = std::max(max_logit, logits[j]);
        }
        double total = 0.0;
        for (double& l : logits) {
            l = std::exp(l - max_logit);
            total += l;
        }
        for (double& l : logits) l /= total;
        combine_rows(inst.values(), keys, logits, out);
    });
    result.flags = collect_flags(fallback, FlagEvent::NoLshCandidates);
    return result;
}

std::string_view to_string(OrfMode mode) {
    switch (mode) {
        case OrfMode::IidGaussian: return "iid_gaussian";
        case OrfMode::OrthogonalChi: return "orthogonal_chi";
        case OrfMode::Orthonormal: return "orthonormal";
    }
    return "unknown";
}

OrfMode orf_mode_from_string(std::string_view name) {
    if (name == "iid_gaussian") return OrfMode::IidGaussian;
    if (name == "orthogonal_chi") return OrfMode::OrthogonalChi;
    if (name == "orthonormal") return OrfMode::Orthonormal;
    throw Error(ErrorCode::InvalidArgument, "unknown ORF mode '" + std::string(name) + "'");
}

void OrfConfig::validate() const {
    if (features < 1) throw Error(ErrorCode::InvalidArgument, "ORF needs at least one feature");
}

Matrix orf_matrix(OrfMode mode, std::size_t features, std::size_t dim, RngStream& rng) {
    if (features < 1 || dim < 1) {
        throw Error(ErrorCode::InvalidArgument, "ORF matrix needs F >= 1 and d >= 1");
    }
    if (mode == OrfMode::IidGaussian) return gaussian_matrix(rng, features, dim);

    Matrix R(features, dim);
    for (std::size_t start = 0; start < features; start += dim) {
        Matrix block = gaussian_matrix(rng, dim, dim);
        // Modified Gram-Schmidt over rows, two passes.
        for (std::size_t i = 0; i < dim; ++i) {
            auto row = block.row(i);
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t j = 0; j < i; ++j) {
                    simd::axpy(-simd::dot(block.row(j), row), block.row(j), row);
                }
            }
            const double norm = std::sqrt(simd::squared_norm(row));
            if (norm == 0.0) throw Error(ErrorCode::SolverFailure, "degenerate gaussian block");
            for (double& x : row) x /= norm;
        }
        const std::size_t take = std::min(dim, features - start);
        for (std::size_t i = 0; i < take; ++i) {
            auto dst = R.row(start + i);
            std::copy(block.row(i).begin(), block.row(i).end(), dst.begin());
        }
        if (mode == OrfMode::OrthogonalChi) {
            for (std::size_t i = 0; i < take; ++i) {
                double sq = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double g = rng.normal();
                    sq += g * g;
                }
                const double chi = std::sqrt(sq);
                for (double& x : R.row(start + i)) x *= chi;
            }
        }
    }
    return R;
}

std::vector<double> orf_features(const Matrix& R, std::span<const double> x, double stabilizer) {
    if (R.cols() != x.size()) throw Error(ErrorCode::ShapeMismatch, "ORF projection dimension mismatch");
    const std::size_t F = R.rows();
    std::vector<double> phi(F);
    simd::active().gemv(R.data().data(), F, R.cols(), x.data(), phi.data());
    const double half_norm = 0.5 * simd::squared_norm(x);
    const double inv_sqrt_f = 1.0 / std::sqrt(static_cast<double>(F));
    for (double& p : phi) p = inv_sqrt_f * std::exp(p - half_norm - stabilizer);
    return phi;
}

AttentionOutput orf_attention(const KernelSpec& spec, const AttentionInstance& inst,
                              const OrfConfig& cfg) {
    cfg.validate();
    RngStream rng(cfg.seed, stream_key(kOrfStreamTag));
    const Matrix R = orf_matrix(cfg.mode, cfg.features, inst.dim(), rng);
    return orf_attention(spec, inst, R, 0.0);
}

AttentionOutput orf_attention(const KernelSpec& spec, const AttentionInstance& inst,
                              const Matrix& R, double extra_shift) {
    require_exponential(spec, "ORF attention");
    if (inst.causal()) {
        throw Error(ErrorCode::Unsupported, "ORF attention is implemented for non-causal instances only");
    }
    const std::size_t L = inst.length();
    const std::size_t d = inst.dim();
    const std::size_t F = R.rows();
    if (R.cols() != d) throw Error(ErrorCode::ShapeMismatch, "ORF projection dimension mismatch");
    // Dividing q and k by d^{1/4} each multiplies their inner product by 1/sqrt(d).
    const double input_scale = std::sqrt(logit_scale(spec, d));

    auto scaled = [&](const Matrix& M, Index i) {
        std::vector<double> x(M.row(i).begin(), M.row(i).end());
        for (double& v : x) v *= input_scale;
        return x;
    };

    double key_stabilizer = -std::numeric_limits<double>::infinity();
    {
        std::vector<double> proj(F);
        for (Index i = 0; i < L; ++i) {
            const std::vector<double> k = scaled(inst.keys(), i);
            simd::active().gemv(R.data().data(), F, d, k.data(), proj.data());
            key_stabilizer = std::max(key_stabilizer, simd::max_element(proj));
        }
    }
    key_stabilizer += extra_shift;

    // Linear form: KV = Phi(K)^T V (F x d) and ksum = sum_i Phi(k_i).
    Matrix kv(F, d);
    std::vector<double> ksum(F, 0.0);
    for (Index i = 0; i < L; ++i) {
        const std::vector<double> phi = orf_features(R, scaled(inst.keys(), i), key_stabilizer);
        const auto v = inst.values().row(i);
        for (std::size_t f = 0; f < F; ++f) {
            ksum[f] += phi[f];
            simd::axpy(phi[f], v, kv.row(f));
        }
    }

    AttentionOutput result{Matrix(L, d), {}};
    std::vector<char> degenerate(L, 0);
    parallel_for(L, [&](Index t) {
        const std::vector<double> q = scaled(inst.queries(), t);
        std::vector<double> proj(F);
        simd::active().gemv(R.data().data(), F, d, q.data(), proj.data());
        const double stabilizer = simd::max_element(proj) + extra_shift;
        const std::vector<double> phi = orf_features(R, q, stabilizer);
        const double denom = simd::dot(phi, ksum);
        auto out = result.values.row(t);
        std::fill(out.begin(), out.end(), 0.0);
        if (!(denom > 0.0) || !std::isfinite(denom)) {
            for (Index i = 0; i < L; ++i) simd::axpy(1.0 / static_cast<double>(L), inst.values().row(i), out);
            degenerate[t] = 1;
            return;
        }
        for (std::size_t f = 0; f < F; ++f) simd::axpy(phi[f] / denom, kv.row(f), out);
    });
    result.flags = collect_flags(degenerate, FlagEvent::DegenerateDenominator);
    return result;
}

}  // namespace vattn
