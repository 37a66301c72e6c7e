#pragma once

// Practical sparse / randomized approximations of exponential attention:
// a sliding window, multi-round LSH bucketing and orthogonal random
// features.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vattn/core.hpp"
#include "vattn/rng.hpp"

namespace vattn {

inline constexpr std::uint64_t kLshStreamTag = 0x4c5348;  // "LSH"
inline constexpr std::uint64_t kOrfStreamTag = 0x4f5246;  // "ORF"

/// Keys [t - r/2, t + r/2] clamped to the sequence (and to <= t when
/// causal).  Always contains t.  r must be even and >= 2.
std::vector<Index> sliding_window_set(std::size_t length, Index t, std::size_t r, bool causal);
SelectionPlan sliding_window_plan(const AttentionInstance& inst, std::size_t r);
AttentionOutput sliding_window_attention(const KernelSpec& spec, const AttentionInstance& inst,
                                         std::size_t r);

struct LshConfig {
    std::size_t r = 2;                    // keys per round, r = 2B
    std::size_t rounds = 1;
    std::optional<std::size_t> buckets;   // C; defaults to 4L/r
    std::uint64_t seed = 0;
    bool deduplicate = false;             // count a (q, k) pair once across rounds

    std::size_t chunk() const noexcept { return r / 2; }
    std::size_t bucket_count(std::size_t length) const;
    void validate(std::size_t length) const;
};

/// argmax over the concatenation (-Rx, Rx), ties to the lowest position.
/// 0-based: position j < C/2 means -<R_j, x> won, j >= C/2 means
/// <R_{j - C/2}, x> won.
std::size_t lsh_hash(const Matrix& R, std::span<const double> x);

/// The (C/2) x d projection used in hash round `round` (0-based).
Matrix lsh_projection(const LshConfig& cfg, std::size_t round, std::size_t buckets,
                      std::size_t dim);

/// Only the exponential kernel is supported; the kernel's temperature scaling
/// is applied to the logits.
AttentionOutput lsh_attention(const KernelSpec& spec, const AttentionInstance& inst,
                              const LshConfig& cfg);

enum class OrfMode { IidGaussian, OrthogonalChi, Orthonormal };

std::string_view to_string(OrfMode mode);
OrfMode orf_mode_from_string(std::string_view name);

struct OrfConfig {
    std::size_t features = 1;
    OrfMode mode = OrfMode::OrthogonalChi;
    std::uint64_t seed = 0;

    void validate() const;
};

/// F x d projection.  iid_gaussian: standard normal entries.  orthonormal:
/// stacked blocks of up to d orthonormal rows, each obtained by
/// orthonormalizing a d x d gaussian block.  orthogonal_chi: the same rows
/// rescaled by independent chi(d) norms, so each row is marginally gaussian.
Matrix orf_matrix(OrfMode mode, std::size_t features, std::size_t dim, RngStream& rng);

/// (1/sqrt F) exp(Rx - |x|^2/2 - stabilizer), elementwise.
std::vector<double> orf_features(const Matrix& R, std::span<const double> x, double stabilizer);

/// Non-causal only.  Query features use stabilizer max(Rq); key features
/// share the global max over RK.  `extra_shift` is added to both.
AttentionOutput orf_attention(const KernelSpec& spec, const AttentionInstance& inst,
                              const OrfConfig& cfg);
AttentionOutput orf_attention(const KernelSpec& spec, const AttentionInstance& inst,
                              const Matrix& R, double extra_shift = 0.0);

}  // namespace vattn
