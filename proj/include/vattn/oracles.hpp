#pragma once

// Optimal sparse approximations of attention, with and without access to
// the value vectors.
//
// The value-oblivious oracle keeps, per query, the r keys with the largest
// attention weights and renormalizes over them.  The value-aware oracle
// instead looks for the point closest to the true output o among all convex
// combinations of at most r value vectors:
//   * r = 1: the value row nearest to o;
//   * r >= d + 1: o itself, rewritten on at most d + 1 rows (Caratheodory);
//   * otherwise: exhaustive search over supports of size r, each solved as a
//     simplex-constrained least-squares problem (small instances only).
//
// All ties break toward the lowest index or lexicographically smallest
// support.

#include <cstdint>
#include <span>
#include <vector>

#include "vattn/core.hpp"

namespace vattn {

/// Upper bound on binomial(L, r) for the exhaustive value-aware search.
inline constexpr std::uint64_t kMaxBruteForceSupports = 1'000'000;

/// Indices of the r largest positive weights (ties toward the lower index),
/// returned in ascending order.  Size is min(r, number of positive weights).
std::vector<Index> top_r_selection(std::span<const double> weights, std::size_t r);
std::vector<Index> top_r_selection(const Distribution& alpha, std::size_t r);

AttentionOutput optimal_v_oblivious(const KernelSpec& spec, const AttentionInstance& inst,
                                    std::size_t r);

/// ||v_i||^2 (0.5 - alpha_i) - sum_{j != i} alpha_j <v_i, v_j>.  Equal to
/// (||o - v_i||^2 - ||o||^2) / 2 for o = sum_j alpha_j v_j, so its argmin is
/// the nearest value row.
double eq3_objective(Index i, const Distribution& alpha, const Matrix& V);

struct NearestValue {
    Index index = 0;
    double sq_distance = 0.0;
};

/// Row of V (restricted to `allowed`) closest to o; ties to the lower index.
NearestValue optimal_v_aware_1(std::span<const double> o, const Matrix& V,
                               std::span<const Index> allowed);

struct SimplexFit {
    SimplexCombination combination;  // aligned with the requested rows
    double sq_error = 0.0;           // ||o - sum beta_j v_j||^2
    std::size_t iterations = 0;
};

/// argmin ||o - sum_j beta_j V[rows[j]]||^2 over the probability simplex.
/// Primal active-set method started from the nearest vertex, entering
/// variables chosen by lowest index (Bland).  Stops when no inactive
/// coordinate violates the KKT conditions by more than 1e-10 (relative to
/// the data scale); fails with ErrorCode::SolverFailure after 10 m^2 steps.
SimplexFit simplex_lsq(std::span<const double> o, const Matrix& V, std::span<const Index> rows);
SimplexFit simplex_lsq(std::span<const double> o, const Matrix& V_support);

/// Rewrites sum_i alpha_i v_i as a convex combination of at most d + 1 rows
/// of V.  Support is returned in ascending index order.  Distributions whose
/// support already fits are returned unchanged.
SimplexCombination caratheodory_reduce(const Distribution& alpha, const Matrix& V);

enum class VAwareRegime { Nearest, Caratheodory, BruteForce };

/// Which value-aware strategy applies for (L, d, r); throws
/// ErrorCode::InvalidArgument when none does.
VAwareRegime v_aware_regime(std::size_t length, std::size_t dim, std::size_t r);

AttentionOutput optimal_v_aware(const KernelSpec& spec, const AttentionInstance& inst,
                                std::size_t r);

struct RankOrders {
    std::vector<Index> by_alpha;          // alpha_i descending
    std::vector<Index> by_alpha_norm;     // alpha_i ||v_i|| descending
    std::vector<Index> by_eq3;            // eq3_objective ascending
    std::vector<Index> by_distance;       // ||o - v_i||^2 ascending
};

RankOrders ranking_compare(std::span<const double> o, const Distribution& alpha, const Matrix& V);

}  // namespace vattn
