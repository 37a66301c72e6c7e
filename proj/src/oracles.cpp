#include "vattn/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "linalg.hpp"
#include "vattn/attention.hpp"
#include "vattn/kernels.hpp"
#include "vattn/parallel.hpp"
#include "vattn/simd.hpp"

namespace vattn {

namespace {

constexpr double kKktTolerance = 1e-10;
constexpr double kDependenceTolerance = 1e-10;
constexpr double kReconstructionTolerance = 1e-8;

void check_rows(const Matrix& V, std::span<const Index> rows) {
    for (Index i : rows) {
        if (i >= V.rows()) {
            throw Error(ErrorCode::InvalidArgument,
                        "value row " + std::to_string(i) + " out of range");
        }
    }
}

/// Clamps round-off negatives to zero and rescales to sum 1.
void renormalize_simplex(std::vector<double>& beta) {
    double sum = 0.0;
    for (double& b : beta) {
        if (b < 0.0) b = 0.0;
        sum += b;
    }
    for (double& b : beta) b /= sum;
}

std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // result * (n - k + i) / i stays integral at every step.
        const std::uint64_t factor = n - k + i;
        if (result > (cap + 1) * i / factor + 1) return cap + 1;
        result = result * factor / i;
        if (result > cap) return cap + 1;
    }
    return result;
}

/// Advances `comb` (ascending, values < n) to the next combination in
/// lexicographic order.  Returns false after the last one.
bool next_combination(std::vector<Index>& comb, std::size_t n) {
    const std::size_t k = comb.size();
    for (std::size_t i = k; i-- > 0;) {
        if (comb[i] < n - k + i) {
            ++comb[i];
            for (std::size_t j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
            return true;
        }
    }
    return false;
}

/// Incremental Caratheodory reduction over the rows [0, weights.size()) of V.
///
/// Points are absorbed one at a time into a basis of affinely independent
/// lifted points [v; 1].  A new point that depends on the basis gives an
/// affine dependence; moving mass along it until some coefficient vanishes
/// keeps the represented point and total mass fixed and drops one point.
/// W holds pseudo-inverse rows of the basis and is updated in O(kd) per step.
class CaratheodoryReducer {
public:
    CaratheodoryReducer(const Matrix& V, std::span<const double> weights)
        : V_(V), weights_(weights), lifted_dim_(V.cols() + 1) {}

    SimplexCombination run() {
        std::vector<Index> support;
        for (Index i = 0; i < weights_.size(); ++i) {
            if (weights_[i] > 0.0) support.push_back(i);
        }
        if (support.size() <= lifted_dim_) {
            std::vector<double> beta;
            for (Index i : support) beta.push_back(weights_[i]);
            renormalize_simplex(beta);
            return SimplexCombination::make(std::move(support), std::move(beta));
        }

        basis_ = Matrix(lifted_dim_, lifted_dim_);
        W_ = Matrix(lifted_dim_, lifted_dim_);
        for (Index i : support) absorb(i);

        polish();
        return finish();
    }

private:
    void lift(Index i, std::span<double> out) const {
        const auto v = V_.row(i);
        std::copy(v.begin(), v.end(), out.begin());
        out[lifted_dim_ - 1] = 1.0;
    }

    void absorb(Index j) {
        std::vector<double> a(lifted_dim_);
        lift(j, a);
        const std::size_t k = members_.size();
        std::vector<double> x(k);
        if (k > 0) simd::active().gemv(W_.data().data(), k, lifted_dim_, a.data(), x.data());

        if (k < lifted_dim_) {
            std::vector<double> r = a;
            for (std::size_t i = 0; i < k; ++i) simd::axpy(-x[i], basis_.row(i), r);
            const double rnorm2 = simd::squared_norm(r);
            const double anorm = std::sqrt(simd::squared_norm(a));
            if (std::sqrt(rnorm2) > kDependenceTolerance * (1.0 + anorm)) {
                append(j, a, x, r, rnorm2);
                return;
            }
        }

        // a = sum_i x_i basis_i with sum_i x_i = 1: shift mass t from j onto
        // the basis along x.  The largest feasible t zeroes j or a member.
        const double mass = weights_[j];
        double step = mass;
        std::size_t blocking = k;
        for (std::size_t i = 0; i < k; ++i) {
            if (x[i] < 0.0) {
                const double ratio = coef_[i] / -x[i];
                if (ratio < step) {
                    step = ratio;
                    blocking = i;
                }
            }
        }
        for (std::size_t i = 0; i < k; ++i) coef_[i] = std::max(0.0, coef_[i] + step * x[i]);
        if (blocking == k) return;  // j absorbed entirely

        replace(blocking, j, a, x, mass - step);
    }

    void append(Index j, std::span<const double> a, std::span<const double> x,
                std::span<const double> r, double rnorm2) {
        const std::size_t k = members_.size();
        // Greville update: W' = [W - x rho^T; rho^T], rho = r / ||r||^2.
        std::vector<double> rho(r.begin(), r.end());
        for (double& v : rho) v /= rnorm2;
        for (std::size_t i = 0; i < k; ++i) simd::axpy(-x[i], rho, W_.row(i));
        std::copy(rho.begin(), rho.end(), W_.row(k).begin());
        std::copy(a.begin(), a.end(), basis_.row(k).begin());
        members_.push_back(j);
        coef_.push_back(weights_[j]);
        note_update();
    }

    void replace(std::size_t p, Index j, std::span<const double> a, std::span<const double> x,
                 double mass) {
        const std::size_t k = members_.size();
        // Product-form column exchange; the span of the basis is unchanged.
        auto wp = W_.row(p);
        const double inv = 1.0 / x[p];
        for (double& v : wp) v *= inv;
        for (std::size_t i = 0; i < k; ++i) {
            if (i != p) simd::axpy(-x[i], wp, W_.row(i));
        }
        std::copy(a.begin(), a.end(), basis_.row(p).begin());
        members_[p] = j;
        coef_[p] = mass;
        note_update();
    }

    void note_update() {
        if (++updates_since_refresh_ >= 2 * lifted_dim_) refresh();
    }

    void refresh() {
        updates_since_refresh_ = 0;
        const std::size_t k = members_.size();
        Matrix cols(k, lifted_dim_);
        for (std::size_t i = 0; i < k; ++i) {
            std::copy(basis_.row(i).begin(), basis_.row(i).end(), cols.row(i).begin());
        }
        Matrix fresh;
        if (!linalg::pseudo_inverse_rows(cols, fresh, 1e-13)) return;
        for (std::size_t i = 0; i < k; ++i) {
            std::copy(fresh.row(i).begin(), fresh.row(i).end(), W_.row(i).begin());
        }
    }

    /// Recomputes the coefficients on the final support directly from the
    /// target point, removing drift accumulated by the updates.
    void polish() {
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < members_.size(); ++i) {
            if (coef_[i] > 0.0) keep.push_back(i);
        }
        Matrix cols(keep.size(), lifted_dim_);
        for (std::size_t i = 0; i < keep.size(); ++i) {
            std::copy(basis_.row(keep[i]).begin(), basis_.row(keep[i]).end(), cols.row(i).begin());
        }
        Matrix pinv;
        if (!linalg::pseudo_inverse_rows(cols, pinv, 1e-13)) return;

        std::vector<double> target = exact_point();
        target.push_back(1.0);
        std::vector<double> beta(keep.size());
        simd::active().gemv(pinv.data().data(), keep.size(), lifted_dim_, target.data(), beta.data());
        for (double b : beta) {
            if (b < -1e-12) return;
        }
        renormalize_simplex(beta);

        const double before = reconstruction_error(coef_);
        std::vector<double> candidate(coef_.size(), 0.0);
        for (std::size_t i = 0; i < keep.size(); ++i) candidate[keep[i]] = beta[i];
        if (reconstruction_error(candidate) <= before) coef_ = std::move(candidate);
    }

    std::vector<double> exact_point() const {
        std::vector<double> o(V_.cols(), 0.0);
        for (Index i = 0; i < weights_.size(); ++i) {
            if (weights_[i] > 0.0) simd::axpy(weights_[i], V_.row(i), o);
        }
        return o;
    }

    double reconstruction_error(std::span<const double> coef) const {
        std::vector<double> point(V_.cols(), 0.0);
        for (std::size_t i = 0; i < members_.size(); ++i) {
            if (coef[i] > 0.0) simd::axpy(coef[i], V_.row(members_[i]), point);
        }
        return std::sqrt(simd::squared_distance(point, exact_point()));
    }

    SimplexCombination finish() {
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < members_.size(); ++i) {
            if (coef_[i] > 0.0) order.push_back(i);
        }
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return members_[a] < members_[b]; });
        std::vector<Index> support;
        std::vector<double> beta;
        for (std::size_t i : order) {
            support.push_back(members_[i]);
            beta.push_back(coef_[i]);
        }
        renormalize_simplex(beta);

        const std::vector<double> o = exact_point();
        std::vector<double> point(V_.cols(), 0.0);
        for (std::size_t i = 0; i < support.size(); ++i) simd::axpy(beta[i], V_.row(support[i]), point);
        const double err = std::sqrt(simd::squared_distance(point, o));
        const double onorm = std::sqrt(simd::squared_norm(o));
        if (support.size() > lifted_dim_ || err > kReconstructionTolerance * (1.0 + onorm)) {
            std::ostringstream msg;
            msg << "Caratheodory reduction failed (ill-conditioned values): reconstruction error "
                << err << " on support {";
            for (std::size_t i = 0; i < support.size(); ++i) msg << (i ? "," : "") << support[i];
            msg << "}";
            throw Error(ErrorCode::SolverFailure, msg.str());
        }
        return SimplexCombination::make(std::move(support), std::move(beta));
    }

    const Matrix& V_;
    std::span<const double> weights_;
    std::size_t lifted_dim_;
    Matrix basis_;  // lifted member vectors, one per row
    Matrix W_;      // pseudo-inverse rows for the members
    std::vector<Index> members_;
    std::vector<double> coef_;
    std::size_t updates_since_refresh_ = 0;
};

/// Weights of query t over its allowed keys (a prefix of the key matrix).
struct QueryTarget {
    SelectionWeights weights;
    std::vector<double> output;
};

QueryTarget exact_target(const KeyScorer& scorer, const AttentionInstance& inst, Index t) {
    QueryTarget target;
    const std::size_t n = inst.allowed_count(t);
    target.weights = scorer.prefix_weights(inst.queries().row(t), n);
    target.output.assign(inst.dim(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        simd::axpy(target.weights.weights[i], inst.values().row(i), target.output);
    }
    return target;
}

}  // namespace

std::vector<Index> top_r_selection(std::span<const double> weights, std::size_t r) {
    if (r == 0) throw Error(ErrorCode::InvalidArgument, "top-r selection needs r >= 1");
    std::vector<Index> eligible;
    for (Index i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) eligible.push_back(i);
    }
    const std::size_t keep = std::min(r, eligible.size());
    std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(keep),
                      eligible.end(), [&](Index a, Index b) {
                          if (weights[a] != weights[b]) return weights[a] > weights[b];
                          return a < b;
                      });
    eligible.resize(keep);
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

std::vector<Index> top_r_selection(const Distribution& alpha, std::size_t r) {
    return top_r_selection(alpha.weights(), r);
}

AttentionOutput optimal_v_oblivious(const KernelSpec& spec, const AttentionInstance& inst,
                                    std::size_t r) {
    if (r == 0) throw Error(ErrorCode::InvalidArgument, "optimal_v_oblivious needs r >= 1");
    const std::size_t L = inst.length();
    const KeyScorer scorer(spec, inst.keys());
    AttentionOutput result{Matrix(L, inst.dim()), {}};
    std::vector<char> degenerate(L, 0);
    parallel_for(L, [&](std::size_t t) {
        const auto q = inst.queries().row(t);
        const SelectionWeights full = scorer.prefix_weights(q, inst.allowed_count(t));
        const std::vector<Index> chosen = top_r_selection(full.weights, r);
        const SelectionWeights sel = scorer.weights(q, chosen);
        combine_rows(inst.values(), chosen, sel.weights, result.values.row(t));
        degenerate[t] = full.degenerate || sel.degenerate;
    });
    result.flags = collect_flags(degenerate, FlagEvent::DegenerateDenominator);
    return result;
}

double eq3_objective(Index i, const Distribution& alpha, const Matrix& V) {
    if (alpha.size() != V.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "distribution length does not match value rows");
    }
    if (i >= V.rows()) throw Error(ErrorCode::InvalidArgument, "index out of range");
    const auto vi = V.row(i);
    double cross = 0.0;
    for (Index j = 0; j < V.rows(); ++j) {
        if (j == i || alpha[j] == 0.0) continue;
        cross += alpha[j] * simd::dot(vi, V.row(j));
    }
    return simd::squared_norm(vi) * (0.5 - alpha[i]) - cross;
}

NearestValue optimal_v_aware_1(std::span<const double> o, const Matrix& V,
                               std::span<const Index> allowed) {
    if (allowed.empty()) throw Error(ErrorCode::InvalidArgument, "allowed index set is empty");
    if (o.size() != V.cols()) throw Error(ErrorCode::ShapeMismatch, "target dimension mismatch");
    check_rows(V, allowed);
    NearestValue best{allowed[0], std::numeric_limits<double>::infinity()};
    for (Index i : allowed) {
        const double dist = simd::squared_distance(o, V.row(i));
        if (dist < best.sq_distance || (dist == best.sq_distance && i < best.index)) {
            best = {i, dist};
        }
    }
    return best;
}

SimplexFit simplex_lsq(std::span<const double> o, const Matrix& V, std::span<const Index> rows) {
    const std::size_t m = rows.size();
    if (m == 0) throw Error(ErrorCode::InvalidArgument, "simplex_lsq needs at least one row");
    if (o.size() != V.cols()) throw Error(ErrorCode::ShapeMismatch, "target dimension mismatch");
    check_rows(V, rows);

    std::vector<double> G(m * m);
    std::vector<double> c(m);
    double scale = std::max(1.0, simd::squared_norm(o));
    for (std::size_t i = 0; i < m; ++i) {
        const auto vi = V.row(rows[i]);
        c[i] = simd::dot(vi, o);
        for (std::size_t j = 0; j <= i; ++j) {
            G[i * m + j] = G[j * m + i] = simd::dot(vi, V.row(rows[j]));
        }
        scale = std::max(scale, G[i * m + i]);
    }
    const double tol = kKktTolerance * scale;

    std::size_t start = 0;
    double start_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        const double dist = simd::squared_distance(o, V.row(rows[i]));
        if (dist < start_dist) {
            start_dist = dist;
            start = i;
        }
    }
    std::vector<double> beta(m, 0.0);
    beta[start] = 1.0;
    std::vector<char> active(m, 0);  // in the free set P
    std::vector<char> blocked(m, 0);
    active[start] = 1;

    const std::size_t cap = std::max<std::size_t>(10, 10 * m * m);
    std::size_t iterations = 0;

    std::vector<Index> face;
    std::vector<double> z;
    // Minimizes over the affine hull of the free set: [G_PP 1; 1^T 0][z; nu] = [c_P; 1].
    auto solve_face = [&]() {
        face.clear();
        for (std::size_t i = 0; i < m; ++i) {
            if (active[i]) face.push_back(i);
        }
        const std::size_t k = face.size();
        const std::size_t n = k + 1;
        std::vector<double> A(n * n, 0.0);
        std::vector<double> rhs(n, 0.0);
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) A[a * n + b] = G[face[a] * m + face[b]];
            A[a * n + k] = 1.0;
            A[k * n + a] = 1.0;
            rhs[a] = c[face[a]];
        }
        rhs[k] = 1.0;
        if (!linalg::solve(A, rhs, n)) return false;
        z.assign(rhs.begin(), rhs.begin() + static_cast<std::ptrdiff_t>(k));
        return true;
    };

    while (true) {
        // Multipliers: w_i = <v_i, o - o_hat>; on the face they share a common value mu.
        std::vector<double> w(c);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) w[i] -= G[i * m + j] * beta[j];
        }
        double mu = 0.0;
        std::size_t face_size = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (active[i]) {
                mu += w[i];
                ++face_size;
            }
        }
        mu /= static_cast<double>(face_size);
        std::size_t entering = m;
        for (std::size_t i = 0; i < m; ++i) {
            if (!active[i] && !blocked[i] && w[i] - mu > tol) {
                entering = i;
                break;
            }
        }
        if (entering == m) break;
        active[entering] = 1;

        bool first = true;
        while (true) {
            if (++iterations > cap) {
                throw Error(ErrorCode::SolverFailure,
                            "simplex_lsq exceeded " + std::to_string(cap) + " active-set steps");
            }
            if (!solve_face()) {
                // Numerically dependent face; the entering row cannot help.
                active[entering] = 0;
                blocked[entering] = 1;
                if (!first) throw Error(ErrorCode::SolverFailure, "simplex_lsq face became singular");
                break;
            }
            bool interior = true;
            for (double v : z) interior = interior && v > 0.0;
            if (interior) {
                for (std::size_t a = 0; a < face.size(); ++a) beta[face[a]] = z[a];
                std::fill(blocked.begin(), blocked.end(), 0);
                break;
            }
            double step = 1.0;
            std::size_t leaving = m;
            for (std::size_t a = 0; a < face.size(); ++a) {
                const std::size_t i = face[a];
                if (z[a] <= 0.0) {
                    const double denom = beta[i] - z[a];
                    const double ratio = denom > 0.0 ? beta[i] / denom : 0.0;
                    if (ratio < step) {
                        step = ratio;
                        leaving = i;
                    }
                }
            }
            if (first && leaving == entering && step <= 0.0) {
                active[entering] = 0;
                blocked[entering] = 1;
                break;
            }
            for (std::size_t a = 0; a < face.size(); ++a) {
                const std::size_t i = face[a];
                beta[i] += step * (z[a] - beta[i]);
            }
            if (leaving < m) {
                beta[leaving] = 0.0;
                active[leaving] = 0;
            }
            for (std::size_t i = 0; i < m; ++i) {
                if (active[i] && beta[i] <= 0.0 && i != entering) {
                    beta[i] = 0.0;
                    active[i] = 0;
                }
            }
            if (step > 0.0) std::fill(blocked.begin(), blocked.end(), 0);
            first = false;
        }
    }

    renormalize_simplex(beta);
    std::vector<double> point(V.cols(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (beta[i] > 0.0) simd::axpy(beta[i], V.row(rows[i]), point);
    }
    const double err = simd::squared_distance(o, point);
    return SimplexFit{SimplexCombination::make(std::vector<Index>(rows.begin(), rows.end()),
                                               std::move(beta)),
                      err, iterations};
}

SimplexFit simplex_lsq(std::span<const double> o, const Matrix& V_support) {
    std::vector<Index> rows(V_support.rows());
    std::iota(rows.begin(), rows.end(), Index{0});
    return simplex_lsq(o, V_support, rows);
}

SimplexCombination caratheodory_reduce(const Distribution& alpha, const Matrix& V) {
    if (alpha.size() != V.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "distribution length does not match value rows");
    }
    return CaratheodoryReducer(V, alpha.weights()).run();
}

VAwareRegime v_aware_regime(std::size_t length, std::size_t dim, std::size_t r) {
    if (r == 0) throw Error(ErrorCode::InvalidArgument, "optimal_v_aware needs r >= 1");
    if (r == 1) return VAwareRegime::Nearest;
    if (r >= dim + 1) return VAwareRegime::Caratheodory;
    if (binomial_capped(length, std::min(r, length), kMaxBruteForceSupports) <=
        kMaxBruteForceSupports) {
        return VAwareRegime::BruteForce;
    }
    throw Error(ErrorCode::InvalidArgument,
                "optimal_v_aware at r=" + std::to_string(r) + " needs r = 1, r >= d+1 (" +
                    std::to_string(dim + 1) + "), or binomial(L, r) <= 1e6 for exhaustive search; L=" +
                    std::to_string(length) + " is too long");
}

AttentionOutput optimal_v_aware(const KernelSpec& spec, const AttentionInstance& inst,
                                std::size_t r) {
    const VAwareRegime regime = v_aware_regime(inst.length(), inst.dim(), r);
    const std::size_t L = inst.length();
    const Matrix& V = inst.values();
    const KeyScorer scorer(spec, inst.keys());
    AttentionOutput result{Matrix(L, inst.dim()), {}};
    std::vector<char> degenerate(L, 0);
    parallel_for(L, [&](std::size_t t) {
        const QueryTarget target = exact_target(scorer, inst, t);
        degenerate[t] = target.weights.degenerate;
        const std::size_t n = inst.allowed_count(t);
        auto out = result.values.row(t);
        switch (regime) {
            case VAwareRegime::Nearest: {
                const NearestValue best = optimal_v_aware_1(target.output, V, inst.allowed_indices(t));
                const auto v = V.row(best.index);
                std::copy(v.begin(), v.end(), out.begin());
                break;
            }
            case VAwareRegime::Caratheodory: {
                const SimplexCombination comb =
                    CaratheodoryReducer(V, target.weights.weights).run();
                comb.evaluate(V, out);
                break;
            }
            case VAwareRegime::BruteForce: {
                if (r >= n) {
                    std::copy(target.output.begin(), target.output.end(), out.begin());
                    break;
                }
                std::vector<Index> support(r);
                std::iota(support.begin(), support.end(), Index{0});
                double best_err = std::numeric_limits<double>::infinity();
                std::vector<double> best_point(inst.dim());
                do {
                    const SimplexFit fit = simplex_lsq(target.output, V, support);
                    // Later supports must win by more than round-off.
                    if (std::isinf(best_err) || fit.sq_error < best_err - 1e-14 * (1.0 + best_err)) {
                        best_err = fit.sq_error;
                        fit.combination.evaluate(V, best_point);
                    }
                } while (next_combination(support, n));
                std::copy(best_point.begin(), best_point.end(), out.begin());
                break;
            }
        }
    });
    result.flags = collect_flags(degenerate, FlagEvent::DegenerateDenominator);
    return result;
}

RankOrders ranking_compare(std::span<const double> o, const Distribution& alpha, const Matrix& V) {
    const std::size_t L = V.rows();
    if (alpha.size() != L) {
        throw Error(ErrorCode::ShapeMismatch, "distribution length does not match value rows");
    }
    if (o.size() != V.cols()) throw Error(ErrorCode::ShapeMismatch, "target dimension mismatch");
    std::vector<double> a(L), an(L), eq(L), dist(L);
    for (Index i = 0; i < L; ++i) {
        a[i] = alpha[i];
        an[i] = alpha[i] * std::sqrt(simd::squared_norm(V.row(i)));
        eq[i] = eq3_objective(i, alpha, V);
        dist[i] = simd::squared_distance(o, V.row(i));
    }
    auto order = [L](const std::vector<double>& key, bool descending) {
        std::vector<Index> idx(L);
        std::iota(idx.begin(), idx.end(), Index{0});
        std::stable_sort(idx.begin(), idx.end(), [&](Index x, Index y) {
            return descending ? key[x] > key[y] : key[x] < key[y];
        });
        return idx;
    };
    return RankOrders{order(a, true), order(an, true), order(eq, false), order(dist, false)};
}

}  // namespace vattn
