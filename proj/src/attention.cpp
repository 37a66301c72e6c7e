#include "vattn/attention.hpp"

#include <algorithm>

#include "vattn/parallel.hpp"
#include "vattn/simd.hpp"

namespace vattn {

void combine_rows(const Matrix& V, std::span<const Index> rows, std::span<const double> weights,
                  std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < rows.size(); ++j) simd::axpy(weights[j], V.row(rows[j]), out);
}

std::vector<QueryFlag> collect_flags(std::span<const char> marked, FlagEvent event) {
    std::vector<QueryFlag> flags;
    for (std::size_t t = 0; t < marked.size(); ++t) {
        if (marked[t]) flags.push_back({t, event});
    }
    return flags;
}

AttentionOutput exact_attention(const KernelSpec& spec, const AttentionInstance& inst) {
    const std::size_t L = inst.length();
    const Matrix& V = inst.values();
    const KeyScorer scorer(spec, inst.keys());
    AttentionOutput result{Matrix(L, inst.dim()), {}};
    std::vector<char> degenerate(L, 0);
    parallel_for(L, [&](std::size_t t) {
        const std::size_t count = inst.allowed_count(t);
        const SelectionWeights sel = scorer.prefix_weights(inst.queries().row(t), count);
        auto out = result.values.row(t);
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < count; ++i) simd::axpy(sel.weights[i], V.row(i), out);
        degenerate[t] = sel.degenerate;
    });
    result.flags = collect_flags(degenerate, FlagEvent::DegenerateDenominator);
    return result;
}

AttentionOutput sparse_attention(const KernelSpec& spec, const AttentionInstance& inst,
                                 const SelectionPlan& plan) {
    const std::size_t L = inst.length();
    if (plan.size() != L) {
        throw Error(ErrorCode::ShapeMismatch, "selection plan covers " + std::to_string(plan.size()) +
                                                  " queries, instance has " + std::to_string(L));
    }
    for (std::size_t t = 0; t < L; ++t) {
        const auto s = plan[t];
        if (s.empty()) {
            throw Error(ErrorCode::InvalidArgument,
                        "selection for query " + std::to_string(t) + " is empty");
        }
        if (s.back() >= L) {
            throw Error(ErrorCode::InvalidArgument, "selection index out of range");
        }
        if (inst.causal() && s.back() > t) {
            throw Error(ErrorCode::InvalidArgument,
                        "selection for query " + std::to_string(t) + " violates the causal mask");
        }
    }
    const KeyScorer scorer(spec, inst.keys());
    AttentionOutput result{Matrix(L, inst.dim()), {}};
    std::vector<char> degenerate(L, 0);
    parallel_for(L, [&](std::size_t t) {
        const SelectionWeights sel = scorer.weights(inst.queries().row(t), plan[t]);
        combine_rows(inst.values(), plan[t], sel.weights, result.values.row(t));
        degenerate[t] = sel.degenerate;
    });
    result.flags = collect_flags(degenerate, FlagEvent::DegenerateDenominator);
    return result;
}

}  // namespace vattn
