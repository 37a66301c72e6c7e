#pragma once

// Exact generalized attention and sparse attention over an explicit
// selection.  Rows are computed independently (in parallel when
// thread_count() > 1) and results do not depend on the schedule.

#include <span>

#include "vattn/core.hpp"
#include "vattn/kernels.hpp"

namespace vattn {

/// Row t is sum_i alpha_i v_i with alpha over all keys, or keys 0..t when
/// the instance is causal.
AttentionOutput exact_attention(const KernelSpec& spec, const AttentionInstance& inst);

/// Row t is the kernel-weighted average of V over plan[t] only.
AttentionOutput sparse_attention(const KernelSpec& spec, const AttentionInstance& inst,
                                 const SelectionPlan& plan);

/// out = sum_j weights[j] * V[rows[j]].
void combine_rows(const Matrix& V, std::span<const Index> rows, std::span<const double> weights,
                  std::span<double> out);

/// Collects per-query fallback markers into a sorted flag list.
std::vector<QueryFlag> collect_flags(std::span<const char> marked, FlagEvent event);

}  // namespace vattn
