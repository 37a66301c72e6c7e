#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "vattn/attention.hpp"
#include "vattn/parallel.hpp"

using namespace vattn;

namespace {

const KernelSpec kSpecs[] = {KernelSpec::exponential(), KernelSpec::exponential(true),
                             KernelSpec::polynomial(2), KernelSpec::elu()};

SelectionPlan full_plan(std::size_t L) {
    std::vector<std::vector<Index>> sets(L);
    for (auto& s : sets) {
        s.resize(L);
        std::iota(s.begin(), s.end(), Index{0});
    }
    return SelectionPlan::make(std::move(sets), L, false);
}

}  // namespace

TEST(ExactAttention, SingleKeyReturnsItsValue) {
    const auto inst = support::random_instance(1, 1, 5);
    for (const auto& spec : kSpecs) {
        const auto out = exact_attention(spec, inst);
        for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(out.values(0, c), inst.values()(0, c));
    }
}

TEST(ExactAttention, IdenticalKeysAverageValues) {
    std::mt19937_64 gen(2);
    Matrix K(6, 3, 0.7);
    auto inst = AttentionInstance::make(support::random_matrix(gen, 6, 3), K,
                                        support::random_matrix(gen, 6, 3), false);
    const auto out = exact_attention(KernelSpec::exponential(), inst);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 6; ++i) mean += inst.values()(i, c) / 6.0;
        for (std::size_t t = 0; t < 6; ++t) EXPECT_NEAR(out.values(t, c), mean, 1e-14);
    }
}

TEST(ExactAttention, MatchesNaiveReference) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (bool causal : {false, true}) {
            const auto inst = support::random_instance(seed, 16, 4, causal);
            for (const auto& spec : kSpecs) {
                const auto out = exact_attention(spec, inst);
                EXPECT_LT(support::max_abs_diff(out.values, support::naive_attention(spec, inst)), 1e-10)
                    << spec.describe();
                EXPECT_TRUE(out.flags.empty());
            }
        }
    }
}

TEST(ExactAttention, ConvexHullContainment) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = support::random_instance(seed, 12, 3, seed % 2 == 0, 2.0);
        for (const auto& spec : kSpecs) {
            const auto out = exact_attention(spec, inst);
            for (std::size_t t = 0; t < 12; ++t) {
                for (std::size_t c = 0; c < 3; ++c) {
                    double lo = 1e300, hi = -1e300;
                    for (std::size_t i = 0; i < inst.allowed_count(t); ++i) {
                        lo = std::min(lo, inst.values()(i, c));
                        hi = std::max(hi, inst.values()(i, c));
                    }
                    ASSERT_GE(out.values(t, c), lo - 1e-9);
                    ASSERT_LE(out.values(t, c), hi + 1e-9);
                }
            }
        }
    }
}

TEST(ExactAttention, CausalRowsIgnoreTheFuture) {
    std::mt19937_64 gen(99);
    const auto base = support::random_instance(3, 10, 3, true);
    for (const auto& spec : kSpecs) {
        const auto ref = exact_attention(spec, base);
        for (std::size_t t = 0; t < 10; ++t) {
            Matrix K = base.keys(), V = base.values();
            const Matrix noiseK = support::random_matrix(gen, 10, 3, 5.0);
            const Matrix noiseV = support::random_matrix(gen, 10, 3, 5.0);
            for (std::size_t i = t + 1; i < 10; ++i) {
                for (std::size_t c = 0; c < 3; ++c) {
                    K(i, c) = noiseK(i, c);
                    V(i, c) = noiseV(i, c);
                }
            }
            const auto changed = AttentionInstance::make(base.queries(), K, V, true);
            const auto out = exact_attention(spec, changed);
            for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(out.values(t, c), ref.values(t, c));
        }
    }
}

TEST(ExactAttention, DegenerateQueriesAreFlagged) {
    const Matrix Q = Matrix::from_rows({{1, 0}, {1, 1}});
    const Matrix K = Matrix::from_rows({{0, 1}, {0, 2}});
    const Matrix V = Matrix::from_rows({{1, 2}, {3, 4}});
    const auto inst = AttentionInstance::make(Q, K, V, false);
    const auto out = exact_attention(KernelSpec::polynomial(2), inst);
    ASSERT_EQ(out.flags.size(), 1u);
    EXPECT_EQ(out.flags[0], (QueryFlag{0, FlagEvent::DegenerateDenominator}));
    EXPECT_DOUBLE_EQ(out.values(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(out.values(0, 1), 3.0);
}

TEST(ExactAttention, ThreadCountDoesNotChangeBits) {
    const auto inst = support::random_instance(17, 64, 8, true);
    set_thread_count(1);
    const auto one = exact_attention(KernelSpec::elu(), inst);
    set_thread_count(4);
    const auto four = exact_attention(KernelSpec::elu(), inst);
    set_thread_count(1);
    EXPECT_EQ(one.values, four.values);
}

TEST(SparseAttention, FullSelectionEqualsExact) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = support::random_instance(seed, 16, 4);
        for (const auto& spec : kSpecs) {
            const auto a = exact_attention(spec, inst);
            const auto b = sparse_attention(spec, inst, full_plan(16));
            EXPECT_LT(support::max_abs_diff(a.values, b.values), 1e-12);
        }
    }
}

TEST(SparseAttention, SingletonReturnsThatValue) {
    const auto inst = support::random_instance(5, 6, 3);
    std::vector<std::vector<Index>> sets{{4}, {0}, {2}, {5}, {1}, {3}};
    const auto out = sparse_attention(KernelSpec::exponential(), inst, SelectionPlan::make(sets, 6, false));
    for (std::size_t t = 0; t < 6; ++t) {
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.values(t, c), inst.values()(sets[t][0], c));
    }
}

TEST(SparseAttention, RandomPlanMatchesNaive) {
    std::mt19937_64 gen(55);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const bool causal = seed % 2 == 1;
        const auto inst = support::random_instance(seed, 16, 4, causal);
        std::vector<std::vector<Index>> sets(16);
        for (std::size_t t = 0; t < 16; ++t) {
            const std::size_t n = causal ? t + 1 : 16;
            std::bernoulli_distribution keep(0.4);
            for (std::size_t i = 0; i < n; ++i) {
                if (keep(gen)) sets[t].push_back(i);
            }
            if (sets[t].empty()) sets[t].push_back(t);
        }
        const auto plan = SelectionPlan::make(sets, 16, causal);
        for (const auto& spec : kSpecs) {
            const auto out = sparse_attention(spec, inst, plan);
            EXPECT_LT(support::max_abs_diff(out.values, support::naive_sparse(spec, inst, sets)), 1e-10);
        }
    }
}

TEST(SparseAttention, PlanMustFitInstance) {
    const auto inst = support::random_instance(5, 4, 2, true);
    EXPECT_THROW(sparse_attention(KernelSpec::exponential(), inst,
                                  SelectionPlan::make({{0}, {0}, {0}}, 3, false)),
                 Error);
    EXPECT_THROW(sparse_attention(KernelSpec::exponential(), inst,
                                  SelectionPlan::make({{0, 1}, {0}, {0}, {0}}, 4, false)),
                 Error);
}
