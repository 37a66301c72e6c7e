#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "support.hpp"
#include "vattn/core.hpp"
#include "vattn/rng.hpp"

using namespace vattn;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::Io;
}

}  // namespace

TEST(Instance, MinimalOneByOne) {
    const Matrix z(1, 1, 0.0);
    const auto inst = AttentionInstance::make(z, z, z, false);
    EXPECT_EQ(inst.length(), 1u);
    EXPECT_EQ(inst.dim(), 1u);
}

TEST(Instance, ShapeMismatchNamesTensor) {
    try {
        AttentionInstance::make(Matrix(2, 3), Matrix(2, 2), Matrix(2, 3), false);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
        EXPECT_NE(std::string(e.what()).find('K'), std::string::npos) << e.what();
    }
}

TEST(Instance, NonFiniteNamesTensor) {
    Matrix v(2, 2, 1.0);
    v(1, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        AttentionInstance::make(Matrix(2, 2), Matrix(2, 2), v, false);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFinite);
        EXPECT_NE(std::string(e.what()).find('V'), std::string::npos) << e.what();
    }
    Matrix q(2, 2, 1.0);
    q(0, 1) = std::numeric_limits<double>::infinity();
    EXPECT_EQ(code_of([&] { AttentionInstance::make(q, Matrix(2, 2), Matrix(2, 2), true); }),
              ErrorCode::NonFinite);
}

TEST(Instance, EmptyRejected) {
    EXPECT_EQ(code_of([] { AttentionInstance::make(Matrix(0, 2), Matrix(0, 2), Matrix(0, 2), false); }),
              ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([] { AttentionInstance::make(Matrix(2, 0), Matrix(2, 0), Matrix(2, 0), false); }),
              ErrorCode::ShapeMismatch);
}

TEST(Instance, ValidationIsTotalOverRandomShapes) {
    std::mt19937_64 gen(11);
    std::uniform_int_distribution<std::size_t> dim(0, 5);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t L[3] = {dim(gen), dim(gen), dim(gen)};
        const std::size_t d[3] = {dim(gen), dim(gen), dim(gen)};
        Matrix Q = support::random_matrix(gen, L[0], d[0]);
        Matrix K = support::random_matrix(gen, L[1], d[1]);
        Matrix V = support::random_matrix(gen, L[2], d[2]);
        if (trial % 7 == 0 && !V.data().empty()) V.data()[0] = std::nan("");
        const bool consistent = L[0] == L[1] && L[1] == L[2] && d[0] == d[1] && d[1] == d[2] &&
                                L[0] >= 1 && d[0] >= 1;
        try {
            const auto inst = AttentionInstance::make(Q, K, V, trial % 2 == 0);
            ASSERT_TRUE(consistent);
            ASSERT_GE(inst.length(), 1u);
            ASSERT_GE(inst.dim(), 1u);
            for (double x : inst.values().data()) ASSERT_TRUE(std::isfinite(x));
        } catch (const Error& e) {
            ASSERT_TRUE(!consistent || e.code() == ErrorCode::NonFinite) << e.what();
        }
    }
}

TEST(Instance, AllowedIndices) {
    const auto inst = support::random_instance(1, 4, 2, true);
    EXPECT_EQ(inst.allowed_indices(2), (std::vector<Index>{0, 1, 2}));
    const auto open = support::random_instance(1, 4, 2, false);
    EXPECT_EQ(open.allowed_count(0), 4u);
}

TEST(KernelSpecs, DegreePresentIffPolynomial) {
    EXPECT_FALSE(KernelSpec::exponential().degree.has_value());
    EXPECT_EQ(KernelSpec::polynomial(2).degree, 2);
    EXPECT_EQ(code_of([] { KernelSpec::polynomial(3); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { KernelSpec::polynomial(-2); }), ErrorCode::InvalidArgument);
    KernelSpec bad{KernelFamily::Exponential, 2, false};
    EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidArgument);
    KernelSpec scaled_poly{KernelFamily::Polynomial, 2, true};
    EXPECT_EQ(code_of([&] { scaled_poly.validate(); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(kernel_family_from_string("elu"), KernelFamily::Elu);
}

TEST(Distributions, SumAndSignChecked) {
    EXPECT_NO_THROW(Distribution::make({0.25, 0.75}));
    EXPECT_NO_THROW(Distribution::make({0.5, 0.5 + 5e-7}));
    EXPECT_EQ(code_of([] { Distribution::make({0.5, 0.6}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { Distribution::make({1.5, -0.5}); }), ErrorCode::InvalidArgument);
    const auto u = Distribution::uniform(4);
    EXPECT_DOUBLE_EQ(u[3], 0.25);
}

TEST(SelectionPlans, Invariants) {
    EXPECT_NO_THROW(SelectionPlan::make({{0}, {0, 1}}, 2, true));
    EXPECT_EQ(code_of([] { SelectionPlan::make({{0}, {}}, 2, false); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { SelectionPlan::make({{1, 0}, {0}}, 2, false); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { SelectionPlan::make({{0, 0}, {0}}, 2, false); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { SelectionPlan::make({{1}, {0}}, 2, true); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { SelectionPlan::make({{2}, {0}}, 2, false); }), ErrorCode::InvalidArgument);
}

TEST(SimplexCombinations, Invariants) {
    const auto c = SimplexCombination::make({0, 2}, {0.25, 0.75});
    const Matrix V = Matrix::from_rows({{1, 0}, {5, 5}, {0, 4}});
    const auto p = c.evaluate(V);
    EXPECT_DOUBLE_EQ(p[0], 0.25);
    EXPECT_DOUBLE_EQ(p[1], 3.0);
    EXPECT_EQ(code_of([] { SimplexCombination::make({0}, {0.5, 0.5}); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([] { SimplexCombination::make({0, 1}, {1.2, -0.2}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { SimplexCombination::make({0, 1}, {0.5, 0.5 + 1e-6}); }),
              ErrorCode::InvalidArgument);
}

TEST(Rng, SameStreamIsBitIdentical) {
    RngStream a(42, 7), b(42, 7);
    const Matrix ma = gaussian_matrix(a, 16, 9);
    const Matrix mb = gaussian_matrix(b, 16, 9);
    EXPECT_EQ(ma, mb);
}

TEST(Rng, DrawsIgnoreInterleavingWithOtherStreams) {
    RngStream solo(5, stream_key(1, 3));
    std::vector<double> expected;
    for (int i = 0; i < 100; ++i) expected.push_back(solo.normal());

    RngStream mine(5, stream_key(1, 3));
    RngStream other(5, stream_key(1, 4));
    std::vector<double> got;
    for (int i = 0; i < 100; ++i) {
        other.normal();
        got.push_back(mine.normal());
        other.uniform_open();
    }
    EXPECT_EQ(got, expected);
}

TEST(Rng, DistinctStreamsDiffer) {
    RngStream a(42, 1), b(42, 2), c(43, 1);
    const Matrix ma = gaussian_matrix(a, 4, 4);
    EXPECT_NE(ma, gaussian_matrix(b, 4, 4));
    EXPECT_NE(ma, gaussian_matrix(c, 4, 4));
    EXPECT_NE(stream_key(1, 2, 3), stream_key(1, 3, 2));
}

TEST(Rng, GaussianMoments) {
    RngStream rng(2024, 0);
    const Matrix m = gaussian_matrix(rng, 1000, 1000);
    double mean = 0.0;
    for (double x : m.data()) mean += x;
    mean /= 1e6;
    double var = 0.0;
    for (double x : m.data()) var += (x - mean) * (x - mean);
    var /= 1e6;
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Rng, UniformOpenInterval) {
    RngStream rng(3, 3);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform_open();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}
