#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "vattn/attention.hpp"
#include "vattn/oracles.hpp"
#include "vattn/simd.hpp"

using namespace vattn;

namespace {

std::vector<simd::Level> vector_levels() {
    std::vector<simd::Level> out;
    for (auto level : {simd::Level::Avx2, simd::Level::Neon}) {
        if (simd::is_supported(level)) out.push_back(level);
    }
    return out;
}

class LevelGuard {
public:
    LevelGuard() : saved_(simd::active_level()) {}
    ~LevelGuard() { simd::set_level(saved_); }

private:
    simd::Level saved_;
};

std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n) {
    std::normal_distribution<double> normal;
    std::vector<double> v(n);
    for (double& x : v) x = normal(gen);
    return v;
}

}  // namespace

TEST(Simd, ScalarAlwaysSupported) {
    EXPECT_TRUE(simd::is_supported(simd::Level::Scalar));
    EXPECT_EQ(simd::level_from_string("scalar"), simd::Level::Scalar);
    EXPECT_EQ(simd::to_string(simd::Level::Avx2), "avx2");
}

TEST(Simd, UnsupportedLevelRejected) {
    for (auto level : {simd::Level::Avx2, simd::Level::Neon}) {
        if (!simd::is_supported(level)) EXPECT_THROW(simd::set_level(level), Error);
    }
}

TEST(Simd, VariantsMatchScalarReference) {
    const auto levels = vector_levels();
    if (levels.empty()) GTEST_SKIP() << "no vector level on this CPU";
    const auto& ref = simd::table(simd::Level::Scalar);
    std::mt19937_64 gen(77);
    for (auto level : levels) {
        const auto& vec = simd::table(level);
        for (std::size_t n = 1; n <= 67; ++n) {
            const auto a = random_vector(gen, n);
            const auto b = random_vector(gen, n);
            double mag = 0.0;
            for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
            const double tol = 1e-14 * (1.0 + mag);
            EXPECT_NEAR(vec.dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), tol) << n;
            EXPECT_NEAR(vec.squared_distance(a.data(), b.data(), n),
                        ref.squared_distance(a.data(), b.data(), n), 1e-14 * (1.0 + 4 * mag + n)) << n;
            EXPECT_EQ(vec.max_element(a.data(), n), ref.max_element(a.data(), n)) << n;

            std::vector<double> y1 = b, y2 = b;
            vec.axpy(0.37, a.data(), y1.data(), n);
            ref.axpy(0.37, a.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-15 * (1 + std::abs(y2[i])));

            for (std::size_t rows : {1u, 3u, 4u, 5u, 9u}) {
                const auto A = random_vector(gen, rows * n);
                std::vector<double> g1(rows), g2(rows);
                vec.gemv(A.data(), rows, n, a.data(), g1.data());
                ref.gemv(A.data(), rows, n, a.data(), g2.data());
                for (std::size_t r = 0; r < rows; ++r) EXPECT_NEAR(g1[r], g2[r], 1e-13 * (1.0 + n)) << n;
            }
        }
    }
}

TEST(Simd, ZeroLengthInputs) {
    for (auto level : {simd::Level::Scalar, simd::Level::Avx2, simd::Level::Neon}) {
        if (!simd::is_supported(level)) continue;
        const auto& t = simd::table(level);
        EXPECT_EQ(t.dot(nullptr, nullptr, 0), 0.0);
        EXPECT_EQ(t.squared_distance(nullptr, nullptr, 0), 0.0);
    }
}

TEST(Simd, MaxElementWithNegativesAndTies) {
    for (auto level : {simd::Level::Scalar, simd::Level::Avx2, simd::Level::Neon}) {
        if (!simd::is_supported(level)) continue;
        std::vector<double> x(13, -5.0);
        x[11] = -1.0;
        EXPECT_EQ(simd::table(level).max_element(x.data(), x.size()), -1.0);
    }
}

TEST(Simd, AttentionAgreesAcrossLevels) {
    const auto levels = vector_levels();
    if (levels.empty()) GTEST_SKIP() << "no vector level on this CPU";
    LevelGuard guard;
    const auto inst = support::random_instance(5, 48, 12, true);
    simd::set_level(simd::Level::Scalar);
    const auto ref = exact_attention(KernelSpec::exponential(), inst);
    const auto ref_aware = optimal_v_aware(KernelSpec::exponential(), inst, 13);
    for (auto level : levels) {
        simd::set_level(level);
        EXPECT_LT(support::max_abs_diff(exact_attention(KernelSpec::exponential(), inst).values, ref.values),
                  1e-12);
        EXPECT_LT(support::max_abs_diff(optimal_v_aware(KernelSpec::exponential(), inst, 13).values,
                                        ref_aware.values),
                  1e-8);
    }
}
