#pragma once

// Domain types shared by every module: dense matrices, validated attention
// instances, kernel choices, distributions, selections and convex
// combinations.  Indices are 0-based throughout.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vattn {

using Index = std::size_t;

enum class ErrorCode {
    ShapeMismatch,
    NonFinite,
    InvalidArgument,
    Unsupported,
    SolverFailure,
    BadMagic,
    BadVersion,
    Truncated,
    DimOverflow,
    Io,
    Config,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// One sequence's queries, keys and values (each L x d) and the causal flag.
/// Immutable once built; construction validates shapes and finiteness.
class AttentionInstance {
public:
    static AttentionInstance make(Matrix Q, Matrix K, Matrix V, bool causal);

    const Matrix& queries() const noexcept { return q_; }
    const Matrix& keys() const noexcept { return k_; }
    const Matrix& values() const noexcept { return v_; }
    bool causal() const noexcept { return causal_; }

    std::size_t length() const noexcept { return q_.rows(); }
    std::size_t dim() const noexcept { return q_.cols(); }

    /// Number of keys query t may attend to: t + 1 when causal, L otherwise.
    std::size_t allowed_count(Index t) const noexcept { return causal_ ? t + 1 : length(); }
    std::vector<Index> allowed_indices(Index t) const;

private:
    AttentionInstance(Matrix Q, Matrix K, Matrix V, bool causal)
        : q_(std::move(Q)), k_(std::move(K)), v_(std::move(V)), causal_(causal) {}

    Matrix q_;
    Matrix k_;
    Matrix v_;
    bool causal_ = false;
};

enum class KernelFamily { Exponential, Polynomial, Elu };

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

/// Similarity kernel choice.  `degree` is set iff the family is polynomial;
/// temperature scaling (q, k divided by d^{1/4}) only applies to the
/// exponential family.
struct KernelSpec {
    KernelFamily family = KernelFamily::Exponential;
    std::optional<int> degree;
    bool temperature_scaling = false;

    static KernelSpec exponential(bool temperature_scaling = false);
    /// Throws for negative or odd degrees, which can produce negative scores.
    static KernelSpec polynomial(int degree);
    static KernelSpec elu();

    void validate() const;
    std::string describe() const;

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Nonnegative weights summing to 1 (within 1e-6).
class Distribution {
public:
    static constexpr double kSumTolerance = 1e-6;

    static Distribution make(std::vector<double> weights);
    static Distribution uniform(std::size_t n);

    std::span<const double> weights() const noexcept { return w_; }
    std::size_t size() const noexcept { return w_.size(); }
    double operator[](Index i) const { return w_[i]; }

private:
    explicit Distribution(std::vector<double> w) : w_(std::move(w)) {}
    std::vector<double> w_;
};

/// Per-query sorted, unique, nonempty key index sets.  When causal, every
/// index in set t is <= t.
class SelectionPlan {
public:
    static SelectionPlan make(std::vector<std::vector<Index>> sets, std::size_t length, bool causal);

    std::size_t size() const noexcept { return sets_.size(); }
    std::span<const Index> operator[](Index t) const { return sets_[t]; }

private:
    explicit SelectionPlan(std::vector<std::vector<Index>> sets) : sets_(std::move(sets)) {}
    std::vector<std::vector<Index>> sets_;
};

/// Convex combination of value rows: support indices plus coefficients.
class SimplexCombination {
public:
    static constexpr double kSumTolerance = 1e-8;

    static SimplexCombination make(std::vector<Index> support, std::vector<double> beta);

    std::span<const Index> support() const noexcept { return support_; }
    std::span<const double> beta() const noexcept { return beta_; }
    std::size_t size() const noexcept { return support_.size(); }

    /// Writes sum_i beta_i * V[support_i] into `out` (length V.cols()).
    void evaluate(const Matrix& V, std::span<double> out) const;
    std::vector<double> evaluate(const Matrix& V) const;

private:
    SimplexCombination(std::vector<Index> support, std::vector<double> beta)
        : support_(std::move(support)), beta_(std::move(beta)) {}
    std::vector<Index> support_;
    std::vector<double> beta_;
};

enum class FlagEvent {
    DegenerateDenominator,
    NoLshCandidates,
};

std::string_view to_string(FlagEvent event);

struct QueryFlag {
    Index query = 0;
    FlagEvent event = FlagEvent::DegenerateDenominator;

    friend bool operator==(const QueryFlag&, const QueryFlag&) = default;
};

/// L x d outputs of an attention computation plus any per-query fallbacks
/// that fired while producing them (sorted by query index).
struct AttentionOutput {
    Matrix values;
    std::vector<QueryFlag> flags;
};

}  // namespace vattn
