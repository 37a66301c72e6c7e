#include "vattn/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vattn/parallel.hpp"

namespace vattn {

namespace {

std::atomic<std::size_t> g_threads{1};

void require_finite(const Matrix& m, std::string_view name) {
    const auto data = m.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            std::ostringstream msg;
            msg << "tensor " << name << " has a non-finite entry at (" << i / m.cols() << ", "
                << i % m.cols() << ")";
            throw Error(ErrorCode::NonFinite, msg.str());
        }
    }
}

std::string shape_of(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

std::size_t thread_count() noexcept { return g_threads.load(std::memory_order_relaxed); }

void set_thread_count(std::size_t n) noexcept {
    g_threads.store(std::max<std::size_t>(1, n), std::memory_order_relaxed);
}

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ShapeMismatch: return "shape mismatch";
        case ErrorCode::NonFinite: return "non-finite value";
        case ErrorCode::InvalidArgument: return "invalid argument";
        case ErrorCode::Unsupported: return "unsupported";
        case ErrorCode::SolverFailure: return "solver failure";
        case ErrorCode::BadMagic: return "bad magic";
        case ErrorCode::BadVersion: return "bad version";
        case ErrorCode::Truncated: return "truncated";
        case ErrorCode::DimOverflow: return "dimension overflow";
        case ErrorCode::Io: return "i/o error";
        case ErrorCode::Config: return "configuration error";
    }
    return "unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw Error(ErrorCode::ShapeMismatch, "matrix data has " + std::to_string(data_.size()) +
                                                  " entries, expected " +
                                                  std::to_string(rows * cols));
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(n * m);
    for (const auto& row : rows) {
        if (row.size() != m) throw Error(ErrorCode::ShapeMismatch, "ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(n, m, std::move(data));
}

AttentionInstance AttentionInstance::make(Matrix Q, Matrix K, Matrix V, bool causal) {
    if (Q.rows() == 0 || Q.cols() == 0) {
        throw Error(ErrorCode::ShapeMismatch, "tensor Q must be at least 1x1, got " + shape_of(Q));
    }
    if (K.rows() != Q.rows() || K.cols() != Q.cols()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "tensor K has shape " + shape_of(K) + " but Q has shape " + shape_of(Q));
    }
    if (V.rows() != Q.rows() || V.cols() != Q.cols()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "tensor V has shape " + shape_of(V) + " but Q has shape " + shape_of(Q));
    }
    require_finite(Q, "Q");
    require_finite(K, "K");
    require_finite(V, "V");
    return AttentionInstance(std::move(Q), std::move(K), std::move(V), causal);
}

std::vector<Index> AttentionInstance::allowed_indices(Index t) const {
    std::vector<Index> out(allowed_count(t));
    std::iota(out.begin(), out.end(), Index{0});
    return out;
}

std::string_view to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::Exponential: return "exponential";
        case KernelFamily::Polynomial: return "polynomial";
        case KernelFamily::Elu: return "elu";
    }
    return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
    if (name == "exponential") return KernelFamily::Exponential;
    if (name == "polynomial") return KernelFamily::Polynomial;
    if (name == "elu") return KernelFamily::Elu;
    throw Error(ErrorCode::InvalidArgument, "unknown kernel family '" + std::string(name) + "'");
}

KernelSpec KernelSpec::exponential(bool temperature_scaling) {
    return KernelSpec{KernelFamily::Exponential, std::nullopt, temperature_scaling};
}

KernelSpec KernelSpec::polynomial(int degree) {
    KernelSpec spec{KernelFamily::Polynomial, degree, false};
    spec.validate();
    return spec;
}

KernelSpec KernelSpec::elu() { return KernelSpec{KernelFamily::Elu, std::nullopt, false}; }

void KernelSpec::validate() const {
    if (family == KernelFamily::Polynomial) {
        if (!degree) throw Error(ErrorCode::InvalidArgument, "polynomial kernel needs a degree");
        if (*degree < 0) {
            throw Error(ErrorCode::InvalidArgument, "polynomial degree must be >= 0");
        }
        if (*degree % 2 != 0) {
            throw Error(ErrorCode::InvalidArgument,
                        "odd polynomial degree " + std::to_string(*degree) +
                            " can yield negative scores");
        }
    } else if (degree) {
        throw Error(ErrorCode::InvalidArgument, "degree is only meaningful for polynomial kernels");
    }
    if (temperature_scaling && family != KernelFamily::Exponential) {
        throw Error(ErrorCode::InvalidArgument,
                    "temperature scaling applies to the exponential kernel only");
    }
}

std::string KernelSpec::describe() const {
    std::string out(to_string(family));
    if (degree) out += "-" + std::to_string(*degree);
    if (temperature_scaling) out += "-scaled";
    return out;
}

Distribution Distribution::make(std::vector<double> weights) {
    if (weights.empty()) throw Error(ErrorCode::InvalidArgument, "empty distribution");
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw Error(ErrorCode::InvalidArgument, "distribution weights must be finite and >= 0");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        std::ostringstream msg;
        msg << "distribution weights sum to " << sum;
        throw Error(ErrorCode::InvalidArgument, msg.str());
    }
    return Distribution(std::move(weights));
}

Distribution Distribution::uniform(std::size_t n) {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty distribution");
    return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

SelectionPlan SelectionPlan::make(std::vector<std::vector<Index>> sets, std::size_t length,
                                  bool causal) {
    if (sets.size() != length) {
        throw Error(ErrorCode::ShapeMismatch, "selection plan has " + std::to_string(sets.size()) +
                                                  " sets for " + std::to_string(length) +
                                                  " queries");
    }
    for (std::size_t t = 0; t < sets.size(); ++t) {
        const auto& s = sets[t];
        if (s.empty()) {
            throw Error(ErrorCode::InvalidArgument,
                        "selection for query " + std::to_string(t) + " is empty");
        }
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (j > 0 && s[j] <= s[j - 1]) {
                throw Error(ErrorCode::InvalidArgument, "selection for query " + std::to_string(t) +
                                                            " is not sorted and unique");
            }
            if (s[j] >= length) {
                throw Error(ErrorCode::InvalidArgument, "selection for query " + std::to_string(t) +
                                                            " references key " +
                                                            std::to_string(s[j]));
            }
        }
        if (causal && s.back() > t) {
            throw Error(ErrorCode::InvalidArgument, "selection for query " + std::to_string(t) +
                                                        " attends to future key " +
                                                        std::to_string(s.back()));
        }
    }
    return SelectionPlan(std::move(sets));
}

SimplexCombination SimplexCombination::make(std::vector<Index> support, std::vector<double> beta) {
    if (support.size() != beta.size()) {
        throw Error(ErrorCode::ShapeMismatch, "support and coefficient lengths differ");
    }
    if (support.empty()) throw Error(ErrorCode::InvalidArgument, "empty convex combination");
    double sum = 0.0;
    for (double b : beta) {
        if (!std::isfinite(b) || b < 0.0) {
            throw Error(ErrorCode::InvalidArgument, "convex coefficients must be finite and >= 0");
        }
        sum += b;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "convex coefficients sum to " << sum;
        throw Error(ErrorCode::InvalidArgument, msg.str());
    }
    return SimplexCombination(std::move(support), std::move(beta));
}

void SimplexCombination::evaluate(const Matrix& V, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < support_.size(); ++j) {
        const auto v = V.row(support_[j]);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += beta_[j] * v[c];
    }
}

std::vector<double> SimplexCombination::evaluate(const Matrix& V) const {
    std::vector<double> out(V.cols());
    evaluate(V, out);
    return out;
}

std::string_view to_string(FlagEvent event) {
    switch (event) {
        case FlagEvent::DegenerateDenominator: return "degenerate_denominator";
        case FlagEvent::NoLshCandidates: return "no_lsh_candidates";
    }
    return "unknown";
}

}  // namespace vattn
