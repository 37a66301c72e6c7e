#include "vattn/synthetic.hpp"

#include <cmath>
#include <string>

#include "vattn/rng.hpp"

namespace vattn {

std::string_view to_string(QkMode mode) {
    return mode == QkMode::Gaussian ? "gaussian" : "clustered";
}

std::string_view to_string(ValueMode mode) {
    return mode == ValueMode::Gaussian ? "gaussian" : "heavy_tailed";
}

QkMode qk_mode_from_string(std::string_view name) {
    if (name == "gaussian") return QkMode::Gaussian;
    if (name == "clustered") return QkMode::Clustered;
    throw Error(ErrorCode::InvalidArgument, "unknown Q/K mode '" + std::string(name) + "'");
}

ValueMode value_mode_from_string(std::string_view name) {
    if (name == "gaussian") return ValueMode::Gaussian;
    if (name == "heavy_tailed") return ValueMode::HeavyTailed;
    throw Error(ErrorCode::InvalidArgument, "unknown value mode '" + std::string(name) + "'");
}

void SyntheticSpec::validate() const {
    if (length < 1 || dim < 1) throw Error(ErrorCode::InvalidArgument, "synthetic instance needs L, d >= 1");
    auto positive = [](double x, const char* what) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be > 0");
        }
    };
    positive(qk_scale, "qk_scale");
    positive(center_scale, "center_scale");
    positive(intra_scale, "intra_scale");
    positive(value_scale, "value_scale");
    positive(pareto_shape, "pareto_shape");
    if (n_clusters < 1) throw Error(ErrorCode::InvalidArgument, "n_clusters must be >= 1");
}

AttentionInstance generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t L = spec.length;
    const std::size_t d = spec.dim;
    RngStream rng(spec.seed, stream_key(kSyntheticStreamTag));

    Matrix Q(L, d), K(L, d), V(L, d);
    if (spec.qk_mode == QkMode::Gaussian) {
        for (double& x : Q.data()) x = spec.qk_scale * rng.normal();
        for (double& x : K.data()) x = spec.qk_scale * rng.normal();
    } else {
        Matrix centers = gaussian_matrix(rng, spec.n_clusters, d);
        for (double& x : centers.data()) x *= spec.center_scale;
        for (Matrix* M : {&Q, &K}) {
            for (std::size_t t = 0; t < L; ++t) {
                const std::size_t c = rng.next_u64() % spec.n_clusters;
                for (std::size_t j = 0; j < d; ++j) {
                    (*M)(t, j) = centers(c, j) + spec.intra_scale * rng.normal();
                }
            }
        }
    }
    for (std::size_t t = 0; t < L; ++t) {
        double multiplier = spec.value_scale;
        if (spec.value_mode == ValueMode::HeavyTailed) {
            multiplier *= std::pow(rng.uniform_open(), -1.0 / spec.pareto_shape);
        }
        for (double& x : V.row(t)) x = multiplier * rng.normal();
    }
    return AttentionInstance::make(std::move(Q), std::move(K), std::move(V), spec.causal);
}

}  // namespace vattn
