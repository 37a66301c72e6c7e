#pragma once

// Seeded synthetic attention instances.

#include <cstdint>
#include <string_view>

#include "vattn/core.hpp"

namespace vattn {

inline constexpr std::uint64_t kSyntheticStreamTag = 0x53594e;  // "SYN"

enum class QkMode { Gaussian, Clustered };
enum class ValueMode { Gaussian, HeavyTailed };

std::string_view to_string(QkMode mode);
std::string_view to_string(ValueMode mode);
QkMode qk_mode_from_string(std::string_view name);
ValueMode value_mode_from_string(std::string_view name);

struct SyntheticSpec {
    std::size_t length = 16;
    std::size_t dim = 4;
    QkMode qk_mode = QkMode::Gaussian;
    double qk_scale = 1.0;          // gaussian: entry std
    std::size_t n_clusters = 2;     // clustered
    double center_scale = 3.0;      // clustered: center entry std
    double intra_scale = 0.01;      // clustered: spread around a center
    ValueMode value_mode = ValueMode::Gaussian;
    double value_scale = 1.0;
    double pareto_shape = 1.5;      // heavy_tailed: norm multiplier ~ Pareto(shape, 1)
    bool causal = false;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Gaussian: Q, K entries N(0, qk_scale^2).  Clustered: n_clusters centers
/// with N(0, center_scale^2) entries; every query and key picks a center
/// uniformly and adds N(0, intra_scale^2) noise.  Values are N(0,
/// value_scale^2) vectors, in heavy_tailed mode each multiplied by an
/// independent Pareto draw.
AttentionInstance generate_synthetic(const SyntheticSpec& spec);

}  // namespace vattn
