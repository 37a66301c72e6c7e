#pragma once

#include <cstdint>
#include <random>

#include "vattn/core.hpp"

namespace vattn {

/// Reproducible random stream identified by (seed, stream id).  Two streams
/// with the same identity produce identical draws no matter what other
/// streams are doing; distinct ids give independent sequences.  Not
/// thread-safe: confine each stream to one task.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    double normal();
    /// Uniform on the open interval (0, 1).
    double uniform_open();
    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Combines a purpose tag with up to two counters into a stream id, so
/// callers can key streams by e.g. (LSH, round) without collisions.
std::uint64_t stream_key(std::uint64_t tag, std::uint64_t a = 0, std::uint64_t b = 0);

/// rows x cols matrix of i.i.d. standard normals, filled row-major.
Matrix gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols);

}  // namespace vattn
