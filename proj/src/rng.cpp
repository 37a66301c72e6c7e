#include "vattn/rng.hpp"

#include <array>

namespace vattn {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream_id) {
    const std::array<std::uint32_t, 4> words{
        static_cast<std::uint32_t>(seed),
        static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(stream_id),
        static_cast<std::uint32_t>(stream_id >> 32),
    };
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(seeded_engine(seed, stream_id)) {}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform_open() {
    // 53 random mantissa bits, shifted off zero.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t stream_key(std::uint64_t tag, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(splitmix64(tag) ^ a) ^ b);
}

Matrix gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols) {
    Matrix out(rows, cols);
    for (double& x : out.data()) x = rng.normal();
    return out;
}

}  // namespace vattn
