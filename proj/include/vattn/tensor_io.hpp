#pragma once

// VAT1 tensor files.  Little-endian throughout:
//   "VAT1" | u32 version (=1) | u32 count |
//   count x ( u32 name_len | name bytes | u32 ndim | ndim x u64 dim | f32 data... )
// Data is row-major; no padding, no checksum.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vattn/core.hpp"

namespace vattn {

inline constexpr std::uint32_t kTensorFormatVersion = 1;

struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<float> data;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

std::vector<std::uint8_t> encode_tensors(std::span<const NamedTensor> tensors);
/// Errors: BadMagic, BadVersion, Truncated (payload shorter than declared, or
/// trailing bytes), DimOverflow (element count does not fit in memory).
std::vector<NamedTensor> decode_tensors(std::span<const std::uint8_t> bytes);

void write_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

NamedTensor tensor_from_matrix(std::string name, const Matrix& m);
/// The tensor must be 2-D.
Matrix matrix_from_tensor(const NamedTensor& t);

/// Tensors "Q", "K", "V" plus a one-element "causal" flag.
std::vector<NamedTensor> instance_tensors(const AttentionInstance& inst);
AttentionInstance instance_from_tensors(std::span<const NamedTensor> tensors);

void write_instance(const std::filesystem::path& path, const AttentionInstance& inst);
AttentionInstance read_instance(const std::filesystem::path& path);

}  // namespace vattn
