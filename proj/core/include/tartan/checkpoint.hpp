#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tartan/encoder.hpp"

namespace tartan {

enum class ModelKind : std::uint8_t { dual = 0, cross = 1 };

std::string_view to_string(ModelKind kind);

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian):
//   "TARTCKPT" | u32 version | u8 kind
//   | u32 num_buckets | u32 dim | u32 hidden_dim (0 for dual) | f64 temperature (0 for cross)
//   | u64 table seed | f64 table scale
//   | u32 row count | per row: u32 row id, dim x f32   (rows differing from their initial value)
//   | dense tensors as f32: dual: empty_row, projection; cross: hidden, hidden_bias, output, output_bias
//   | u64 checksum = fnv1a64 of every preceding byte
// Parameters must be float-representable; saving anything else throws
// "precision_loss" instead of silently rounding.
std::string serialize_checkpoint(const DualParams& params);
std::string serialize_checkpoint(const CrossParams& params);

// Checks run in the order magic, version, checksum, kind:
// "bad_magic", "unknown_version", "bad_checksum", "kind_mismatch".
ModelKind checkpoint_kind(std::string_view bytes);
DualParams deserialize_dual(std::string_view bytes);
CrossParams deserialize_cross(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const DualParams& params);
void save_checkpoint(const std::filesystem::path& path, const CrossParams& params);
DualParams load_dual_checkpoint(const std::filesystem::path& path);
CrossParams load_cross_checkpoint(const std::filesystem::path& path);

}  // namespace tartan
