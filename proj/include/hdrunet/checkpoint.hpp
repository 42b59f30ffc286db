#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hdrunet {

// Layout (all integers little-endian):
//   "HDRU" | u32 version | u32 tensor count
//   per tensor: u32 name length | UTF-8 name | u8 dtype (0 f32, 1 f64)
//               | u8 rank | u32 dims[rank] | raw little-endian elements
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

struct CheckpointTensor {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint32_t> dims;
  std::vector<float> f32;
  std::vector<double> f64;

  std::size_t numel() const { return dtype == DType::F32 ? f32.size() : f64.size(); }
  std::size_t dims_product() const;
  double value(std::size_t i) const { return dtype == DType::F32 ? f32[i] : f64[i]; }
};

struct Checkpoint {
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(std::string_view name) const;
  /// Throws FormatError when missing.
  const CheckpointTensor& get(std::string_view name) const;
  void add_scalar(std::string name, double value);
  double scalar(std::string_view name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws BadMagicError, VersionError, TruncatedError or FormatError.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hdrunet
