#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hdrunet/png_io.hpp"
#include "hdrunet/tensor.hpp"

namespace hdrunet {

/// Gamma-corrected 16-bit ground truth as planar [3, H, W] floats, code / 65535.
struct HdrImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  HdrImage() = default;
  HdrImage(std::size_t height, std::size_t width) : height(height), width(width), pixels(3 * height * width) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }

  /// Accepts 8- or 16-bit PNGs, normalizing by the depth's maximum code.
  static HdrImage from_png(const PngImage& png);
  /// Rounds each value to the nearest 16-bit code, clamping to [0, 65535].
  PngImage to_png16() const;
  template <Real T>
  Tensor<T> to_tensor() const;
};

/// 8-bit input image, planar [3, H, W].
struct LdrImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  LdrImage() = default;
  LdrImage(std::size_t height, std::size_t width) : height(height), width(width), pixels(3 * height * width) {}

  std::uint8_t at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }

  /// Throws UnsupportedDepthError for non-8-bit input.
  static LdrImage from_png(const PngImage& png);
  PngImage to_png() const;
  /// code / 255
  std::vector<float> float_view() const;
  template <Real T>
  Tensor<T> to_tensor() const;
};

struct DegradationParams {
  double exposure_gain = 1.0;
  double noise_sigma = 2.0 / 255.0;  // std of additive Gaussian noise in [0, 1] units
  int quant_bits = 8;
  double clip_low = 0.0;
  double clip_high = 1.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

/// gain -> clip(low, high) -> + N(0, sigma) -> clip(0, 1) -> quantize to
/// 2^bits - 1 levels -> 8-bit codes. Noise is drawn from a generator seeded
/// with params.seed, one draw per sample in planar order, only when sigma > 0.
LdrImage synthesize_ldr(const HdrImage& hdr, const DegradationParams& params);

struct ImagePair {
  LdrImage ldr;
  HdrImage hdr;
};

/// Sliding-window starts: 0, step, 2 step, ... plus a final window snapped to
/// dim - size when the stride does not land on it. Throws DegenerateInputError
/// when dim < size.
std::vector<std::size_t> window_offsets(std::size_t dim, std::size_t size, std::size_t step);

LdrImage crop(const LdrImage& image, std::size_t y, std::size_t x, std::size_t h, std::size_t w);
HdrImage crop(const HdrImage& image, std::size_t y, std::size_t x, std::size_t h, std::size_t w);

/// Row-major enumeration of aligned crops over window_offsets on both axes.
std::vector<ImagePair> crop_patches(const ImagePair& pair, std::size_t size = 480, std::size_t step = 240);

struct CropOffset {
  std::size_t y = 0;
  std::size_t x = 0;
};

/// Uniform offset, drawing y then x. Throws DegenerateInputError when patch
/// exceeds either dimension.
CropOffset random_crop_offset(std::size_t height, std::size_t width, std::size_t patch, std::mt19937_64& rng);
ImagePair random_crop(const ImagePair& pair, std::size_t patch, std::mt19937_64& rng);
ImagePair random_crop(const ImagePair& pair, std::size_t patch, std::uint64_t seed);

enum class Split { Train, Val };

struct Frame {
  std::string take_id;
  std::filesystem::path ldr_path;
  std::filesystem::path hdr_path;
  Split split = Split::Train;
};

/// Frames grouped by take in manifest order.
struct DatasetIndex {
  std::vector<Frame> frames;

  std::vector<std::string> take_ids() const;
  std::size_t count(Split split) const;
};

/// Selects val_per_take validation frames uniformly at random inside each take
/// (seeded); the rest are training frames. Throws DegenerateInputError when a
/// take has no more than val_per_take frames (and val_per_take > 0).
DatasetIndex build_split(const DatasetIndex& index, std::size_t val_per_take, std::uint64_t seed);

/// take_id<TAB>ldr<TAB>hdr<TAB>train|val, one frame per line. Relative paths
/// are resolved against the manifest's directory on read.
DatasetIndex read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetIndex& index);

/// Procedural scene: smooth gradients, a few bright blobs reaching the top of
/// the range, and low-amplitude texture, snapped to 16-bit codes.
HdrImage generate_scene(std::size_t height, std::size_t width, std::mt19937_64& rng);

ImagePair load_pair(const Frame& frame);

}  // namespace hdrunet
