#include "hdrunet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "hdrunet/errors.hpp"

namespace hdrunet {

HdrImage HdrImage::from_png(const PngImage& png) {
  HdrImage img(png.height, png.width);
  const double scale = 1.0 / png.max_value();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < png.height; ++y) {
      for (std::size_t x = 0; x < png.width; ++x) {
        img.at(c, y, x) = static_cast<float>(png.at(y, x, c) * scale);
      }
    }
  }
  return img;
}

PngImage HdrImage::to_png16() const {
  PngImage png;
  png.width = width;
  png.height = height;
  png.bit_depth = 16;
  png.samples.resize(3 * width * height);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double v = std::clamp(static_cast<double>(at(c, y, x)), 0.0, 1.0);
        png.samples[(y * width + x) * 3 + c] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      }
    }
  }
  return png;
}

template <Real T>
Tensor<T> HdrImage::to_tensor() const {
  return Tensor<T>::from_data(Shape{1, 3, height, width}, std::vector<T>(pixels.begin(), pixels.end()));
}

LdrImage LdrImage::from_png(const PngImage& png) {
  if (png.bit_depth != 8) {
    throw UnsupportedDepthError("LDR images must be 8-bit, got " + std::to_string(png.bit_depth));
  }
  LdrImage img(png.height, png.width);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < png.height; ++y) {
      for (std::size_t x = 0; x < png.width; ++x) {
        img.pixels[(c * png.height + y) * png.width + x] = static_cast<std::uint8_t>(png.at(y, x, c));
      }
    }
  }
  return img;
}

PngImage LdrImage::to_png() const {
  PngImage png;
  png.width = width;
  png.height = height;
  png.bit_depth = 8;
  png.samples.resize(3 * width * height);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        png.samples[(y * width + x) * 3 + c] = at(c, y, x);
      }
    }
  }
  return png;
}

std::vector<float> LdrImage::float_view() const {
  std::vector<float> out(pixels.size());
  std::transform(pixels.begin(), pixels.end(), out.begin(), [](std::uint8_t v) { return v / 255.0f; });
  return out;
}

template <Real T>
Tensor<T> LdrImage::to_tensor() const {
  std::vector<T> values(pixels.size());
  std::transform(pixels.begin(), pixels.end(), values.begin(), [](std::uint8_t v) { return T(v) / T(255); });
  return Tensor<T>::from_data(Shape{1, 3, height, width}, std::move(values));
}

void DegradationParams::validate() const {
  if (!(exposure_gain > 0.0)) {
    throw ConfigError("exposure_gain must be positive");
  }
  if (!(noise_sigma >= 0.0)) {
    throw ConfigError("noise_sigma must be non-negative");
  }
  if (quant_bits < 1 || quant_bits > 8) {
    throw ConfigError("quant_bits must be in [1, 8]");
  }
  if (!(clip_low < clip_high)) {
    throw ConfigError("clip_low must be below clip_high");
  }
}

LdrImage synthesize_ldr(const HdrImage& hdr, const DegradationParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> noise(0.0, params.noise_sigma > 0.0 ? params.noise_sigma : 1.0);
  const double levels = static_cast<double>((1 << params.quant_bits) - 1);

  LdrImage out(hdr.height, hdr.width);
  for (std::size_t i = 0; i < hdr.pixels.size(); ++i) {
    double x = static_cast<double>(hdr.pixels[i]) * params.exposure_gain;
    x = std::clamp(x, params.clip_low, params.clip_high);
    if (params.noise_sigma > 0.0) {
      x += noise(rng);
    }
    x = std::clamp(x, 0.0, 1.0);
    const double q = std::round(x * levels) / levels;
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(q * 255.0));
  }
  return out;
}

std::vector<std::size_t> window_offsets(std::size_t dim, std::size_t size, std::size_t step) {
  if (size == 0 || step == 0) {
    throw ConfigError("window size and step must be positive");
  }
  if (dim < size) {
    throw DegenerateInputError("image extent " + std::to_string(dim) + " is smaller than patch size " +
                               std::to_string(size));
  }
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + size <= dim; o += step) {
    out.push_back(o);
  }
  if (out.back() + size < dim) {
    out.push_back(dim - size);
  }
  return out;
}

namespace {

template <typename Image>
Image crop_image(const Image& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  if (y0 + h > image.height || x0 + w > image.width) {
    throw ShapeError("crop window exceeds image bounds");
  }
  Image out(h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      const auto* src = image.pixels.data() + (c * image.height + y0 + y) * image.width + x0;
      std::copy_n(src, w, out.pixels.data() + (c * h + y) * w);
    }
  }
  return out;
}

void check_pair(const ImagePair& pair) {
  if (pair.ldr.height != pair.hdr.height || pair.ldr.width != pair.hdr.width) {
    throw ShapeError("LDR and HDR images differ in size");
  }
}

}  // namespace

LdrImage crop(const LdrImage& image, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  return crop_image(image, y, x, h, w);
}

HdrImage crop(const HdrImage& image, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  return crop_image(image, y, x, h, w);
}

std::vector<ImagePair> crop_patches(const ImagePair& pair, std::size_t size, std::size_t step) {
  check_pair(pair);
  const auto ys = window_offsets(pair.hdr.height, size, step);
  const auto xs = window_offsets(pair.hdr.width, size, step);
  std::vector<ImagePair> out;
  out.reserve(ys.size() * xs.size());
  for (const std::size_t y : ys) {
    for (const std::size_t x : xs) {
      out.push_back({crop(pair.ldr, y, x, size, size), crop(pair.hdr, y, x, size, size)});
    }
  }
  return out;
}

CropOffset random_crop_offset(std::size_t height, std::size_t width, std::size_t patch, std::mt19937_64& rng) {
  if (patch == 0 || patch > height || patch > width) {
    throw DegenerateInputError("patch size " + std::to_string(patch) + " does not fit a " + std::to_string(height) +
                               "x" + std::to_string(width) + " image");
  }
  std::uniform_int_distribution<std::size_t> dy(0, height - patch);
  std::uniform_int_distribution<std::size_t> dx(0, width - patch);
  CropOffset off;
  off.y = dy(rng);
  off.x = dx(rng);
  return off;
}

ImagePair random_crop(const ImagePair& pair, std::size_t patch, std::mt19937_64& rng) {
  check_pair(pair);
  const CropOffset off = random_crop_offset(pair.hdr.height, pair.hdr.width, patch, rng);
  return {crop(pair.ldr, off.y, off.x, patch, patch), crop(pair.hdr, off.y, off.x, patch, patch)};
}

ImagePair random_crop(const ImagePair& pair, std::size_t patch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_crop(pair, patch, rng);
}

std::vector<std::string> DatasetIndex::take_ids() const {
  std::vector<std::string> ids;
  for (const auto& f : frames) {
    if (std::find(ids.begin(), ids.end(), f.take_id) == ids.end()) {
      ids.push_back(f.take_id);
    }
  }
  return ids;
}

std::size_t DatasetIndex::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(frames.begin(), frames.end(), [split](const Frame& f) { return f.split == split; }));
}

DatasetIndex build_split(const DatasetIndex& index, std::size_t val_per_take, std::uint64_t seed) {
  DatasetIndex out = index;
  for (auto& f : out.frames) {
    f.split = Split::Train;
  }
  if (val_per_take == 0) {
    return out;
  }
  std::mt19937_64 rng(seed);
  for (const auto& take : out.take_ids()) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < out.frames.size(); ++i) {
      if (out.frames[i].take_id == take) {
        members.push_back(i);
      }
    }
    if (members.size() <= val_per_take) {
      throw DegenerateInputError("take '" + take + "' has " + std::to_string(members.size()) +
                                 " frames, needs more than " + std::to_string(val_per_take));
    }
    // Partial Fisher-Yates: the first val_per_take slots become validation.
    for (std::size_t k = 0; k < val_per_take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, members.size() - 1);
      std::swap(members[k], members[pick(rng)]);
      out.frames[members[k]].split = Split::Val;
    }
  }
  return out;
}

DatasetIndex read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open manifest '" + path.string() + "'");
  }
  const auto root = path.parent_path();
  DatasetIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) {
      fields.push_back(field);
    }
    if (fields.size() != 4 || (fields[3] != "train" && fields[3] != "val")) {
      throw FormatError("manifest '" + path.string() + "' line " + std::to_string(line_no) +
                        ": expected take_id<TAB>ldr<TAB>hdr<TAB>train|val");
    }
    Frame f;
    f.take_id = fields[0];
    f.ldr_path = std::filesystem::path(fields[1]).is_absolute() ? std::filesystem::path(fields[1]) : root / fields[1];
    f.hdr_path = std::filesystem::path(fields[2]).is_absolute() ? std::filesystem::path(fields[2]) : root / fields[2];
    f.split = fields[3] == "val" ? Split::Val : Split::Train;
    index.frames.push_back(std::move(f));
  }
  return index;
}

void write_manifest(const std::filesystem::path& path, const DatasetIndex& index) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write manifest '" + path.string() + "'");
  }
  for (const auto& f : index.frames) {
    out << f.take_id << '\t' << f.ldr_path.string() << '\t' << f.hdr_path.string() << '\t'
        << (f.split == Split::Val ? "val" : "train") << '\n';
  }
  if (!out) {
    throw IoError("failed writing manifest '" + path.string() + "'");
  }
}

HdrImage generate_scene(std::size_t height, std::size_t width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HdrImage img(height, width);
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);

  // Per-channel smooth base: offset + linear ramp + one low-frequency wave.
  struct Base {
    double offset, gx, gy, amp, fx, fy, phase;
  };
  Base bases[3];
  for (auto& b : bases) {
    b = {0.12 + 0.25 * u(rng), 0.2 * (u(rng) - 0.5), 0.2 * (u(rng) - 0.5), 0.08 * u(rng),
         1.0 + 2.0 * u(rng),   1.0 + 2.0 * u(rng),   6.283185307179586 * u(rng)};
  }
  struct Blob {
    double cy, cx, radius, peak;
    double tint[3];
  };
  const int n_blobs = 1 + static_cast<int>(u(rng) * 3.0);
  std::vector<Blob> blobs(n_blobs);
  for (auto& b : blobs) {
    b.cy = u(rng) * h;
    b.cx = u(rng) * w;
    b.radius = (0.08 + 0.17 * u(rng)) * std::min(h, w);
    b.peak = 0.55 + 0.45 * u(rng);
    for (double& t : b.tint) {
      t = 0.85 + 0.15 * u(rng);
    }
  }
  std::normal_distribution<double> texture(0.0, 0.01);

  for (std::size_t c = 0; c < 3; ++c) {
    const Base& b = bases[c];
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double ny = static_cast<double>(y) / h;
        const double nx = static_cast<double>(x) / w;
        double v = b.offset + b.gx * nx + b.gy * ny +
                   b.amp * std::sin(6.283185307179586 * (b.fx * nx + b.fy * ny) + b.phase);
        for (const Blob& bl : blobs) {
          const double dy = (static_cast<double>(y) - bl.cy) / bl.radius;
          const double dx = (static_cast<double>(x) - bl.cx) / bl.radius;
          v += bl.peak * bl.tint[c] * std::exp(-0.5 * (dx * dx + dy * dy));
        }
        v += texture(rng);
        v = std::clamp(v, 0.0, 1.0);
        img.at(c, y, x) = static_cast<float>(std::round(v * 65535.0) / 65535.0);
      }
    }
  }
  return img;
}

ImagePair load_pair(const Frame& frame) {
  ImagePair pair{LdrImage::from_png(load_png(frame.ldr_path)), HdrImage::from_png(load_png(frame.hdr_path))};
  check_pair(pair);
  return pair;
}

template Tensor<float> HdrImage::to_tensor<float>() const;
template Tensor<double> HdrImage::to_tensor<double>() const;
template Tensor<float> LdrImage::to_tensor<float>() const;
template Tensor<double> LdrImage::to_tensor<double>() const;

}  // namespace hdrunet
