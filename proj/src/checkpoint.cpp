#include "hdrunet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hdrunet/errors.hpp"

namespace hdrunet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::size_t CheckpointTensor::dims_product() const {
  std::size_t n = 1;
  for (const auto d : dims) {
    n *= d;
  }
  return n;
}

const CheckpointTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) {
      return &t;
    }
  }
  return nullptr;
}

const CheckpointTensor& Checkpoint::get(std::string_view name) const {
  const CheckpointTensor* t = find(name);
  if (t == nullptr) {
    throw FormatError("checkpoint has no tensor '" + std::string(name) + "'");
  }
  return *t;
}

void Checkpoint::add_scalar(std::string name, double value) {
  CheckpointTensor t;
  t.name = std::move(name);
  t.dtype = DType::F64;
  t.f64 = {value};
  tensors.push_back(std::move(t));
}

double Checkpoint::scalar(std::string_view name) const {
  const CheckpointTensor& t = get(name);
  if (t.numel() != 1) {
    throw FormatError("checkpoint tensor '" + std::string(name) + "' is not a scalar");
  }
  return t.value(0);
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

template <typename T>
void put_raw(std::vector<std::uint8_t>& out, const std::vector<T>& values) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  out.insert(out.end(), p, p + values.size() * sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw TruncatedError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out = {'H', 'D', 'R', 'U'};
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.dims_product() != t.numel()) {
      throw FormatError("checkpoint tensor '" + t.name + "' dims do not match its element count");
    }
    if (t.dims.size() > 255) {
      throw FormatError("checkpoint tensor '" + t.name + "' has rank above 255");
    }
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<std::uint8_t>(t.dtype));
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (const auto d : t.dims) {
      put_u32(out, d);
    }
    if (t.dtype == DType::F32) {
      put_raw(out, t.f32);
    } else {
      put_raw(out, t.f64);
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4) {
    throw TruncatedError("checkpoint shorter than its magic");
  }
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), "HDRU", 4) != 0) {
    throw BadMagicError("not a checkpoint: bad magic bytes");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("tensor count");
  Checkpoint ckpt;
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointTensor t;
    const std::uint32_t name_len = r.u32("name length");
    const auto name = r.take(name_len, "name");
    t.name.assign(name.begin(), name.end());
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype > 1) {
      throw FormatError("checkpoint tensor '" + t.name + "' has unknown dtype code " + std::to_string(dtype));
    }
    t.dtype = static_cast<DType>(dtype);
    const std::uint8_t rank = r.u8("rank");
    for (std::uint8_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.u32("dims"));
    }
    const std::size_t n = t.dims_product();
    const std::size_t width = t.dtype == DType::F32 ? 4 : 8;
    if (n > bytes.size() / width + 1) {
      throw TruncatedError("checkpoint truncated in tensor '" + t.name + "'");
    }
    const auto raw = r.take(n * width, "tensor data");
    if (t.dtype == DType::F32) {
      t.f32.resize(n);
      std::memcpy(t.f32.data(), raw.data(), raw.size());
    } else {
      t.f64.resize(n);
      std::memcpy(t.f64.data(), raw.data(), raw.size());
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) {
    throw FormatError("trailing bytes after checkpoint tensors");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("failed writing checkpoint '" + path.string() + "'");
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint '" + path.string() + "'");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace hdrunet
