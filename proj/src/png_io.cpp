#include "hdrunet/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "hdrunet/errors.hpp"

namespace hdrunet {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) {
      std::fclose(f);
    }
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct ErrorState {
  char message[256];
};

extern "C" void on_png_error(png_structp png, png_const_charp msg) {
  auto* state = static_cast<ErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg);
  png_longjmp(png, 1);
}

extern "C" void on_png_warning(png_structp, png_const_charp) {}

struct Header {
  png_uint_32 width;
  png_uint_32 height;
  int bit_depth;
};

// The functions below call setjmp; they hold no objects with destructors.

bool read_header(png_structp png, png_infop info, std::FILE* file, Header* out) {
  if (setjmp(png_jmpbuf(png))) {
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    depth = 8;
  }
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (depth < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
      depth = 8;
    }
    png_set_gray_to_rgb(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_tRNS_to_alpha(png);
  }
  if ((color & PNG_COLOR_MASK_ALPHA) != 0 || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  if (depth == 16) {
    png_set_swap(png);
  }
  png_read_update_info(png, info);
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->bit_depth = png_get_bit_depth(png, info);
  return png_get_channels(png, info) == 3;
}

bool read_rows(png_structp png, png_infop info, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) {
    return false;
  }
  png_read_image(png, rows);
  png_read_end(png, info);
  return true;
}

bool write_image(png_structp png, png_infop info, std::FILE* file, png_uint_32 width, png_uint_32 height, int depth,
                 png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) {
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, width, height, depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) {
    png_set_swap(png);
  }
  png_write_image(png, rows);
  png_write_end(png, info);
  return true;
}

}  // namespace

PngImage load_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) {
    throw IoError("cannot open '" + path.string() + "' for reading: " + std::strerror(errno));
  }
  unsigned char signature[8] = {};
  if (std::fread(signature, 1, sizeof(signature), file.get()) != sizeof(signature) ||
      png_sig_cmp(signature, 0, sizeof(signature)) != 0) {
    throw FormatError("'" + path.string() + "' is not a PNG file");
  }
  std::rewind(file.get());

  ErrorState state{};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, on_png_error, on_png_warning);
  if (png == nullptr) {
    throw IoError("libpng: cannot allocate read struct");
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: cannot allocate info struct");
  }
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  Header header{};
  if (!read_header(png, info, file.get(), &header)) {
    throw FormatError("malformed PNG '" + path.string() + "': " +
                      (state.message[0] != '\0' ? state.message : "unsupported channel layout"));
  }
  if (header.bit_depth != 8 && header.bit_depth != 16) {
    throw UnsupportedDepthError("PNG '" + path.string() + "' has unsupported bit depth " +
                                std::to_string(header.bit_depth));
  }

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(row_bytes * header.height);
  std::vector<png_bytep> rows(header.height);
  for (std::size_t y = 0; y < header.height; ++y) {
    rows[y] = buffer.data() + y * row_bytes;
  }
  if (!read_rows(png, info, rows.data())) {
    throw FormatError("malformed PNG '" + path.string() + "': " + state.message);
  }

  PngImage image;
  image.width = header.width;
  image.height = header.height;
  image.bit_depth = header.bit_depth;
  image.samples.resize(image.width * image.height * 3);
  if (header.bit_depth == 8) {
    for (std::size_t y = 0; y < image.height; ++y) {
      for (std::size_t i = 0; i < image.width * 3; ++i) {
        image.samples[y * image.width * 3 + i] = rows[y][i];
      }
    }
  } else {
    for (std::size_t y = 0; y < image.height; ++y) {
      std::memcpy(image.samples.data() + y * image.width * 3, rows[y], image.width * 3 * sizeof(std::uint16_t));
    }
  }
  return image;
}

void save_png(const std::filesystem::path& path, const PngImage& image) {
  if (image.bit_depth != 8 && image.bit_depth != 16) {
    throw UnsupportedDepthError("save_png: bit depth must be 8 or 16, got " + std::to_string(image.bit_depth));
  }
  if (image.samples.size() != image.width * image.height * 3 || image.width == 0 || image.height == 0) {
    throw ShapeError("save_png: sample count does not match " + std::to_string(image.width) + "x" +
                     std::to_string(image.height) + " RGB");
  }
  const std::size_t row_bytes = image.width * 3 * (image.bit_depth == 16 ? 2 : 1);
  std::vector<unsigned char> buffer(row_bytes * image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    unsigned char* row = buffer.data() + y * row_bytes;
    const std::uint16_t* src = image.samples.data() + y * image.width * 3;
    if (image.bit_depth == 8) {
      for (std::size_t i = 0; i < image.width * 3; ++i) {
        if (src[i] > 255) {
          throw ShapeError("save_png: 8-bit sample out of range");
        }
        row[i] = static_cast<unsigned char>(src[i]);
      }
    } else {
      std::memcpy(row, src, row_bytes);
    }
  }
  std::vector<png_bytep> rows(image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    rows[y] = buffer.data() + y * row_bytes;
  }

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) {
    throw IoError("cannot open '" + path.string() + "' for writing: " + std::strerror(errno));
  }
  ErrorState state{};
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, on_png_error, on_png_warning);
  if (png == nullptr) {
    throw IoError("libpng: cannot allocate write struct");
  }
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};
  if (info == nullptr) {
    throw IoError("libpng: cannot allocate info struct");
  }
  if (!write_image(png, info, file.get(), static_cast<png_uint_32>(image.width),
                   static_cast<png_uint_32>(image.height), image.bit_depth, rows.data())) {
    throw IoError("failed to write PNG '" + path.string() + "': " + state.message);
  }
  if (std::fflush(file.get()) != 0) {
    throw IoError("failed to flush '" + path.string() + "'");
  }
}

}  // namespace hdrunet
