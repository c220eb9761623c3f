#include "vcr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "vcr/keyvalue.hpp"
#include "vcr/tensor_io.hpp"

namespace vcr {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

struct PngError {
  char message[256] = {};
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* err = static_cast<PngError*>(png_get_error_ptr(png));
  std::snprintf(err->message, sizeof err->message, "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

struct RawPng {
  std::uint32_t width = 0, height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;
};

// Kept free of non-trivial locals so that longjmp out of libpng is safe;
// `out` is owned by the caller.
bool decode_png(std::FILE* fp, RawPng* out, PngError* err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, png_error_handler,
                                           png_warning_handler);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  std::vector<png_bytep>* rows = new std::vector<png_bytep>();
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    delete rows;
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->channels = png_get_channels(png, info);
  out->bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out->bytes.resize(rowbytes * out->height);
  rows->resize(out->height);
  for (std::uint32_t y = 0; y < out->height; ++y) (*rows)[y] = out->bytes.data() + y * rowbytes;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  delete rows;
  return true;
}

bool encode_png(std::FILE* fp, std::uint32_t width, std::uint32_t height, int depth,
                const std::vector<std::uint8_t>* bytes, PngError* err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_error_handler,
                                            png_warning_handler);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  std::vector<png_const_bytep>* rows = new std::vector<png_const_bytep>(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    delete rows;
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * 3 * (depth / 8);
  for (std::uint32_t y = 0; y < height; ++y) (*rows)[y] = bytes->data() + y * rowbytes;
  png_write_image(png, const_cast<png_bytepp>(rows->data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  delete rows;
  return true;
}

LoadedImage read_png(const fs::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  std::rewind(fp.get());

  RawPng raw;
  PngError err;
  if (!decode_png(fp.get(), &raw, &err)) {
    throw IoError("failed to decode " + path.string() + ": " + err.message);
  }
  if (raw.channels != 1 && raw.channels != 3) {
    throw IoError(path.string() + ": unsupported channel count " + std::to_string(raw.channels));
  }

  LoadedImage out;
  out.bit_depth = raw.bit_depth;
  out.grayscale = raw.channels == 1;
  out.rgb = RgbImage(raw.width, raw.height);
  const double maxval = raw.bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
  auto dst = out.rgb.planes().values();
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) {
      const std::size_t sample = p * raw.channels + (raw.channels == 1 ? 0 : c);
      double v;
      if (raw.bit_depth == 16) {
        v = (raw.bytes[2 * sample] << 8) | raw.bytes[2 * sample + 1];
      } else {
        v = raw.bytes[sample];
      }
      dst[c * n + p] = v / maxval;
    }
  }
  return out;
}

// PFM: text header "PF"/"Pf", "W H", scale (negative = little endian), then
// float32 rows from bottom to top.
LoadedImage read_pfm(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0;
  double scale = 0.0;
  is >> magic >> w >> h >> scale;
  if (!is || (magic != "PF" && magic != "Pf") || w == 0 || h == 0 || scale == 0.0) {
    throw IoError(path.string() + " has a malformed PFM header");
  }
  is.get();  // single whitespace before the payload
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  std::vector<unsigned char> buf(w * h * channels * 4);
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw IoError(path.string() + ": truncated PFM payload");
  }

  LoadedImage out;
  out.bit_depth = 32;
  out.grayscale = channels == 1;
  out.rgb = RgbImage(w, h);
  const std::size_t n = w * h;
  auto dst = out.rgb.planes().values();
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t y = h - 1 - row;
    for (std::size_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const std::size_t sample = (row * w + x) * channels + (channels == 1 ? 0 : c);
        const unsigned char* b = buf.data() + 4 * sample;
        std::uint32_t bits = little ? (b[0] | b[1] << 8 | b[2] << 16 | std::uint32_t(b[3]) << 24)
                                    : (b[3] | b[2] << 8 | b[1] << 16 | std::uint32_t(b[0]) << 24);
        dst[c * n + y * w + x] = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
  }
  return out;
}

void write_pfm_planes(const fs::path& path, std::size_t w, std::size_t h, int channels,
                      std::span<const double> planes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << (channels == 3 ? "PF" : "Pf") << '\n' << w << ' ' << h << '\n' << "-1.0" << '\n';
  const std::size_t n = w * h;
  std::vector<unsigned char> buf;
  buf.reserve(n * channels * 4);
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t y = h - 1 - row;
    for (std::size_t x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(planes[c * n + y * w + x]));
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(bits >> (8 * i)));
      }
    }
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

LoadedImage read_image(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("image not found: " + path.string());
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pfm") return read_pfm(path);
  throw IoError("unsupported image format '" + ext + "' for " + path.string());
}

void write_png(const fs::path& path, const RgbImage& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("PNG bit depth must be 8 or 16");
  const std::size_t w = img.width(), h = img.height(), n = w * h;
  const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bytes_per = bit_depth / 8;
  std::vector<std::uint8_t> bytes(n * 3 * bytes_per);
  auto src = img.planes().values();
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(src[c * n + p], 0.0, 1.0);
      const auto q = static_cast<std::uint32_t>(std::lround(v * maxval));
      const std::size_t at = (p * 3 + c) * bytes_per;
      if (bit_depth == 16) {
        bytes[at] = static_cast<std::uint8_t>(q >> 8);
        bytes[at + 1] = static_cast<std::uint8_t>(q & 0xff);
      } else {
        bytes[at] = static_cast<std::uint8_t>(q);
      }
    }
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  PngError err;
  if (!encode_png(fp.get(), static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h), bit_depth,
                  &bytes, &err)) {
    throw IoError("failed to encode " + path.string() + ": " + err.message);
  }
}

void write_pfm(const fs::path& path, const RgbImage& img) {
  write_pfm_planes(path, img.width(), img.height(), 3, img.planes().values());
}

void write_pfm_gray(const fs::path& path, const Tensor& gray) {
  if (gray.rank() != 2) throw ShapeError("grayscale image must be (H,W), got " + shape_string(gray.shape()));
  write_pfm_planes(path, gray.extent(1), gray.extent(0), 1, gray.values());
}

void write_image(const fs::path& path, const RgbImage& img, int png_bit_depth) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return write_png(path, img, png_bit_depth);
  if (ext == ".pfm") return write_pfm(path, img);
  throw IoError("unsupported output format '" + ext + "' for " + path.string());
}

fs::path hvi_sidecar_path(const fs::path& tensor_path) {
  fs::path p = tensor_path;
  p += ".meta";
  return p;
}

void save_hvi(const fs::path& path, const HviImage& hvi, const HviParams& p) {
  save_tensor(path, hvi.planes());
  std::ofstream os(hvi_sidecar_path(path));
  if (!os) throw IoError("cannot write " + hvi_sidecar_path(path).string());
  os << "# HVI planes (Hhat, Vhat, Imax)\n"
     << "k = " << format_double(p.k) << '\n'
     << "eps = " << format_double(p.eps) << '\n'
     << "alpha_s = " << format_double(p.alpha_s) << '\n'
     << "alpha_i = " << format_double(p.alpha_i) << '\n';
}

HviImage load_hvi(const fs::path& path, HviParams& params_out) {
  const fs::path meta = hvi_sidecar_path(path);
  if (!fs::exists(meta)) {
    throw IoError("missing HVI sidecar: expected " + meta.string());
  }
  Tensor planes = load_tensor(path);
  const KeyValues kv = read_key_values(meta);
  HviParams p;
  p.k = kv_double(kv, "k");
  p.eps = kv_double(kv, "eps");
  p.alpha_s = kv_double(kv, "alpha_s", 1.0);
  p.alpha_i = kv_double(kv, "alpha_i", 1.0);
  p.validate();
  params_out = p;
  return HviImage(std::move(planes), p.k, p.eps);
}

}  // namespace vcr
