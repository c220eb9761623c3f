#pragma once

#include <filesystem>

#include "vcr/colorspace.hpp"

namespace vcr {

struct LoadedImage {
  RgbImage rgb;
  int bit_depth = 8;       // 8 or 16 for PNG, 32 for PFM
  bool grayscale = false;  // single-channel source replicated into RGB
};

// Dispatches on the extension: .png (8/16-bit gray, gray+alpha, RGB, RGBA or
// palette; alpha is dropped) or .pfm (color "PF" or gray "Pf").
LoadedImage read_image(const std::filesystem::path& path);

// PNG samples are quantized from [0,1]; bit_depth is 8 or 16.
void write_png(const std::filesystem::path& path, const RgbImage& img, int bit_depth = 8);
void write_pfm(const std::filesystem::path& path, const RgbImage& img);
void write_image(const std::filesystem::path& path, const RgbImage& img, int png_bit_depth = 16);

// Single-plane (H,W) writers/readers for grayscale data.
void write_pfm_gray(const std::filesystem::path& path, const Tensor& gray);

// HVI planes as a (3,H,W) tensor file plus "<path>.meta" recording the
// parameters. load_hvi throws IoError naming the sidecar when it is missing.
std::filesystem::path hvi_sidecar_path(const std::filesystem::path& tensor_path);
void save_hvi(const std::filesystem::path& path, const HviImage& hvi, const HviParams& p);
HviImage load_hvi(const std::filesystem::path& path, HviParams& params_out);

}  // namespace vcr
