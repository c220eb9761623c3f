#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "vcr/colorspace.hpp"
#include "vcr/tensor.hpp"

namespace vcr {

// Grayscale images throughout this header are (H,W) tensors.

// Y = 0.299 R + 0.587 G + 0.114 B
Tensor luminance(const RgbImage& img);

// 10 log10(L^2 / MSE) over every sample. Identical inputs give +infinity.
double psnr(const Tensor& out, const Tensor& gt, double dynamic_range);
double psnr(const RgbImage& out, const RgbImage& gt, double dynamic_range = 1.0);

struct SsimParams {
  double c1 = 1e-4;       // (0.01 L)^2
  double c2 = 9e-4;       // (0.03 L)^2
  double c3 = 4.5e-4;     // c2 / 2
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  std::size_t window = 11;
  double sigma = 1.5;
  double dynamic_range = 1.0;

  static SsimParams for_range(double dynamic_range);
};

// Mean of l^alpha * c^beta * s^gamma over every window position that fits
// inside the image (no padding). Throws ShapeError if the image is smaller
// than the window.
double ssim(const Tensor& x, const Tensor& y, const SsimParams& p = {});

// Normalized 1-D Gaussian taps.
std::vector<double> gaussian_taps(std::size_t size, double sigma);

struct MscnMaps {
  Tensor coeffs;  // (I - mu) / (sigma + 1)
  Tensor sigma;   // local standard deviation
};

// Mean-subtracted contrast-normalized coefficients with 7x7 Gaussian
// (sigma 7/6) local moments and replicated borders. The input is expected on
// [0,1]; statistics are computed on the 0..255 scale so the stabilizing
// constant 1 keeps its usual meaning.
MscnMaps mscn_maps(const Tensor& gray);
Tensor mscn(const Tensor& gray);

struct AggdFit {
  double gamma = 0.0;    // shape
  double sigma_l = 0.0;  // left scale (standard deviation of the negative side)
  double sigma_r = 0.0;  // right scale
  double eta = 0.0;      // mean
};

inline constexpr double kAggdGammaMin = 0.2;
inline constexpr double kAggdGammaMax = 10.0;

// Moment-matching estimate; gamma is found on a 1e-3 grid over [0.2, 10].
// Throws ValidationError for fewer than 32 samples, constant samples, or
// samples with an empty side.
AggdFit aggd_fit(std::span<const double> samples);

inline constexpr std::size_t kNssFeaturesPerScale = 18;
inline constexpr std::size_t kBrisqueFeatureCount = 36;

// Order per scale: MSCN shape, MSCN variance ((sigma_l^2 + sigma_r^2)/2),
// then for the horizontal, vertical, main-diagonal and anti-diagonal
// neighbor products: shape, mean, sigma_l^2, sigma_r^2. Scale 2 uses the
// 2x2 box-downsampled image.
std::array<double, kNssFeaturesPerScale> nss_scale_features(const Tensor& mscn_coeffs);
std::array<double, kBrisqueFeatureCount> brisque_features(const Tensor& gray);

// 2x2 box average, dropping an odd trailing row/column.
Tensor downsample2(const Tensor& gray);

// Affine score bias + weights . features, for externally trained regressors.
struct BrisqueLinearModel {
  double bias = 0.0;
  std::array<double, kBrisqueFeatureCount> weights{};
};
BrisqueLinearModel load_brisque_linear_model(const std::filesystem::path& path);
double brisque_score(const std::array<double, kBrisqueFeatureCount>& features,
                     const BrisqueLinearModel& model);

struct NiqeModel {
  std::vector<double> mu;
  Tensor sigma;  // (d,d)
  std::size_t patch_size = 96;
  std::size_t scales = 2;

  std::size_t dim() const { return mu.size(); }
};

inline constexpr std::size_t kNiqePatchSize = 96;
inline constexpr double kNiqeSharpnessThreshold = 0.75;

// One 36-vector per patch (18 features at full and half resolution). With
// select_sharp, only patches whose mean local sigma exceeds threshold times
// the sharpest patch's are kept. Throws ShapeError when fewer than 4 patches
// fit.
std::vector<std::vector<double>> niqe_patch_features(const Tensor& gray, std::size_t patch_size,
                                                     bool select_sharp,
                                                     double threshold = kNiqeSharpnessThreshold);

// Gaussian fit (mean, sample covariance) over the sharp patches of all images.
NiqeModel fit_niqe_model(std::span<const Tensor> images, std::size_t patch_size = kNiqePatchSize);

// sqrt((f - mu)^T pinv((Sigma + Sigma_img) / 2) (f - mu))
double niqe_distance(std::span<const double> f, const Tensor& sigma_img, const NiqeModel& model);
double niqe(const Tensor& gray, const NiqeModel& model);

// Symmetric pseudo-inverse via eigendecomposition.
Tensor symmetric_pinv(const Tensor& m);

// Model file: "VCRQ", u32 d, d x f64 mean, d*d x f64 covariance (little
// endian, row-major).
void save_niqe_model(const std::filesystem::path& path, const NiqeModel& model);
NiqeModel load_niqe_model(const std::filesystem::path& path);

}  // namespace vcr
