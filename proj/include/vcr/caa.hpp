#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "vcr/tensor.hpp"

namespace vcr {

// Channel adaptive adjustment: variance-aware channel filtering followed by
// triplet channel enhancement, stacked `num_layers` times.
//
// Feature maps handed to and returned from this module are (H,W,C); the
// enhancement stage works on (C,H,W) views internally.

struct CaaConfig {
  double mask_ratio = 1.0 / 3.0;
  std::size_t num_layers = 3;
  std::size_t tce_kernel = 7;
  double fusion_strength = 1.0;
  double norm_eps = 1e-5;

  void validate() const;
};

// Second-moment statistics of one layer, plus the normalized features they
// were computed from (needed for the filtering loss gradient).
struct CovReport {
  std::size_t layer = 1;  // 1-based
  Tensor d_i;             // (C,C)
  Tensor d_hv;            // (C,C)
  Tensor cov;             // (C,C)
  Tensor mask;            // (C,C), strict upper triangle only
  Tensor features_i;      // (H,W,C)
  Tensor features_hv;     // (H,W,C)
};

// D = F^T F / (H*W) for an (H,W,C) map, returned as (C,C).
Tensor second_moment(const Tensor& f_hwc);

// Elementwise ((A - mu)^2 + (B - mu)^2) / 2 with mu = (A + B) / 2.
Tensor variance_map(const Tensor& d_i, const Tensor& d_hv);

// Number of strict-upper-triangle entries masked for C channels.
std::size_t mask_count(std::size_t channels, double ratio);

// Marks the mask_count(C, ratio) largest strict-upper-triangle entries of
// cov; ties go to the lexicographically smaller (i, j).
Tensor build_mask(const Tensor& cov, double ratio);

struct VcfLoss {
  double value = 0.0;
  std::vector<Tensor> grad_i;   // d value / d features_i, one per report
  std::vector<Tensor> grad_hv;  // d value / d features_hv
};

// (1/X) * sum over layers of |D_I * M|_1 + |D_hv * M|_1, with gradients
// through D and the mask held constant. `layers` must equal reports.size().
VcfLoss vcf_loss(std::span<const CovReport> reports, std::size_t layers);
VcfLoss vcf_loss(std::span<const CovReport> reports);

// Per-channel gates from mask involvement, fused with the input by
// arithmetic mean. Inputs are (H,W,C).
std::pair<Tensor, Tensor> vcf_filter_fuse(const Tensor& f_i, const Tensor& f_hv, const Tensor& mask,
                                          double strength);

struct TceBranch {
  Tensor kernel;  // (1,2,k,k)
  double norm_gain = 1.0;
  double norm_bias = 0.0;
};

struct TceWeights {
  std::array<TceBranch, 3> branches;
};

// Permutations giving the three views of a (C,H,W) map: (H,C,W) for the
// C-W interaction, (W,C,H) for C-H, identity for spatial attention.
inline constexpr std::array<std::array<std::size_t, 3>, 3> kTceViews{{{1, 0, 2}, {2, 0, 1}, {0, 1, 2}}};

// Attention map of one branch for an already permuted view: shape
// (1, d1, d2) where d1, d2 are the view's trailing extents.
Tensor tce_attention(const Tensor& view, const TceBranch& branch, double eps);

// f + mean over branches of permute^-1(attention * permute(f)). f is (C,H,W).
Tensor tce(const Tensor& f, const TceWeights& weights, double eps = 1e-5);

struct CaaLayerWeights {
  TceWeights tce_i;
  TceWeights tce_hv;
};

struct CaaWeights {
  std::vector<CaaLayerWeights> layers;

  static CaaWeights zeros(const CaaConfig& cfg);
  // Kernels ~ N(0, 0.1^2), gains 1, biases 0.
  static CaaWeights random(const CaaConfig& cfg, std::uint64_t seed);

  void check(const CaaConfig& cfg) const;
};

struct CaaOutput {
  Tensor f_i;  // (H,W,C)
  Tensor f_hv;
  std::vector<CovReport> reports;
};

CaaOutput caa_forward(const Tensor& f_i, const Tensor& f_hv, const CaaConfig& cfg,
                      const CaaWeights& weights);

// Weight bundle: <dir>/manifest.txt maps keys like
// "layer1.tce_i.branch2.kernel" to tensor files, <dir>/caa.cfg carries the
// configuration.
void save_weight_bundle(const std::filesystem::path& dir, const CaaConfig& cfg,
                        const CaaWeights& weights);
CaaWeights load_weight_bundle(const std::filesystem::path& dir, CaaConfig& cfg_out);

void save_caa_config(const std::filesystem::path& path, const CaaConfig& cfg);
CaaConfig load_caa_config(const std::filesystem::path& path);

// (H,W,C) <-> (C,H,W)
Tensor hwc_to_chw(const Tensor& t);
Tensor chw_to_hwc(const Tensor& t);

}  // namespace vcr
