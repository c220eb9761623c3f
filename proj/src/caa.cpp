#include "vcr/caa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vcr/random.hpp"

namespace vcr {

namespace {

void require_square(const Tensor& m, const char* what) {
  if (m.rank() != 2 || m.extent(0) != m.extent(1)) {
    throw ShapeError(std::string(what) + " must be a square matrix, got " + shape_string(m.shape()));
  }
}

void require_hwc_pair(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3) throw ShapeError("feature map must be (H,W,C), got " + shape_string(a.shape()));
  if (a.shape() != b.shape()) {
    throw ShapeError("intensity and chroma features differ: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// grad of |D * M|_1 w.r.t. the (N,C) features: F (S + S^T) / N with
// S = M * sign(D).
Tensor masked_l1_grad(const Tensor& f_hwc, const Tensor& d, const Tensor& mask, double scale) {
  const std::size_t c = d.extent(0);
  const std::size_t n = f_hwc.extent(0) * f_hwc.extent(1);
  std::vector<double> sym(c * c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double s = mask(i, j) * sign(d(i, j));
      sym[i * c + j] += s;
      sym[j * c + i] += s;
    }
  }
  Tensor g(f_hwc.shape());
  auto fv = f_hwc.values();
  auto gv = g.values();
  const double k = scale / static_cast<double>(n);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < c; ++i) acc += fv[p * c + i] * sym[i * c + j];
      gv[p * c + j] = k * acc;
    }
  }
  return g;
}

double masked_l1(const Tensor& d, const Tensor& mask) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) s += std::abs(d.values()[i] * mask.values()[i]);
  return s;
}

Tensor random_kernel(Rng& rng, std::size_t k) { return rng.normal_tensor({1, 2, k, k}, 0.1); }

}  // namespace

void CaaConfig::validate() const {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
    throw ConfigError("mask_ratio must lie in (0,1), got " + std::to_string(mask_ratio));
  }
  if (num_layers == 0) throw ConfigError("num_layers must be positive");
  if (tce_kernel == 0 || tce_kernel % 2 == 0) {
    throw ConfigError("tce_kernel must be odd and positive, got " + std::to_string(tce_kernel));
  }
  if (!(fusion_strength >= 0.0 && fusion_strength <= 1.0)) {
    throw ConfigError("fusion_strength must lie in [0,1], got " + std::to_string(fusion_strength));
  }
  if (!(norm_eps > 0.0)) throw ConfigError("norm_eps must be positive");
}

Tensor hwc_to_chw(const Tensor& t) { return permute(t, {2, 0, 1}); }
Tensor chw_to_hwc(const Tensor& t) { return permute(t, {1, 2, 0}); }

Tensor second_moment(const Tensor& f) {
  if (f.rank() != 3) throw ShapeError("second_moment expects (H,W,C), got " + shape_string(f.shape()));
  const std::size_t n = f.extent(0) * f.extent(1);
  const std::size_t c = f.extent(2);
  Tensor d({c, c});
  auto fv = f.values();
  for (std::size_t p = 0; p < n; ++p) {
    const double* row = fv.data() + p * c;
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = i; j < c; ++j) d(i, j) += row[i] * row[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = i; j < c; ++j) {
      d(i, j) *= inv;
      d(j, i) = d(i, j);
    }
  }
  return d;
}

Tensor variance_map(const Tensor& d_i, const Tensor& d_hv) {
  require_square(d_i, "d_i");
  if (d_i.shape() != d_hv.shape()) {
    throw ShapeError("variance_map operands differ: " + shape_string(d_i.shape()) + " vs " +
                     shape_string(d_hv.shape()));
  }
  Tensor cov(d_i.shape());
  for (std::size_t k = 0; k < cov.size(); ++k) {
    const double a = d_i.values()[k];
    const double b = d_hv.values()[k];
    const double mu = 0.5 * (a + b);
    cov.values()[k] = 0.5 * ((a - mu) * (a - mu) + (b - mu) * (b - mu));
  }
  return cov;
}

std::size_t mask_count(std::size_t channels, double ratio) {
  const std::size_t total = channels * (channels - 1) / 2;
  // Products such as (1/3) * 6 may land a few ulps above an integer.
  const double raw = ratio * static_cast<double>(total);
  const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(count, 1, total);
}

Tensor build_mask(const Tensor& cov, double ratio) {
  require_square(cov, "cov");
  const std::size_t c = cov.extent(0);
  if (c < 2) throw ConfigError("masking needs at least 2 channels");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("mask ratio must lie in (0,1)");

  std::vector<std::pair<std::size_t, std::size_t>> entries;
  entries.reserve(c * (c - 1) / 2);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = i + 1; j < c; ++j) entries.emplace_back(i, j);
  }
  // Entries are generated in lexicographic order; a stable sort keeps that
  // order among equal values.
  std::stable_sort(entries.begin(), entries.end(), [&](const auto& a, const auto& b) {
    return cov(a.first, a.second) > cov(b.first, b.second);
  });

  Tensor mask({c, c});
  const std::size_t count = mask_count(c, ratio);
  for (std::size_t k = 0; k < count; ++k) mask(entries[k].first, entries[k].second) = 1.0;
  return mask;
}

VcfLoss vcf_loss(std::span<const CovReport> reports) { return vcf_loss(reports, reports.size()); }

VcfLoss vcf_loss(std::span<const CovReport> reports, std::size_t layers) {
  if (reports.empty()) throw ConfigError("vcf_loss needs at least one report");
  if (layers != reports.size()) {
    throw ConfigError("vcf_loss: X=" + std::to_string(layers) + " but " +
                      std::to_string(reports.size()) + " reports");
  }
  const double inv_x = 1.0 / static_cast<double>(layers);
  VcfLoss out;
  for (const CovReport& r : reports) {
    if (r.mask.shape() != r.d_i.shape() || r.d_hv.shape() != r.d_i.shape()) {
      throw ShapeError("report " + std::to_string(r.layer) + " has inconsistent matrix shapes");
    }
    out.value += inv_x * (masked_l1(r.d_i, r.mask) + masked_l1(r.d_hv, r.mask));
    out.grad_i.push_back(masked_l1_grad(r.features_i, r.d_i, r.mask, inv_x));
    out.grad_hv.push_back(masked_l1_grad(r.features_hv, r.d_hv, r.mask, inv_x));
  }
  return out;
}

std::pair<Tensor, Tensor> vcf_filter_fuse(const Tensor& f_i, const Tensor& f_hv, const Tensor& mask,
                                          double strength) {
  require_hwc_pair(f_i, f_hv);
  require_square(mask, "mask");
  const std::size_t c = f_i.extent(2);
  if (mask.extent(0) != c) {
    throw ShapeError("mask " + shape_string(mask.shape()) + " does not match " + std::to_string(c) +
                     " channels");
  }

  std::vector<double> gate(c, 1.0);
  if (c >= 2) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double involvement = 0.0;
      for (std::size_t k = 0; k < c; ++k) involvement += mask(ch, k) + mask(k, ch);
      involvement /= static_cast<double>(c - 1);
      gate[ch] = 1.0 - strength * std::min(1.0, involvement);
    }
  }

  auto fuse = [&](const Tensor& f) {
    Tensor out(f.shape());
    auto src = f.values();
    auto dst = out.values();
    for (std::size_t k = 0; k < src.size(); ++k) {
      dst[k] = 0.5 * (src[k] + gate[k % c] * src[k]);
    }
    return out;
  };
  return {fuse(f_i), fuse(f_hv)};
}

Tensor tce_attention(const Tensor& view, const TceBranch& branch, double eps) {
  const Tensor& kernel = branch.kernel;
  if (kernel.rank() != 4 || kernel.extent(0) != 1 || kernel.extent(1) != 2) {
    throw ShapeError("TCE kernel must be (1,2,k,k), got " + shape_string(kernel.shape()));
  }
  Tensor att = instance_norm(conv2d(gb_pool(view), kernel), eps);
  for (double& v : att.values()) v = sigmoid(branch.norm_gain * v + branch.norm_bias);
  return att;
}

Tensor tce(const Tensor& f, const TceWeights& weights, double eps) {
  if (f.rank() != 3) throw ShapeError("tce expects (C,H,W), got " + shape_string(f.shape()));
  Tensor acc(f.shape());
  for (std::size_t y = 0; y < 3; ++y) {
    const auto& axes = kTceViews[y];
    Tensor view = permute(f, axes);
    const Tensor att = tce_attention(view, weights.branches[y], eps);
    const std::size_t plane = att.size();
    auto vv = view.values();
    for (std::size_t k = 0; k < vv.size(); ++k) vv[k] *= att.values()[k % plane];
    const auto inv = inverse_permutation(axes);
    const Tensor back = permute(view, inv);
    for (std::size_t k = 0; k < acc.size(); ++k) acc.values()[k] += back.values()[k];
  }
  Tensor out = f;
  for (std::size_t k = 0; k < out.size(); ++k) out.values()[k] += acc.values()[k] / 3.0;
  return out;
}

CaaWeights CaaWeights::zeros(const CaaConfig& cfg) {
  cfg.validate();
  CaaWeights w;
  const std::size_t k = cfg.tce_kernel;
  for (std::size_t x = 0; x < cfg.num_layers; ++x) {
    CaaLayerWeights layer;
    for (auto* t : {&layer.tce_i, &layer.tce_hv}) {
      for (auto& b : t->branches) b = TceBranch{Tensor({1, 2, k, k}), 1.0, 0.0};
    }
    w.layers.push_back(std::move(layer));
  }
  return w;
}

CaaWeights CaaWeights::random(const CaaConfig& cfg, std::uint64_t seed) {
  CaaWeights w = zeros(cfg);
  Rng rng(seed);
  for (auto& layer : w.layers) {
    for (auto* t : {&layer.tce_i, &layer.tce_hv}) {
      for (auto& b : t->branches) b.kernel = random_kernel(rng, cfg.tce_kernel);
    }
  }
  return w;
}

void CaaWeights::check(const CaaConfig& cfg) const {
  if (layers.size() != cfg.num_layers) {
    throw ShapeError("weights carry " + std::to_string(layers.size()) + " layers, config expects " +
                     std::to_string(cfg.num_layers));
  }
  const Shape expected{1, 2, cfg.tce_kernel, cfg.tce_kernel};
  for (const auto& layer : layers) {
    for (const auto* t : {&layer.tce_i, &layer.tce_hv}) {
      for (const auto& b : t->branches) {
        if (b.kernel.shape() != expected) {
          throw ShapeError("TCE kernel shape " + shape_string(b.kernel.shape()) + " does not match " +
                           shape_string(expected));
        }
      }
    }
  }
}

CaaOutput caa_forward(const Tensor& f_i, const Tensor& f_hv, const CaaConfig& cfg,
                      const CaaWeights& weights) {
  cfg.validate();
  weights.check(cfg);
  require_hwc_pair(f_i, f_hv);

  CaaOutput out;
  Tensor cur_i = f_i;
  Tensor cur_hv = f_hv;
  for (std::size_t x = 0; x < cfg.num_layers; ++x) {
    CovReport r;
    r.layer = x + 1;
    r.features_i = chw_to_hwc(instance_norm(hwc_to_chw(cur_i), cfg.norm_eps));
    r.features_hv = chw_to_hwc(instance_norm(hwc_to_chw(cur_hv), cfg.norm_eps));
    r.d_i = second_moment(r.features_i);
    r.d_hv = second_moment(r.features_hv);
    r.cov = variance_map(r.d_i, r.d_hv);
    r.mask = build_mask(r.cov, cfg.mask_ratio);

    auto [fused_i, fused_hv] = vcf_filter_fuse(r.features_i, r.features_hv, r.mask, cfg.fusion_strength);
    const auto& lw = weights.layers[x];
    cur_i = chw_to_hwc(tce(hwc_to_chw(fused_i), lw.tce_i, cfg.norm_eps));
    cur_hv = chw_to_hwc(tce(hwc_to_chw(fused_hv), lw.tce_hv, cfg.norm_eps));
    out.reports.push_back(std::move(r));
  }
  out.f_i = std::move(cur_i);
  out.f_hv = std::move(cur_hv);
  return out;
}

}  // namespace vcr
