#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "vcr/iqa.hpp"

namespace vcr {

namespace {

void require_gray(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + " expects a grayscale (H,W) image, got " + shape_string(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": dimension mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

// Separable filter over positions where the whole window fits.
Tensor filter_valid(const Tensor& img, const std::vector<double>& taps) {
  const std::size_t h = img.extent(0), w = img.extent(1), k = taps.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  Tensor rows({h, ow});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += taps[t] * img(y, x + t);
      rows(y, x) = s;
    }
  }
  Tensor out({oh, ow});
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += taps[t] * rows(y + t, x);
      out(y, x) = s;
    }
  }
  return out;
}

// Same-size separable filter with replicated borders.
Tensor filter_replicate(const Tensor& img, const std::vector<double>& taps) {
  const auto h = static_cast<std::ptrdiff_t>(img.extent(0));
  const auto w = static_cast<std::ptrdiff_t>(img.extent(1));
  const auto r = static_cast<std::ptrdiff_t>(taps.size() / 2);
  auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t hi) { return std::clamp<std::ptrdiff_t>(v, 0, hi - 1); };
  Tensor rows(img.shape());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t t = -r; t <= r; ++t) s += taps[t + r] * img(y, clampi(x + t, w));
      rows(y, x) = s;
    }
  }
  Tensor out(img.shape());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t t = -r; t <= r; ++t) s += taps[t + r] * rows(clampi(y + t, h), x);
      out(y, x) = s;
    }
  }
  return out;
}

Tensor elementwise(const Tensor& a, const Tensor& b, double (*op)(double, double)) {
  Tensor out(a.shape());
  for (std::size_t k = 0; k < a.size(); ++k) out.values()[k] = op(a.values()[k], b.values()[k]);
  return out;
}

double signed_pow(double v, double e) {
  if (e == 1.0) return v;
  return std::copysign(std::pow(std::abs(v), e), v);
}

// r(gamma) = Gamma(2/g)^2 / (Gamma(1/g) Gamma(3/g)) on the search grid.
struct RatioTable {
  std::vector<double> gamma;
  std::vector<double> ratio;

  RatioTable() {
    const auto steps = static_cast<std::size_t>(std::lround((kAggdGammaMax - kAggdGammaMin) / 1e-3));
    for (std::size_t i = 0; i <= steps; ++i) {
      const double g = kAggdGammaMin + 1e-3 * static_cast<double>(i);
      gamma.push_back(g);
      ratio.push_back(std::exp(2.0 * std::lgamma(2.0 / g) - std::lgamma(1.0 / g) - std::lgamma(3.0 / g)));
    }
  }
};

const RatioTable& ratio_table() {
  static const RatioTable table;
  return table;
}

void append_aggd(std::vector<double>& out, const std::vector<double>& samples) {
  const AggdFit fit = aggd_fit(samples);
  out.push_back(fit.gamma);
  out.push_back(fit.eta);
  out.push_back(fit.sigma_l * fit.sigma_l);
  out.push_back(fit.sigma_r * fit.sigma_r);
}

}  // namespace

Tensor luminance(const RgbImage& img) {
  Tensor y({img.height(), img.width()});
  auto r = img.r(), g = img.g(), b = img.b();
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    y.values()[p] = 0.299 * r[p] + 0.587 * g[p] + 0.114 * b[p];
  }
  return y;
}

double psnr(const Tensor& out, const Tensor& gt, double dynamic_range) {
  require_same(out, gt, "psnr");
  if (!(dynamic_range > 0.0)) throw ConfigError("dynamic range must be positive");
  std::vector<double> sq(out.size());
  for (std::size_t k = 0; k < sq.size(); ++k) {
    const double d = out.values()[k] - gt.values()[k];
    sq[k] = d * d;
  }
  const double mse = pairwise_sum(sq) / static_cast<double>(sq.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(dynamic_range * dynamic_range / mse);
}

double psnr(const RgbImage& out, const RgbImage& gt, double dynamic_range) {
  return psnr(scale(out.planes(), dynamic_range), scale(gt.planes(), dynamic_range), dynamic_range);
}

SsimParams SsimParams::for_range(double dynamic_range) {
  SsimParams p;
  p.dynamic_range = dynamic_range;
  p.c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  p.c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  p.c3 = p.c2 / 2.0;
  return p;
}

std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  std::vector<double> taps(size);
  const double c = static_cast<double>(size - 1) / 2.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  double sum = 0.0;
  for (double t : taps) sum += t;
  for (double& t : taps) t /= sum;
  return taps;
}

double ssim(const Tensor& x, const Tensor& y, const SsimParams& p) {
  require_gray(x, "ssim");
  require_same(x, y, "ssim");
  if (x.extent(0) < p.window || x.extent(1) < p.window) {
    throw ShapeError("ssim: image " + shape_string(x.shape()) + " is smaller than the " +
                     std::to_string(p.window) + "x" + std::to_string(p.window) + " window");
  }
  const auto taps = gaussian_taps(p.window, p.sigma);
  auto mul = [](double a, double b) { return a * b; };
  const Tensor mx = filter_valid(x, taps);
  const Tensor my = filter_valid(y, taps);
  const Tensor mxx = filter_valid(elementwise(x, x, mul), taps);
  const Tensor myy = filter_valid(elementwise(y, y, mul), taps);
  const Tensor mxy = filter_valid(elementwise(x, y, mul), taps);

  std::vector<double> vals(mx.size());
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const double ux = mx.values()[k], uy = my.values()[k];
    const double vx = std::max(0.0, mxx.values()[k] - ux * ux);
    const double vy = std::max(0.0, myy.values()[k] - uy * uy);
    const double cxy = mxy.values()[k] - ux * uy;
    const double sx = std::sqrt(vx), sy = std::sqrt(vy);
    const double l = (2.0 * ux * uy + p.c1) / (ux * ux + uy * uy + p.c1);
    const double c = (2.0 * sx * sy + p.c2) / (vx + vy + p.c2);
    const double s = (cxy + p.c3) / (sx * sy + p.c3);
    vals[k] = signed_pow(l, p.alpha) * signed_pow(c, p.beta) * signed_pow(s, p.gamma);
  }
  return pairwise_sum(vals) / static_cast<double>(vals.size());
}

constexpr double kMscnFlatFloor = 1e-9;  // on the 0..255 scale

MscnMaps mscn_maps(const Tensor& gray) {
  require_gray(gray, "mscn");
  if (gray.extent(0) < 7 || gray.extent(1) < 7) {
    throw ShapeError("mscn needs at least 7x7 pixels, got " + shape_string(gray.shape()));
  }
  static const std::vector<double> taps = gaussian_taps(7, 7.0 / 6.0);
  const Tensor img = scale(gray, 255.0);
  const Tensor mu = filter_replicate(img, taps);
  const Tensor sq = filter_replicate(elementwise(img, img, [](double a, double b) { return a * b; }), taps);
  MscnMaps out{Tensor(gray.shape()), Tensor(gray.shape())};
  for (std::size_t k = 0; k < img.size(); ++k) {
    const double m = mu.values()[k];
    const double sigma = std::sqrt(std::abs(sq.values()[k] - m * m));
    out.sigma.values()[k] = sigma;
    // a flat window leaves only round-off in I - mu; its sign must not pick an AGGD side
    double centered = img.values()[k] - m;
    if (std::abs(centered) < kMscnFlatFloor) centered = 0.0;
    out.coeffs.values()[k] = centered / (sigma + 1.0);
  }
  return out;
}

Tensor mscn(const Tensor& gray) { return mscn_maps(gray).coeffs; }

AggdFit aggd_fit(std::span<const double> samples) {
  if (samples.size() < 32) {
    throw ValidationError("aggd_fit needs at least 32 samples, got " + std::to_string(samples.size()));
  }
  std::vector<double> left_sq, right_sq, abs_v, sq_v;
  left_sq.reserve(samples.size());
  right_sq.reserve(samples.size());
  abs_v.reserve(samples.size());
  sq_v.reserve(samples.size());
  for (double v : samples) {
    if (!std::isfinite(v)) throw ValidationError("aggd_fit: non-finite sample");
    if (v < 0.0) left_sq.push_back(v * v);
    if (v > 0.0) right_sq.push_back(v * v);
    abs_v.push_back(std::abs(v));
    sq_v.push_back(v * v);
  }
  if (left_sq.empty() || right_sq.empty()) {
    throw ValidationError("aggd_fit: degenerate sample set (needs values on both sides of zero)");
  }
  const double n = static_cast<double>(samples.size());
  const double sigma_l = std::sqrt(pairwise_sum(left_sq) / static_cast<double>(left_sq.size()));
  const double sigma_r = std::sqrt(pairwise_sum(right_sq) / static_cast<double>(right_sq.size()));
  const double ratio_lr = sigma_l / sigma_r;
  const double mean_abs = pairwise_sum(abs_v) / n;
  const double mean_sq = pairwise_sum(sq_v) / n;
  const double r_hat = mean_abs * mean_abs / mean_sq;
  const double big_r = r_hat * (ratio_lr * ratio_lr * ratio_lr + 1.0) * (ratio_lr + 1.0) /
                       ((ratio_lr * ratio_lr + 1.0) * (ratio_lr * ratio_lr + 1.0));

  const RatioTable& table = ratio_table();
  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < table.ratio.size(); ++i) {
    const double err = std::abs(table.ratio[i] - big_r);
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  AggdFit fit;
  fit.gamma = table.gamma[best];
  fit.sigma_l = sigma_l;
  fit.sigma_r = sigma_r;
  const double g = fit.gamma;
  const double scale_factor = std::exp(0.5 * (std::lgamma(1.0 / g) - std::lgamma(3.0 / g)));
  const double beta_l = sigma_l * scale_factor;
  const double beta_r = sigma_r * scale_factor;
  fit.eta = (beta_r - beta_l) * std::exp(std::lgamma(2.0 / g) - std::lgamma(1.0 / g));
  return fit;
}

std::array<double, kNssFeaturesPerScale> nss_scale_features(const Tensor& c) {
  require_gray(c, "nss_scale_features");
  const std::size_t h = c.extent(0), w = c.extent(1);
  if (h < 2 || w < 3) throw ShapeError("nss_scale_features: map too small");

  std::vector<double> feats;
  feats.reserve(kNssFeaturesPerScale);
  const AggdFit base = aggd_fit(c.values());
  feats.push_back(base.gamma);
  feats.push_back(0.5 * (base.sigma_l * base.sigma_l + base.sigma_r * base.sigma_r));

  // (dy, dx) neighbor offsets: horizontal, vertical, main and anti diagonal.
  const std::array<std::pair<int, int>, 4> shifts{{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};
  std::vector<double> prod;
  for (const auto& [dy, dx] : shifts) {
    prod.clear();
    const std::size_t x0 = dx < 0 ? 1 : 0;
    const std::size_t x1 = dx > 0 ? w - 1 : w;
    for (std::size_t y = 0; y + dy < h; ++y) {
      for (std::size_t x = x0; x < x1; ++x) {
        prod.push_back(c(y, x) * c(y + dy, static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + dx)));
      }
    }
    append_aggd(feats, prod);
  }
  std::array<double, kNssFeaturesPerScale> out{};
  std::copy(feats.begin(), feats.end(), out.begin());
  return out;
}

Tensor downsample2(const Tensor& gray) {
  require_gray(gray, "downsample2");
  const std::size_t h = gray.extent(0) / 2, w = gray.extent(1) / 2;
  if (h == 0 || w == 0) throw ShapeError("downsample2: image too small");
  Tensor out({h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      out(y, x) = 0.25 * (gray(2 * y, 2 * x) + gray(2 * y, 2 * x + 1) + gray(2 * y + 1, 2 * x) +
                          gray(2 * y + 1, 2 * x + 1));
    }
  }
  return out;
}

std::array<double, kBrisqueFeatureCount> brisque_features(const Tensor& gray) {
  require_gray(gray, "brisque_features");
  if (gray.extent(0) < 64 || gray.extent(1) < 64) {
    throw ShapeError("brisque_features needs at least 64x64 pixels, got " + shape_string(gray.shape()));
  }
  const auto s1 = nss_scale_features(mscn(gray));
  const auto s2 = nss_scale_features(mscn(downsample2(gray)));
  std::array<double, kBrisqueFeatureCount> out{};
  std::copy(s1.begin(), s1.end(), out.begin());
  std::copy(s2.begin(), s2.end(), out.begin() + kNssFeaturesPerScale);
  return out;
}

BrisqueLinearModel load_brisque_linear_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open BRISQUE coefficient file " + path.string());
  BrisqueLinearModel m;
  std::vector<double> values;
  std::string tok;
  while (is >> tok) {
    if (tok[0] == '#') {
      std::getline(is, tok);
      continue;
    }
    try {
      values.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw IoError(path.string() + ": not a number: " + tok);
    }
  }
  if (values.size() != kBrisqueFeatureCount + 1) {
    throw IoError(path.string() + ": expected bias + 36 weights, got " + std::to_string(values.size()) +
                  " values");
  }
  m.bias = values[0];
  std::copy(values.begin() + 1, values.end(), m.weights.begin());
  return m;
}

double brisque_score(const std::array<double, kBrisqueFeatureCount>& features,
                     const BrisqueLinearModel& model) {
  double s = model.bias;
  for (std::size_t i = 0; i < kBrisqueFeatureCount; ++i) s += model.weights[i] * features[i];
  return s;
}

}  // namespace vcr
