#include "vcr/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "vcr/caa.hpp"
#include "vcr/colorspace.hpp"
#include "vcr/gradcheck.hpp"
#include "vcr/iqa.hpp"
#include "vcr/losses.hpp"
#include "vcr/random.hpp"

namespace vcr {

namespace {

CheckResult below(std::string name, double measured, double tol, std::string detail = {}) {
  return {std::move(name), measured < tol, measured, tol, std::move(detail)};
}

Rgb random_bright_pixel(Rng& rng) {
  for (;;) {
    Rgb px{rng.uniform(), rng.uniform(), rng.uniform()};
    if (std::max({px.r, px.g, px.b}) > 1e-4) return px;
  }
}

CheckResult check_hvi_round_trip(Rng& rng) {
  const HviParams p;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Rgb px = random_bright_pixel(rng);
    const Rgb back = hsv_to_rgb(phvit(hvt(rgb_to_hsv(px), p), p));
    worst = std::max({worst, std::abs(back.r - px.r), std::abs(back.g - px.g), std::abs(back.b - px.b)});
  }
  return below("hvi_round_trip", worst, 1e-5, "10000 pixels, k=1");
}

CheckResult check_hsv_round_trip(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Rgb px{rng.uniform(), rng.uniform(), rng.uniform()};
    const Rgb back = hsv_to_rgb(rgb_to_hsv(px));
    worst = std::max({worst, std::abs(back.r - px.r), std::abs(back.g - px.g), std::abs(back.b - px.b)});
  }
  return below("hsv_round_trip", worst, 1e-9);
}

CheckResult check_chroma_magnitude(Rng& rng) {
  const HviParams p;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Hsv hsv = rgb_to_hsv(Rgb{rng.uniform(), rng.uniform(), rng.uniform()});
    const Hvi hvi = hvt(hsv, p);
    const double expected = intensity_collapse(hsv.v, p.k, p.eps) * hsv.s;
    worst = std::max(worst, std::abs(std::hypot(hvi.hhat, hvi.vhat) - expected));
  }
  return below("chroma_magnitude", worst, 1e-9);
}

Tensor random_symmetric(Rng& rng, std::size_t c) {
  Tensor m({c, c});
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = i; j < c; ++j) m(i, j) = m(j, i) = rng.uniform(-2.0, 2.0);
  }
  return m;
}

CheckResult check_variance_identity(Rng& rng, const SelfcheckOptions& opt) {
  const auto impl = opt.variance_map_impl ? opt.variance_map_impl : [](const Tensor& a, const Tensor& b) {
    return variance_map(a, b);
  };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t c = 2 + static_cast<std::size_t>(rng.uniform() * 7);
    const Tensor a = random_symmetric(rng, c);
    const Tensor b = random_symmetric(rng, c);
    const Tensor cov = impl(a, b);
    for (std::size_t k = 0; k < cov.size(); ++k) {
      const double d = 0.5 * (a.values()[k] - b.values()[k]);
      worst = std::max(worst, std::abs(cov.values()[k] - d * d));
    }
  }
  return below("variance_map_identity", worst, 1e-12, "1000 symmetric pairs");
}

CheckResult check_mask_contract(Rng& rng) {
  std::size_t failures = 0;
  for (std::size_t c = 2; c <= 16; ++c) {
    const Tensor mask = build_mask(random_symmetric(rng, c), 1.0 / 3.0);
    const std::size_t t = c * (c - 1) / 2;
    const auto expected = static_cast<std::size_t>((t + 2) / 3);  // ceil(t/3)
    std::size_t count = 0;
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        if (mask(i, j) != 0.0) {
          ++count;
          if (i >= j || mask(i, j) != 1.0) ++failures;
        }
      }
    }
    if (count != expected) ++failures;
  }
  const bool default_ratio = CaaConfig{}.mask_ratio == 1.0 / 3.0;
  if (!default_ratio) ++failures;
  return {"mask_contract", failures == 0, static_cast<double>(failures), 0.0, "C=2..16, ratio 1/3"};
}

CheckResult check_permute_oracle(Rng& rng) {
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const std::size_t a = 1 + n % 4, b = 1 + (n / 4) % 4, c = 2 + n % 3;
    const Tensor t = rng.uniform_tensor({a, b, c}, -1.0, 1.0);
    std::array<std::size_t, 3> axes{0, 1, 2};
    for (int s = 0; s < n % 6; ++s) std::next_permutation(axes.begin(), axes.end());
    const Tensor out = permute(t, axes);
    const std::size_t ext[3] = {a, b, c};
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        for (std::size_t k = 0; k < c; ++k) {
          const std::size_t idx[3] = {i, j, k};
          const std::size_t oi = idx[axes[0]], oj = idx[axes[1]], ok = idx[axes[2]];
          const std::size_t off = (oi * ext[axes[1]] + oj) * ext[axes[2]] + ok;
          worst = std::max(worst, std::abs(out.values()[off] - t(i, j, k)));
        }
      }
    }
  }
  return {"permute_oracle", worst == 0.0, worst, 0.0, "100 instances, exact"};
}

CheckResult check_conv_oracle(Rng& rng) {
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const std::size_t cin = 1 + n % 3, cout = 1 + (n / 3) % 2, h = 3 + n % 5, w = 4 + n % 4;
    const std::size_t k = n % 2 ? 3 : 5;
    const Tensor x = rng.uniform_tensor({cin, h, w}, -1.0, 1.0);
    const Tensor ker = rng.uniform_tensor({cout, cin, k, k}, -1.0, 1.0);
    const Tensor y = conv2d(x, ker);
    const long r = static_cast<long>(k / 2);
    for (std::size_t o = 0; o < cout; ++o) {
      for (long yy = 0; yy < static_cast<long>(h); ++yy) {
        for (long xx = 0; xx < static_cast<long>(w); ++xx) {
          double s = 0.0;
          for (std::size_t c = 0; c < cin; ++c) {
            for (long dy = -r; dy <= r; ++dy) {
              for (long dx = -r; dx <= r; ++dx) {
                const long sy = yy + dy, sx = xx + dx;
                if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
                s += ker(o, c, dy + r, dx + r) * x(c, sy, sx);
              }
            }
          }
          worst = std::max(worst, std::abs(s - y(o, yy, xx)));
        }
      }
    }
  }
  return below("conv2d_oracle", worst, 1e-12, "100 instances");
}

CheckResult check_second_moment_oracle(Rng& rng) {
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const std::size_t h = 1 + n % 5, w = 1 + (n / 5) % 4, c = 1 + n % 4;
    const Tensor f = rng.uniform_tensor({h, w, c}, -1.0, 1.0);
    const Tensor d = second_moment(f);
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) s += f(y, x, i) * f(y, x, j);
        }
        worst = std::max(worst, std::abs(s / static_cast<double>(h * w) - d(i, j)));
      }
    }
  }
  return below("second_moment_oracle", worst, 1e-12, "100 instances");
}

CovReport report_for(const Tensor& fi, const Tensor& fhv, const Tensor& mask) {
  CovReport r;
  r.features_i = fi;
  r.features_hv = fhv;
  r.d_i = second_moment(fi);
  r.d_hv = second_moment(fhv);
  r.cov = variance_map(r.d_i, r.d_hv);
  r.mask = mask;
  return r;
}

CheckResult check_vcf_gradient(Rng& rng) {
  const Tensor fi = rng.uniform_tensor({4, 3, 3}, 0.1, 1.0);
  const Tensor fhv = rng.uniform_tensor({4, 3, 3}, -1.0, -0.1);
  const Tensor mask = build_mask(variance_map(second_moment(fi), second_moment(fhv)), 1.0 / 3.0);
  const CovReport base = report_for(fi, fhv, mask);
  const VcfLoss analytic = vcf_loss(std::span(&base, 1));
  auto loss_i = [&](const Tensor& x) {
    const CovReport r = report_for(x, fhv, mask);
    return vcf_loss(std::span(&r, 1)).value;
  };
  auto loss_hv = [&](const Tensor& x) {
    const CovReport r = report_for(fi, x, mask);
    return vcf_loss(std::span(&r, 1)).value;
  };
  const double err = std::max(max_relative_error(analytic.grad_i[0], numeric_gradient(loss_i, fi)),
                              max_relative_error(analytic.grad_hv[0], numeric_gradient(loss_hv, fhv)));
  return below("vcf_gradient", err, 1e-4, "central differences, step 1e-5");
}

CheckResult check_cda_gradient(Rng& rng) {
  const Tensor pred = rng.uniform_tensor({4, 3, 3}, -1.0, 1.0);
  const Tensor gt = rng.uniform_tensor({4, 3, 3}, -1.0, 1.0);
  const auto analytic = cda_loss(pred, gt, 1.0);
  const Tensor numeric = numeric_gradient([&](const Tensor& x) { return cda_loss(x, gt, 1.0).value; }, pred);
  return below("cda_gradient", max_relative_error(analytic.grad, numeric), 1e-4);
}

CheckResult check_rec_gradient(Rng& rng) {
  const HviParams p;
  auto image = [&] {
    Tensor t = rng.uniform_tensor({3, 4, 3}, 0.05, 0.95);
    return RgbImage(std::move(t));
  };
  const RgbImage out = image(), gt = image();
  const HviImage out_h = rgb_to_hvi(out, p), gt_h = rgb_to_hvi(gt, p);
  const RecLoss analytic = rec_loss(out, gt, out_h, gt_h, 1.0);
  const Tensor n_rgb = numeric_gradient(
      [&](const Tensor& x) { return rec_loss(RgbImage(x), gt, out_h, gt_h, 1.0).value; }, out.planes());
  const Tensor n_hvi = numeric_gradient(
      [&](const Tensor& x) { return rec_loss(out, gt, HviImage(x, p.k, p.eps), gt_h, 1.0).value; },
      out_h.planes());
  const double err = std::max(max_relative_error(analytic.grad_rgb, n_rgb),
                              max_relative_error(analytic.grad_hvi, n_hvi));
  return below("rec_gradient", err, 1e-4);
}

CheckResult check_cda_properties(Rng& rng) {
  double min_value = 0.0;
  double worst_zero = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Tensor a = rng.uniform_tensor({2, 3, 3}, -2.0, 2.0);
    const Tensor b = rng.uniform_tensor({2, 3, 3}, -2.0, 2.0);
    min_value = std::min(min_value, cda_loss(a, b, 1.0).value);
    worst_zero = std::max(worst_zero, std::abs(cda_loss(a, a, 1.0).value));
    Tensor shifted = a;
    for (double& v : shifted.values()) v += 3.0;
    worst_zero = std::max(worst_zero, std::abs(cda_loss(shifted, a, 1.0).value));
  }
  const bool ok = min_value >= -1e-12 && worst_zero < 1e-12;
  return {"cda_properties", ok, std::max(-min_value, worst_zero), 1e-12, "Gibbs, identity, shift"};
}

CheckResult check_tce_closed_form(Rng& rng) {
  CaaConfig cfg;
  cfg.num_layers = 1;
  const TceWeights zero = CaaWeights::zeros(cfg).layers[0].tce_i;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Tensor f = rng.uniform_tensor({2 + static_cast<std::size_t>(i % 4), 3 + static_cast<std::size_t>(i % 5),
                                         4 + static_cast<std::size_t>(i % 3)},
                                        -1.0, 1.0);
    worst = std::max(worst, max_abs_diff(tce(f, zero), scale(f, 1.5)));
  }
  return below("tce_closed_form", worst, 1e-12, "zero kernels give 1.5 f");
}

CheckResult check_softmax(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Tensor f = rng.uniform_tensor({2, 4, 4}, -1e6, 1e6);
    const Tensor p = channel_softmax(f, 1.0);
    for (std::size_t c = 0; c < 2; ++c) {
      double s = 0.0;
      for (std::size_t a = 0; a < 16; ++a) s += p(c, a);
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return below("softmax_normalization", worst, 1e-9, "inputs up to 1e6");
}

CheckResult check_psnr() {
  const Tensor gt({8, 8}, 0.0);
  const Tensor out({8, 8}, 0.5);
  const double err = std::abs(psnr(out, gt, 1.0) - 10.0 * std::log10(4.0));
  return below("psnr_closed_form", err, 1e-9, "0.5 offset on [0,1]");
}

CheckResult check_ssim(Rng& rng) {
  const Tensor x = rng.uniform_tensor({24, 24});
  const Tensor y = rng.uniform_tensor({24, 24});
  const double err = std::max(std::abs(ssim(x, x) - 1.0), std::abs(ssim(x, y) - ssim(y, x)));
  return below("ssim_identity_symmetry", err, 1e-9);
}

CheckResult check_loss_schedule() {
  LossWeights w;
  const bool defaults = w.lambda_hvi == 1.0 && w.lambda_vcf == 0.5 && w.lambda_cda == 0.5;
  w.warmup = true;
  const double rec = 0.731;
  const bool warm = total_loss(rec, 2.0, 4.0, w) == rec;
  return {"loss_schedule", defaults && warm, warm ? 0.0 : 1.0, 0.0, "warmup total equals rec"};
}

CheckResult check_aggd(Rng& rng) {
  // Symmetric generalized Gaussian via |x| = beta * G^(1/gamma), G ~ Gamma(1/gamma).
  const double gamma = 2.0, sigma = 1.0;
  const double beta = sigma * std::exp(0.5 * (std::lgamma(1.0 / gamma) - std::lgamma(3.0 / gamma)));
  std::gamma_distribution<double> g(1.0 / gamma, 1.0);
  std::vector<double> s(100000);
  for (double& v : s) {
    const double mag = beta * std::pow(g(rng.engine()), 1.0 / gamma);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  const AggdFit fit = aggd_fit(s);
  const double err = std::max({std::abs(fit.gamma - gamma) / gamma, std::abs(fit.sigma_l - sigma) / sigma,
                               std::abs(fit.sigma_r - sigma) / sigma});
  return below("aggd_recovery", err, 0.1, "gamma=2, n=1e5");
}

}  // namespace

std::vector<CheckResult> run_selfcheck(const SelfcheckOptions& options) {
  Rng rng(options.seed);
  std::vector<CheckResult> results;
  results.push_back(check_hvi_round_trip(rng));
  results.push_back(check_hsv_round_trip(rng));
  results.push_back(check_chroma_magnitude(rng));
  results.push_back(check_variance_identity(rng, options));
  results.push_back(check_mask_contract(rng));
  results.push_back(check_permute_oracle(rng));
  results.push_back(check_conv_oracle(rng));
  results.push_back(check_second_moment_oracle(rng));
  results.push_back(check_vcf_gradient(rng));
  results.push_back(check_cda_gradient(rng));
  results.push_back(check_rec_gradient(rng));
  results.push_back(check_cda_properties(rng));
  results.push_back(check_tce_closed_form(rng));
  results.push_back(check_softmax(rng));
  results.push_back(check_psnr());
  results.push_back(check_ssim(rng));
  results.push_back(check_loss_schedule());
  results.push_back(check_aggd(rng));
  return results;
}

std::string format_check(const CheckResult& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "measured=%.3e\ttol=%.1e", r.measured, r.tolerance);
  std::string line = std::string(r.passed ? "PASS" : "FAIL") + "\t" + r.name + "\t" + buf;
  if (!r.detail.empty()) line += "\t" + r.detail;
  return line;
}

}  // namespace vcr
