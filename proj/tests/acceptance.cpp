// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "support/oracles.hpp"
#include "vcr/caa.hpp"
#include "vcr/colorspace.hpp"
#include "vcr/gradcheck.hpp"
#include "vcr/iqa.hpp"
#include "vcr/losses.hpp"
#include "vcr/random.hpp"

using namespace vcr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Tensor random_symmetric(Rng& rng, std::size_t c) {
  Tensor m = rng.normal_tensor({c, c});
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i);
  return m;
}

Outcome hvi_round_trip() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  Tensor planes({3, 100, 100});
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) {
    double r, g, b;
    do {
      r = rng.uniform();
      g = rng.uniform();
      b = rng.uniform();
    } while (std::max({r, g, b}) <= 1e-4);
    planes.values()[i] = r;
    planes.values()[n + i] = g;
    planes.values()[2 * n + i] = b;
  }
  const RgbImage img(planes);
  const HviParams p;
  const RgbImage back = hvi_to_rgb(rgb_to_hvi(img, p), p);
  const double err = test::max_abs(back.planes(), img.planes());
  const double secs = seconds_since(t0);
  return {err < 1e-5 && secs < 1.0, fmt("max abs error %.3g (< 1e-5), %.3f s (< 1 s)", err, secs)};
}

Outcome variance_identity() {
  Rng rng(1002);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t c = 2 + static_cast<std::size_t>(i % 15);
    const Tensor a = random_symmetric(rng, c), b = random_symmetric(rng, c);
    const Tensor cov = variance_map(a, b);
    for (std::size_t k = 0; k < cov.size(); ++k) {
      const double d = a.values()[k] - b.values()[k];
      worst = std::max(worst, std::abs(cov.values()[k] - 0.25 * d * d));
    }
  }
  return {worst <= 1e-12, fmt("1000 pairs, max deviation %.3g (<= 1e-12)", worst)};
}

Outcome mask_contract() {
  Rng rng(1003);
  const double ratio = CaaConfig{}.mask_ratio;
  bool ok = ratio == 1.0 / 3.0;
  std::string bad;
  for (std::size_t c = 2; c <= 16; ++c) {
    const std::size_t t = c * (c - 1) / 2;
    const std::size_t expected = (t + 2) / 3;
    const Tensor m = build_mask(variance_map(random_symmetric(rng, c), random_symmetric(rng, c)), ratio);
    std::size_t pop = 0;
    bool upper = true;
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        if (m(i, j) != 0.0) {
          ++pop;
          upper = upper && i < j;
        }
      }
    if (pop != expected || !upper) {
      ok = false;
      bad += " C=" + std::to_string(c);
    }
  }
  return {ok, "C=2..16 popcount == ceil(T/3), strict upper support, default ratio 1/3" +
                  (bad.empty() ? std::string() : "; failing:" + bad)};
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  Rng rng(1004);
  double worst_rec = 0.0, worst_vcf = 0.0, worst_cda = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    // reconstruction: 36 samples per image (same count as a (4,3,3) tensor)
    const Tensor x = rng.uniform_tensor({3, 4, 3});
    Tensor y = rng.uniform_tensor({3, 4, 3});
    for (std::size_t k = 0; k < y.size(); ++k)
      if (std::abs(x.values()[k] - y.values()[k]) < 1e-3) y.values()[k] += 0.01;
    const Tensor hx = rng.uniform_tensor({3, 4, 3});
    Tensor hy = rng.uniform_tensor({3, 4, 3});
    for (std::size_t k = 0; k < hy.size(); ++k)
      if (std::abs(hx.values()[k] - hy.values()[k]) < 1e-3) hy.values()[k] += 0.01;
    auto rec = [&](const Tensor& a, const Tensor& h) {
      return rec_loss(RgbImage(a), RgbImage(y), HviImage(h, 1, 1e-8), HviImage(hy, 1, 1e-8), 1.0);
    };
    const RecLoss r = rec(x, hx);
    worst_rec = std::max(worst_rec, max_relative_error(
                                        r.grad_rgb, numeric_gradient([&](const Tensor& t) { return rec(t, hx).value; }, x)));
    worst_rec = std::max(worst_rec, max_relative_error(
                                        r.grad_hvi, numeric_gradient([&](const Tensor& t) { return rec(x, t).value; }, hx)));

    // channel filtering on (4,3,3) feature maps
    const Tensor fi = rng.normal_tensor({4, 3, 3}), fh = rng.normal_tensor({4, 3, 3});
    const Tensor mask = build_mask(variance_map(second_moment(fi), second_moment(fh)), 1.0 / 3.0);
    auto vcf = [&](const Tensor& a, const Tensor& b) {
      CovReport rep;
      rep.features_i = a;
      rep.features_hv = b;
      rep.d_i = second_moment(a);
      rep.d_hv = second_moment(b);
      rep.mask = mask;
      return vcf_loss(std::vector{rep});
    };
    const VcfLoss v = vcf(fi, fh);
    worst_vcf = std::max(worst_vcf, max_relative_error(
                                        v.grad_i[0], numeric_gradient([&](const Tensor& t) { return vcf(t, fh).value; }, fi)));
    worst_vcf = std::max(worst_vcf, max_relative_error(
                                        v.grad_hv[0], numeric_gradient([&](const Tensor& t) { return vcf(fi, t).value; }, fh)));

    // distribution alignment on (4,3,3)
    const Tensor p = rng.normal_tensor({4, 3, 3}), q = rng.normal_tensor({4, 3, 3});
    const Tensor g = cda_loss(p, q, 1.0).grad;
    worst_cda = std::max(worst_cda, max_relative_error(
                                        g, numeric_gradient([&](const Tensor& t) { return cda_loss(t, q, 1.0).value; }, p)));
  }
  const double secs = seconds_since(t0);
  const double worst = std::max({worst_rec, worst_vcf, worst_cda});
  return {worst < 1e-4 && secs < 10.0,
          fmt("max rel error rec %.2g, vcf %.2g, cda %.2g (< 1e-4)", worst_rec, worst_vcf, worst_cda) +
              fmt(", %.3f s (< 10 s)", secs)};
}

Outcome cda_properties() {
  Rng rng(1005);
  double min_loss = std::numeric_limits<double>::infinity(), self = 0.0, shift = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Tensor a = rng.normal_tensor({4, 3, 3}, 2.0), b = rng.normal_tensor({4, 3, 3}, 2.0);
    min_loss = std::min(min_loss, cda_loss(a, b, 1.0).value);
    self = std::max(self, std::abs(cda_loss(a, a, 1.0).value));
    shift = std::max(shift, std::abs(cda_loss(add(a, Tensor(a.shape(), rng.uniform(-10, 10))), a, 1.0).value));
  }
  const double lg = std::log(3.0);
  const double bern = cda_loss(Tensor({2, 1, 2}, {0.0, lg, 0.0, lg}), Tensor({2, 1, 2}, 0.0), 1.0).value;
  const bool ok = min_loss >= -1e-12 && self < 1e-12 && shift < 1e-12 && std::abs(bern - 0.261624) < 1e-5;
  return {ok, fmt("min %.3g, self %.3g, shift %.3g", min_loss, self, shift) + fmt(", Bernoulli %.7f", bern)};
}

Outcome tce_closed_form() {
  Rng rng(1006);
  const TceWeights zero = CaaWeights::zeros(CaaConfig{}).layers[0].tce_i;
  double worst = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const Tensor f = rng.normal_tensor({1 + i % 5, 2 + i % 4, 3 + i % 6});
    worst = std::max(worst, test::max_abs(tce(f, zero), scale(f, 1.5)));
  }
  return {worst <= 1e-12, fmt("20 shapes, max |tce(f) - 1.5 f| = %.3g", worst)};
}

Outcome metric_sanity() {
  const double p = psnr(Tensor({32, 32}, 0.5), Tensor({32, 32}, 0.0), 1.0);
  Rng rng(1007);
  const Tensor x = rng.uniform_tensor({40, 40}), y = rng.uniform_tensor({40, 40});
  const double self = ssim(x, x), sym = std::abs(ssim(x, y) - ssim(y, x));
  const bool ok = std::abs(p - 6.0206) < 1e-3 && std::abs(self - 1.0) < 1e-9 && sym < 1e-9;
  return {ok, fmt("psnr %.6f dB, ssim(x,x) %.12f, |ssim(x,y)-ssim(y,x)| %.3g", p, self, sym)};
}

Outcome aggd_recovery() {
  const auto t0 = Clock::now();
  Rng rng(1008);
  double worst = 0.0;
  for (double gamma : {0.8, 1.0, 2.0, 3.0}) {
    const AggdFit f = aggd_fit(test::sample_aggd(rng, 100000, gamma, 0.6, 1.1));
    worst = std::max({worst, std::abs(f.gamma - gamma) / gamma, std::abs(f.sigma_l - 0.6) / 0.6,
                      std::abs(f.sigma_r - 1.1) / 1.1});
  }
  const double secs = seconds_since(t0);
  return {worst < 0.1 && secs < 5.0, fmt("worst relative error %.3f (< 0.1), %.3f s (< 5 s)", worst, secs)};
}

Outcome niqe_ordering() {
  const char* fit_on[] = {"natural_astronaut.png", "natural_coffee.png", "natural_chelsea.png", "natural_rocket.png",
                          "natural_brick.png"};
  std::vector<Tensor> imgs;
  for (const char* n : fit_on) imgs.push_back(test::load_gray(n));
  const NiqeModel model = fit_niqe_model(imgs);
  const double noise = niqe(Rng(1009).uniform_tensor({384, 384}), model);
  bool ok = true;
  double worst_natural = 0.0;
  for (const char* n : {"natural_astronaut.png", "natural_coffee.png", "natural_chelsea.png", "natural_rocket.png",
                        "natural_brick.png", "natural_camera.png", "natural_grass.png"}) {
    const double s = niqe(test::load_gray(n), model);
    worst_natural = std::max(worst_natural, s);
    ok = ok && noise > s;
  }
  const double at_mu = niqe_distance(model.mu, model.sigma, model);
  ok = ok && std::abs(at_mu) < 1e-9;
  return {ok, fmt("noise %.2f > worst natural %.2f over 7 fixtures; distance at mu %.3g", noise, worst_natural, at_mu)};
}

Outcome loss_schedule() {
  LossWeights warm;
  warm.warmup = true;
  Rng rng(1010);
  bool exact = true;
  for (int i = 0; i < 1000; ++i) {
    const double rec = rng.uniform(0, 2);
    exact = exact && total_loss(rec, rng.uniform(0, 9), rng.uniform(0, 9), warm) == rec;
  }
  const LossWeights d;
  const bool defaults = d.lambda_hvi == 1.0 && d.lambda_vcf == 0.5 && d.lambda_cda == 0.5;
  return {exact && defaults, std::string("warmup total == rec: ") + (exact ? "yes" : "no") +
                                 ", defaults 1/0.5/0.5: " + (defaults ? "yes" : "no")};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  const auto dir = test::scratch_dir("acceptance_determinism");
  const std::string img = test::fixture("coffee_rgb_96.png").string();
  for (const char* sub : {"a", "b"}) {
    const std::string out = (dir / sub).string();
    const char* argv[] = {"vcr", "caa-demo", img.c_str(), "--out-dir", out.c_str(), "--seed", "42"};
    std::ostringstream o, e;
    if (cli::run(7, argv, o, e) != 0) return {false, "caa-demo failed: " + e.str()};
  }
  std::size_t files = 0;
  bool same = true;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    ++files;
    same = same && slurp(entry.path()) == slurp(dir / "b" / entry.path().filename());
  }
  fs::remove_all(dir);
  return {same && files >= 4, std::to_string(files) + " output files compared byte for byte"};
}

Outcome oracle_equivalence() {
  Rng rng(1012);
  double conv = 0.0, moment = 0.0;
  std::size_t perm_mismatch = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const std::size_t k = 1 + 2 * (i % 3);
    const Tensor x = rng.normal_tensor({1 + i % 3, 3 + i % 5, 3 + i % 4});
    const Tensor kern = rng.normal_tensor({1 + i % 2, 1 + i % 3, k, k});
    conv = std::max(conv, test::max_abs(conv2d(x, kern), test::naive_conv2d(x, kern)));

    const Tensor f = rng.normal_tensor({1 + i % 4, 2 + i % 3, 1 + i % 6});
    moment = std::max(moment, test::max_abs(second_moment(f), test::naive_second_moment(f)));

    const Tensor t = rng.normal_tensor({2 + i % 2, 3, 1 + i % 4, 2});
    std::vector<std::size_t> axes{0, 1, 2, 3};
    for (std::size_t s = 0; s < i % 24; ++s) std::next_permutation(axes.begin(), axes.end());
    if (!(permute(t, axes) == test::naive_permute(t, axes))) ++perm_mismatch;
  }
  const bool ok = conv <= 1e-12 && moment <= 1e-12 && perm_mismatch == 0;
  return {ok, fmt("100 instances each: conv2d %.3g, second_moment %.3g, permute mismatches %.0f", conv, moment,
                  static_cast<double>(perm_mismatch))};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"HVI round trip", hvi_round_trip},
      {"variance-map identity", variance_identity},
      {"mask contract", mask_contract},
      {"gradient checks", gradient_checks},
      {"CDA properties", cda_properties},
      {"TCE closed form", tce_closed_form},
      {"metric sanity", metric_sanity},
      {"AGGD recovery", aggd_recovery},
      {"NIQE ordering", niqe_ordering},
      {"loss schedule", loss_schedule},
      {"determinism", determinism},
      {"oracle equivalence", oracle_equivalence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s  %2zu  %-22s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    failed += !o.pass;
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
