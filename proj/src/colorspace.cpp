#include "vcr/colorspace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace vcr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Wraps a value into [0, 1); guards the 1.0 that x + 1 can round to.
double wrap_unit(double x) {
  double w = x - std::floor(x);
  if (w >= 1.0) w = 0.0;
  return w;
}

template <class Out, class In, class Fn>
Out map_pixels(const In& in, Fn&& fn) {
  Tensor planes({3, in.height(), in.width()});
  const std::size_t n = in.pixel_count();
  auto src = in.planes().values();
  auto dst = planes.values();
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, b, c] = fn(src[i], src[n + i], src[2 * n + i]);
    dst[i] = a;
    dst[n + i] = b;
    dst[2 * n + i] = c;
  }
  return Out(std::move(planes));
}

void require_matching_collapse(const HviImage& hvi, const HviParams& p) {
  if (hvi.k() != p.k || hvi.eps() != p.eps) {
    throw ConfigError("HVI image was built with k=" + std::to_string(hvi.k()) +
                      ", eps=" + std::to_string(hvi.eps()) + " but inverted with k=" +
                      std::to_string(p.k) + ", eps=" + std::to_string(p.eps));
  }
}

}  // namespace

PlaneImage::PlaneImage(Tensor planes) : planes_(std::move(planes)) {
  if (planes_.rank() != 3 || planes_.extent(0) != 3) {
    throw ShapeError("image planes must be shaped (3,H,W), got " + shape_string(planes_.shape()));
  }
}

void RgbImage::validate() const {
  const auto v = planes().values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      const std::size_t n = pixel_count();
      throw ValidationError("RGB sample out of [0,1] at channel " + std::to_string(i / n) +
                            ", pixel " + std::to_string(i % n) + ": " + std::to_string(v[i]));
    }
  }
}

void HviParams::validate() const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!positive(k)) throw ConfigError("k must be positive, got " + std::to_string(k));
  if (!positive(eps)) throw ConfigError("eps must be positive, got " + std::to_string(eps));
  if (!positive(alpha_s)) throw ConfigError("alpha_s must be positive, got " + std::to_string(alpha_s));
  if (!positive(alpha_i)) throw ConfigError("alpha_i must be positive, got " + std::to_string(alpha_i));
}

double intensity_collapse(double imax, double k, double eps) {
  return k * std::sqrt(std::sin(std::numbers::pi * imax / 2.0) + eps);
}

Hsv rgb_to_hsv(const Rgb& px) {
  const double imax = std::max({px.r, px.g, px.b});
  const double imin = std::min({px.r, px.g, px.b});
  const double delta = imax - imin;
  const double s = imax == 0.0 ? 0.0 : delta / imax;
  if (s == 0.0) return {0.0, 0.0, imax};

  double h;
  if (imax == px.r) {
    h = std::fmod((px.g - px.b) / delta, 6.0);
    if (h < 0.0) h += 6.0;
  } else if (imax == px.g) {
    h = 2.0 + (px.b - px.r) / delta;
  } else {
    h = 4.0 + (px.r - px.g) / delta;
  }
  return {wrap_unit(h / 6.0), s, imax};
}

Rgb hsv_to_rgb(const Hsv& px) {
  const double v = px.v;
  if (px.s == 0.0) return {v, v, v};
  const double h = wrap_unit(px.h) * 6.0;
  const double sector = std::floor(h);
  const double f = h - sector;
  const double p = v * (1.0 - px.s);
  const double q = v * (1.0 - px.s * f);
  const double t = v * (1.0 - px.s * (1.0 - f));
  switch (static_cast<int>(sector)) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

Hvi hvt(const Hsv& px, const HviParams& p) {
  const double ck = intensity_collapse(px.v, p.k, p.eps);
  const double angle = kTwoPi * px.h;
  return {ck * px.s * std::cos(angle), ck * px.s * std::sin(angle), px.v};
}

Hsv phvit(const Hvi& px, const HviParams& p) {
  const double denom = intensity_collapse(px.imax, p.k, p.eps) + p.eps;
  const double hn = px.hhat / denom;
  const double vn = px.vhat / denom;
  // atan2(+-0, -0) would report a half turn; zero chroma has hue 0.
  const double h = (hn == 0.0 && vn == 0.0) ? 0.0 : wrap_unit(std::atan2(vn, hn) / kTwoPi);
  const double s = clamp01(p.alpha_s * std::hypot(hn, vn));
  const double v = clamp01(p.alpha_i * px.imax);
  return {h, s, v};
}

HsvImage rgb_to_hsv(const RgbImage& img) {
  img.validate();
  return map_pixels<HsvImage>(img, [](double r, double g, double b) {
    const Hsv o = rgb_to_hsv(Rgb{r, g, b});
    return std::array{o.h, o.s, o.v};
  });
}

RgbImage hsv_to_rgb(const HsvImage& img) {
  return map_pixels<RgbImage>(img, [](double h, double s, double v) {
    const Rgb o = hsv_to_rgb(Hsv{h, s, v});
    return std::array{o.r, o.g, o.b};
  });
}

HviImage hvt(const HsvImage& hsv, const HviParams& p) {
  p.validate();
  const auto planes = map_pixels<PlaneImage>(hsv, [&](double h, double s, double v) {
    const Hvi o = hvt(Hsv{h, s, v}, p);
    return std::array{o.hhat, o.vhat, o.imax};
  });
  return HviImage(planes.planes(), p.k, p.eps);
}

HsvImage phvit(const HviImage& hvi, const HviParams& p) {
  p.validate();
  require_matching_collapse(hvi, p);
  return map_pixels<HsvImage>(hvi, [&](double hh, double vv, double im) {
    const Hsv o = phvit(Hvi{hh, vv, im}, p);
    return std::array{o.h, o.s, o.v};
  });
}

HviImage rgb_to_hvi(const RgbImage& img, const HviParams& p) { return hvt(rgb_to_hsv(img), p); }

RgbImage hvi_to_rgb(const HviImage& hvi, const HviParams& p) { return hsv_to_rgb(phvit(hvi, p)); }

}  // namespace vcr
