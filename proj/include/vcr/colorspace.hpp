#pragma once

#include <cstddef>

#include "vcr/tensor.hpp"

namespace vcr {

// Three planes of a (3,H,W) tensor. The wrapper types below only differ in
// which planes they carry and which ranges they promise.
class PlaneImage {
 public:
  PlaneImage() = default;
  PlaneImage(std::size_t width, std::size_t height) : planes_({3, height, width}) {}
  explicit PlaneImage(Tensor planes);

  std::size_t width() const { return planes_.extent(2); }
  std::size_t height() const { return planes_.extent(1); }
  std::size_t pixel_count() const { return width() * height(); }

  const Tensor& planes() const noexcept { return planes_; }
  Tensor& planes() noexcept { return planes_; }

  std::span<const double> plane(std::size_t c) const {
    return planes_.values().subspan(c * pixel_count(), pixel_count());
  }
  std::span<double> plane(std::size_t c) {
    return planes_.values().subspan(c * pixel_count(), pixel_count());
  }

 private:
  Tensor planes_;
};

// Planes R, G, B, each in [0, 1].
class RgbImage : public PlaneImage {
 public:
  using PlaneImage::PlaneImage;
  std::span<const double> r() const { return plane(0); }
  std::span<const double> g() const { return plane(1); }
  std::span<const double> b() const { return plane(2); }

  // Throws ValidationError when a sample is outside [0, 1] or not finite.
  void validate() const;
};

// Planes H, S, V. Hue is stored normalized to [0, 1), i.e. the sector hue
// h in [0, 6) divided by 6.
class HsvImage : public PlaneImage {
 public:
  using PlaneImage::PlaneImage;
  std::span<const double> h() const { return plane(0); }
  std::span<const double> s() const { return plane(1); }
  std::span<const double> v() const { return plane(2); }
};

struct HviParams {
  double k = 1.0;
  double eps = 1e-8;
  double alpha_s = 1.0;
  double alpha_i = 1.0;

  // Throws ConfigError unless every field is strictly positive and finite.
  void validate() const;
};

// Planes (Hhat, Vhat, Imax) plus the collapse parameters they were built
// with. Hhat^2 + Vhat^2 == (C_k * S)^2.
class HviImage : public PlaneImage {
 public:
  HviImage() = default;
  HviImage(Tensor planes, double k, double eps) : PlaneImage(std::move(planes)), k_(k), eps_(eps) {}

  std::span<const double> hhat() const { return plane(0); }
  std::span<const double> vhat() const { return plane(1); }
  std::span<const double> imax() const { return plane(2); }

  double k() const noexcept { return k_; }
  double eps() const noexcept { return eps_; }

 private:
  double k_ = 1.0;
  double eps_ = 1e-8;
};

struct Rgb {
  double r, g, b;
};
struct Hsv {
  double h, s, v;  // h in [0, 1)
};
struct Hvi {
  double hhat, vhat, imax;
};

// Intensity collapse C_k = k * sqrt(sin(pi * imax / 2) + eps).
double intensity_collapse(double imax, double k, double eps);

Hsv rgb_to_hsv(const Rgb& px);
Rgb hsv_to_rgb(const Hsv& px);
Hvi hvt(const Hsv& px, const HviParams& p);
Hsv phvit(const Hvi& px, const HviParams& p);

HsvImage rgb_to_hsv(const RgbImage& img);
RgbImage hsv_to_rgb(const HsvImage& img);
HviImage hvt(const HsvImage& hsv, const HviParams& p);
HsvImage phvit(const HviImage& hvi, const HviParams& p);

HviImage rgb_to_hvi(const RgbImage& img, const HviParams& p);
RgbImage hvi_to_rgb(const HviImage& hvi, const HviParams& p);

}  // namespace vcr
