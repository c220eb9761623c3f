#include "vcr/pipeline.hpp"

#include "vcr/random.hpp"

namespace vcr {

FeatureStem FeatureStem::random(std::size_t channels, std::uint64_t seed) {
  if (channels < 2) throw ConfigError("feature stem needs at least 2 channels");
  Rng rng(seed);
  FeatureStem s;
  for (std::size_t c = 0; c < channels; ++c) {
    s.wi.push_back(rng.normal());
    s.bi.push_back(rng.normal(0.0, 0.1));
    s.wh.push_back(rng.normal());
    s.wv.push_back(rng.normal());
    s.bhv.push_back(rng.normal(0.0, 0.1));
  }
  return s;
}

std::pair<Tensor, Tensor> lift_features(const HviImage& hvi, const FeatureStem& stem) {
  const std::size_t c = stem.channels();
  if (c == 0 || stem.bi.size() != c || stem.wh.size() != c || stem.wv.size() != c ||
      stem.bhv.size() != c) {
    throw ShapeError("feature stem has inconsistent channel counts");
  }
  const std::size_t h = hvi.height(), w = hvi.width(), n = h * w;
  Tensor fi({h, w, c});
  Tensor fhv({h, w, c});
  auto hh = hvi.hhat();
  auto vv = hvi.vhat();
  auto im = hvi.imax();
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < c; ++k) {
      fi.values()[p * c + k] = stem.wi[k] * im[p] + stem.bi[k];
      fhv.values()[p * c + k] = stem.wh[k] * hh[p] + stem.wv[k] * vv[p] + stem.bhv[k];
    }
  }
  return {std::move(fi), std::move(fhv)};
}

Tensor chroma_planes(const HviImage& hvi) {
  const std::size_t n = hvi.pixel_count();
  std::vector<double> data(hvi.planes().values().begin(), hvi.planes().values().begin() + 2 * n);
  return Tensor({2, hvi.height(), hvi.width()}, std::move(data));
}

}  // namespace vcr
