#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "vcr/colorspace.hpp"
#include "vcr/tensor.hpp"

namespace vcr {

// Per-pixel affine lift of the HVI planes into C-channel feature maps:
// intensity channel c = wi[c] * Imax + bi[c], chroma channel
// c = wh[c] * Hhat + wv[c] * Vhat + bhv[c].
struct FeatureStem {
  std::vector<double> wi, bi;
  std::vector<double> wh, wv, bhv;

  std::size_t channels() const { return wi.size(); }

  static FeatureStem random(std::size_t channels, std::uint64_t seed);
};

// Returns (F_I, F_hv), each (H,W,C).
std::pair<Tensor, Tensor> lift_features(const HviImage& hvi, const FeatureStem& stem);

// (Hhat, Vhat) planes as a (2,H,W) tensor.
Tensor chroma_planes(const HviImage& hvi);

// Stage between the channel adjustment and the distribution alignment.
class Enhancer {
 public:
  virtual ~Enhancer() = default;
  virtual std::pair<Tensor, Tensor> enhance(const Tensor& f_i, const Tensor& f_hv) const = 0;
};

class IdentityEnhancer final : public Enhancer {
 public:
  std::pair<Tensor, Tensor> enhance(const Tensor& f_i, const Tensor& f_hv) const override {
    return {f_i, f_hv};
  }
};

}  // namespace vcr
