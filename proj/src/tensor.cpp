#include "vcr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace vcr {

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > kMaxRank) {
    throw ShapeError("tensor rank must be in [1, 4], got " + std::to_string(shape.size()));
  }
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

double pairwise_sum_impl(const double* p, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(p, half) + pairwise_sum_impl(p + half, n - half);
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("payload of " + std::to_string(data_.size()) +
                     " values does not match shape " + shape_string(shape_));
  }
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  return offset(std::span<const std::size_t>(idx.begin(), idx.size()));
}

std::size_t Tensor::offset(std::span<const std::size_t> idx) const {
  if (idx.size() != shape_.size()) {
    throw ShapeError("index of rank " + std::to_string(idx.size()) + " into tensor " +
                     shape_string(shape_));
  }
  std::size_t off = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) off = off * shape_[i] + idx[i];
  return off;
}

std::vector<std::size_t> Tensor::strides() const {
  std::vector<std::size_t> s(shape_.size(), 1);
  for (std::size_t i = shape_.size(); i-- > 1;) s[i - 1] = s[i] * shape_[i];
  return s;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_product(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor scale(const Tensor& t, double factor) {
  Tensor out = t;
  for (double& v : out.values()) v *= factor;
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return axpby(1.0, a, 1.0, b); }

Tensor axpby(double a, const Tensor& x, double b, const Tensor& y) {
  require_same_shape(x, y, "axpby");
  Tensor out(x.shape());
  auto xs = x.values();
  auto ys = y.values();
  auto os = out.values();
  for (std::size_t i = 0; i < os.size(); ++i) os[i] = a * xs[i] + b * ys[i];
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  }
  return m;
}

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> axes) {
  std::vector<std::size_t> inv(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] >= axes.size()) throw ShapeError("permutation axis out of range");
    inv[axes[i]] = i;
  }
  return inv;
}

Tensor permute(const Tensor& t, std::initializer_list<std::size_t> axes) {
  return permute(t, std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor permute(const Tensor& t, std::span<const std::size_t> axes) {
  const std::size_t rank = t.rank();
  if (axes.size() != rank) {
    throw ShapeError("permutation of length " + std::to_string(axes.size()) +
                     " for tensor of rank " + std::to_string(rank));
  }
  std::array<bool, kMaxRank> seen{};
  for (std::size_t a : axes) {
    if (a >= rank || seen[a]) throw ShapeError("axes are not a permutation of the tensor rank");
    seen[a] = true;
  }

  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = t.extent(axes[i]);
  Tensor out(out_shape);

  // Walk the output in row-major order; src_stride[i] is the input stride
  // of the axis that lands at output position i.
  const auto in_strides = t.strides();
  std::array<std::size_t, kMaxRank> src_stride{};
  for (std::size_t i = 0; i < rank; ++i) src_stride[i] = in_strides[axes[i]];

  std::array<std::size_t, kMaxRank> idx{};
  auto src = t.values();
  auto dst = out.values();
  std::size_t src_off = 0;
  for (std::size_t n = 0; n < dst.size(); ++n) {
    dst[n] = src[src_off];
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      src_off += src_stride[d];
      if (idx[d] < out_shape[d]) break;
      src_off -= src_stride[d] * out_shape[d];
      idx[d] = 0;
    }
  }
  return out;
}

Tensor gb_pool(const Tensor& t) {
  if (t.rank() != 3) throw ShapeError("gb_pool expects a rank-3 tensor, got " + shape_string(t.shape()));
  const std::size_t n = t.extent(0);
  const std::size_t plane = t.extent(1) * t.extent(2);
  Tensor out({2, t.extent(1), t.extent(2)});
  auto src = t.values();
  auto dst = out.values();
  std::vector<double> column(n);
  for (std::size_t p = 0; p < plane; ++p) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      column[c] = src[c * plane + p];
      mx = std::max(mx, column[c]);
    }
    dst[p] = mx;
    dst[plane + p] = pairwise_sum(column) / static_cast<double>(n);
  }
  return out;
}

Tensor conv2d(const Tensor& t, const Tensor& kernel) {
  if (t.rank() != 3) throw ShapeError("conv2d input must be (Cin,H,W), got " + shape_string(t.shape()));
  if (kernel.rank() != 4) {
    throw ShapeError("conv2d kernel must be (Cout,Cin,k,k), got " + shape_string(kernel.shape()));
  }
  const std::size_t cin = t.extent(0), h = t.extent(1), w = t.extent(2);
  const std::size_t cout = kernel.extent(0), k = kernel.extent(2);
  if (kernel.extent(1) != cin) {
    throw ShapeError("conv2d kernel " + shape_string(kernel.shape()) + " does not match input " +
                     shape_string(t.shape()));
  }
  if (kernel.extent(3) != k) throw ConfigError("conv2d kernel must be square");
  if (k % 2 == 0) throw ConfigError("conv2d kernel size must be odd, got " + std::to_string(k));

  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto hh = static_cast<std::ptrdiff_t>(h), ww = static_cast<std::ptrdiff_t>(w);
  Tensor out({cout, h, w});
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double kv = kernel(o, c, ky, kx);
          if (kv == 0.0) continue;
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - r;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - r;
          const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
          const std::ptrdiff_t y1 = std::min(hh, hh - dy);
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min(ww, ww - dx);
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            for (std::ptrdiff_t x = x0; x < x1; ++x) {
              out(o, y, x) += kv * t(c, y + dy, x + dx);
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor instance_norm(const Tensor& t, double eps) {
  if (t.rank() != 3) throw ShapeError("instance_norm expects (C,H,W), got " + shape_string(t.shape()));
  if (!(eps > 0.0)) throw ConfigError("instance_norm eps must be positive");
  const std::size_t plane = t.extent(1) * t.extent(2);
  Tensor out(t.shape());
  for (std::size_t c = 0; c < t.extent(0); ++c) {
    auto src = t.values().subspan(c * plane, plane);
    auto dst = out.values().subspan(c * plane, plane);
    const bool constant =
        std::all_of(src.begin(), src.end(), [&](double v) { return v == src[0]; });
    if (constant) continue;  // stays zero
    const double mean = pairwise_sum(src) / static_cast<double>(plane);
    std::vector<double> sq(plane);
    for (std::size_t i = 0; i < plane; ++i) sq[i] = (src[i] - mean) * (src[i] - mean);
    const double var = pairwise_sum(sq) / static_cast<double>(plane);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - mean) * inv;
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

std::vector<double> softmax_temp(std::span<const double> v, double tau) {
  if (!(tau > 0.0)) throw ConfigError("softmax temperature must be positive");
  if (v.empty()) throw ShapeError("softmax of an empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp((v[i] - mx) / tau);
  const double z = pairwise_sum(out);
  for (double& p : out) p /= z;
  return out;
}

}  // namespace vcr
