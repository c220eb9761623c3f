#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "vcr/binary.hpp"
#include "vcr/iqa.hpp"

namespace vcr {

namespace {

constexpr char kMagic[4] = {'V', 'C', 'R', 'Q'};

Tensor crop(const Tensor& img, std::size_t y0, std::size_t x0, std::size_t size) {
  Tensor out({size, size});
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) out(y, x) = img(y0 + y, x0 + x);
  }
  return out;
}

double mean_of(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t size) {
  double s = 0.0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) s += t(y0 + y, x0 + x);
  }
  return s / static_cast<double>(size * size);
}

Eigen::MatrixXd to_eigen(const Tensor& m) {
  Eigen::MatrixXd e(m.extent(0), m.extent(1));
  for (std::size_t i = 0; i < m.extent(0); ++i) {
    for (std::size_t j = 0; j < m.extent(1); ++j) e(i, j) = m(i, j);
  }
  return e;
}

Tensor from_eigen(const Eigen::MatrixXd& e) {
  Tensor m({static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols())});
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  }
  return m;
}

// Sample mean and covariance (n - 1 denominator; zero for a single row).
void gaussian_stats(const std::vector<std::vector<double>>& rows, std::vector<double>& mean, Tensor& cov) {
  const std::size_t n = rows.size(), d = rows.front().size();
  mean.assign(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += r[i];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  cov = Tensor({d, d});
  if (n < 2) return;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov(i, j) += (r[i] - mean[i]) * (r[j] - mean[j]);
    }
  }
  for (double& v : cov.values()) v /= static_cast<double>(n - 1);
}

}  // namespace

std::vector<std::vector<double>> niqe_patch_features(const Tensor& gray, std::size_t patch_size,
                                                     bool select_sharp, double threshold) {
  if (gray.rank() != 2) throw ShapeError("niqe expects a grayscale (H,W) image, got " + shape_string(gray.shape()));
  if (patch_size < 16 || patch_size % 2 != 0) {
    throw ConfigError("NIQE patch size must be even and at least 16, got " + std::to_string(patch_size));
  }
  const std::size_t rows = gray.extent(0) / patch_size;
  const std::size_t cols = gray.extent(1) / patch_size;
  if (rows * cols < 4) {
    throw ShapeError("niqe: image " + shape_string(gray.shape()) + " holds fewer than 4 patches of " +
                     std::to_string(patch_size) + " pixels");
  }

  const MscnMaps full = mscn_maps(gray);
  const Tensor half = mscn(downsample2(gray));
  const std::size_t half_patch = patch_size / 2;

  std::vector<double> sharpness;
  std::vector<std::vector<double>> feats;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t y = r * patch_size, x = c * patch_size;
      std::vector<double> f;
      f.reserve(2 * kNssFeaturesPerScale);
      const auto s1 = nss_scale_features(crop(full.coeffs, y, x, patch_size));
      const auto s2 = nss_scale_features(crop(half, y / 2, x / 2, half_patch));
      f.insert(f.end(), s1.begin(), s1.end());
      f.insert(f.end(), s2.begin(), s2.end());
      feats.push_back(std::move(f));
      sharpness.push_back(mean_of(full.sigma, y, x, patch_size));
    }
  }
  if (!select_sharp) return feats;

  const double peak = *std::max_element(sharpness.begin(), sharpness.end());
  std::vector<std::vector<double>> kept;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (sharpness[i] > threshold * peak || sharpness[i] == peak) kept.push_back(std::move(feats[i]));
  }
  return kept;
}

NiqeModel fit_niqe_model(std::span<const Tensor> images, std::size_t patch_size) {
  if (images.empty()) throw ConfigError("fit_niqe_model needs at least one image");
  std::vector<std::vector<double>> all;
  for (const Tensor& img : images) {
    auto f = niqe_patch_features(img, patch_size, true);
    all.insert(all.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
  }
  if (all.size() < 2) throw ValidationError("fit_niqe_model: fewer than 2 sharp patches");
  NiqeModel m;
  m.patch_size = patch_size;
  gaussian_stats(all, m.mu, m.sigma);
  return m;
}

Tensor symmetric_pinv(const Tensor& m) {
  if (m.rank() != 2 || m.extent(0) != m.extent(1)) throw ShapeError("pinv expects a square matrix");
  const Eigen::MatrixXd e = to_eigen(m);
  const Eigen::MatrixXd sym = 0.5 * (e + e.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  const Eigen::VectorXd& vals = solver.eigenvalues();
  const double tol = std::max(1e-300, vals.cwiseAbs().maxCoeff() * 1e-12 * static_cast<double>(vals.size()));
  Eigen::VectorXd inv(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i) inv(i) = std::abs(vals(i)) > tol ? 1.0 / vals(i) : 0.0;
  const Eigen::MatrixXd& v = solver.eigenvectors();
  return from_eigen(v * inv.asDiagonal() * v.transpose());
}

double niqe_distance(std::span<const double> f, const Tensor& sigma_img, const NiqeModel& model) {
  const std::size_t d = model.dim();
  if (d == 0) throw ConfigError("NIQE model is empty");
  if (f.size() != d || sigma_img.shape() != Shape{d, d} || model.sigma.shape() != Shape{d, d}) {
    throw ShapeError("NIQE feature dimension does not match the model (" + std::to_string(d) + ")");
  }
  Tensor pooled({d, d});
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    pooled.values()[k] = 0.5 * (model.sigma.values()[k] + sigma_img.values()[k]);
  }
  const Tensor pinv = symmetric_pinv(pooled);
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = f[i] - model.mu[i];
  double q = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) q += diff[i] * pinv(i, j) * diff[j];
  }
  return std::sqrt(std::max(0.0, q));
}

double niqe(const Tensor& gray, const NiqeModel& model) {
  const auto feats = niqe_patch_features(gray, model.patch_size, true);
  std::vector<double> mean;
  Tensor cov;
  gaussian_stats(feats, mean, cov);
  return niqe_distance(mean, cov, model);
}

void save_niqe_model(const std::filesystem::path& path, const NiqeModel& model) {
  const std::size_t d = model.dim();
  if (model.sigma.shape() != Shape{d, d}) throw ShapeError("NIQE model covariance shape mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  binary::put_u32(os, static_cast<std::uint32_t>(d));
  for (double v : model.mu) binary::put_f64(os, v);
  for (double v : model.sigma.values()) binary::put_f64(os, v);
  if (!os) throw IoError("failed writing " + path.string());
}

NiqeModel load_niqe_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open NIQE model " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(path.string() + " is not a NIQE model file (bad magic)");
  }
  try {
    const std::uint32_t d = binary::get_u32(is);
    if (d == 0 || d > 4096) throw IoError("invalid feature dimension " + std::to_string(d));
    NiqeModel m;
    m.mu.resize(d);
    for (double& v : m.mu) v = binary::get_f64(is);
    m.sigma = Tensor({d, d});
    for (double& v : m.sigma.values()) v = binary::get_f64(is);
    return m;
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace vcr
