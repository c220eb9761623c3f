#include "vcr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "vcr/keyvalue.hpp"

namespace vcr {

namespace {

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
}

// log-softmax of one row with max subtraction.
void log_softmax_row(std::span<const double> z, double tau, std::span<double> out) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> e(z.size());
  for (std::size_t a = 0; a < z.size(); ++a) e[a] = std::exp((z[a] - mx) / tau);
  const double lse = std::log(pairwise_sum(e));
  for (std::size_t a = 0; a < z.size(); ++a) out[a] = (z[a] - mx) / tau - lse;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// mean |a - b| over all samples, and its gradient w.r.t. a.
double mean_l1(const Tensor& a, const Tensor& b, Tensor& grad) {
  const double inv_n = 1.0 / static_cast<double>(a.size());
  std::vector<double> absd(a.size());
  grad = Tensor(a.shape());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.values()[k] - b.values()[k];
    absd[k] = std::abs(d);
    grad.values()[k] = sign(d) * inv_n;
  }
  return pairwise_sum(absd) * inv_n;
}

}  // namespace

void LossWeights::validate() const {
  for (double l : {lambda_hvi, lambda_vcf, lambda_cda}) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("loss weights must be non-negative");
  }
}

Tensor channel_softmax(const Tensor& f, double tau) {
  require_tau(tau);
  if (f.rank() != 3) throw ShapeError("channel_softmax expects (2C,H,W), got " + shape_string(f.shape()));
  const std::size_t channels = f.extent(0);
  const std::size_t n = f.extent(1) * f.extent(2);
  Tensor out({channels, n});
  for (std::size_t c = 0; c < channels; ++c) {
    const auto row = softmax_temp(f.values().subspan(c * n, n), tau);
    std::copy(row.begin(), row.end(), out.values().begin() + static_cast<std::ptrdiff_t>(c * n));
  }
  return out;
}

ScalarWithGrad cda_loss(const Tensor& f_pred, const Tensor& f_gt, double tau) {
  require_tau(tau);
  if (f_pred.shape() != f_gt.shape()) {
    throw ShapeError("cda_loss shape mismatch: " + shape_string(f_pred.shape()) + " vs " +
                     shape_string(f_gt.shape()));
  }
  if (f_pred.rank() != 3) throw ShapeError("cda_loss expects (2C,H,W), got " + shape_string(f_pred.shape()));

  const std::size_t channels = f_pred.extent(0);
  const std::size_t n = f_pred.extent(1) * f_pred.extent(2);
  ScalarWithGrad out;
  out.grad = Tensor(f_pred.shape());
  std::vector<double> logp(n), logq(n), terms(n), per_channel(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    log_softmax_row(f_pred.values().subspan(c * n, n), tau, logp);
    log_softmax_row(f_gt.values().subspan(c * n, n), tau, logq);
    for (std::size_t a = 0; a < n; ++a) terms[a] = std::exp(logp[a]) * (logp[a] - logq[a]);
    const double kl = pairwise_sum(terms);
    per_channel[c] = kl;
    // dKL/dz_b = p_b * ((log p_b - log q_b) - KL) / tau
    auto g = out.grad.values().subspan(c * n, n);
    for (std::size_t a = 0; a < n; ++a) {
      g[a] = std::exp(logp[a]) * ((logp[a] - logq[a]) - kl) / tau;
    }
  }
  out.value = pairwise_sum(per_channel);
  return out;
}

RecLoss rec_loss(const RgbImage& out_rgb, const RgbImage& gt_rgb, const HviImage& out_hvi,
                 const HviImage& gt_hvi, double lambda_hvi) {
  if (out_rgb.planes().shape() != gt_rgb.planes().shape() ||
      out_hvi.planes().shape() != gt_hvi.planes().shape() ||
      out_rgb.planes().shape() != out_hvi.planes().shape()) {
    throw ShapeError("rec_loss: image dimensions differ");
  }
  if (!(lambda_hvi >= 0.0)) throw ConfigError("lambda_hvi must be non-negative");
  RecLoss r;
  r.rgb_term = mean_l1(out_rgb.planes(), gt_rgb.planes(), r.grad_rgb);
  r.hvi_term = mean_l1(out_hvi.planes(), gt_hvi.planes(), r.grad_hvi);
  for (double& g : r.grad_hvi.values()) g *= lambda_hvi;
  r.value = r.rgb_term + lambda_hvi * r.hvi_term;
  return r;
}

double total_loss(double rec, double vcf, double cda, const LossWeights& w) {
  w.validate();
  if (w.warmup) return rec;
  return rec + w.lambda_vcf * vcf + w.lambda_cda * cda;
}

LossBundle make_loss_bundle(double rec, double vcf, double cda, const LossWeights& w) {
  LossBundle b;
  b.l_rec = rec;
  b.l_vcf = vcf;
  b.l_cda = cda;
  b.l_total = total_loss(rec, vcf, cda, w);
  return b;
}

std::string format_loss_record(const LossBundle& b, const LossWeights& w, double tau) {
  std::ostringstream os;
  os << "l_rec=" << format_double(b.l_rec) << '\n'
     << "l_vcf=" << format_double(b.l_vcf) << '\n'
     << "l_cda=" << format_double(b.l_cda) << '\n'
     << "l_total=" << format_double(b.l_total) << '\n'
     << "tau=" << format_double(tau) << '\n'
     << "lambda_hvi=" << format_double(w.lambda_hvi) << '\n'
     << "lambda_vcf=" << format_double(w.effective_vcf()) << '\n'
     << "lambda_cda=" << format_double(w.effective_cda()) << '\n'
     << "warmup=" << (w.warmup ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace vcr
