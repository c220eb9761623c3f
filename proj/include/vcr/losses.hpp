#pragma once

#include <map>
#include <string>

#include "vcr/colorspace.hpp"
#include "vcr/tensor.hpp"

namespace vcr {

struct LossWeights {
  double lambda_hvi = 1.0;
  double lambda_vcf = 0.5;
  double lambda_cda = 0.5;
  bool warmup = false;  // reconstruction only: lambda_vcf and lambda_cda act as 0

  double effective_vcf() const { return warmup ? 0.0 : lambda_vcf; }
  double effective_cda() const { return warmup ? 0.0 : lambda_cda; }
  void validate() const;
};

struct LossBundle {
  double l_rec = 0.0;
  double l_vcf = 0.0;
  double l_cda = 0.0;
  double l_total = 0.0;
  std::map<std::string, Tensor> grads;
};

// Row c of the result is the temperature softmax of channel c over all
// H*W positions. f is (2C,H,W); the result is (2C, H*W).
Tensor channel_softmax(const Tensor& f, double tau);

struct ScalarWithGrad {
  double value = 0.0;
  Tensor grad;
};

// Sum over channels of KL(p_c || q_c), p from f_pred and q from f_gt, with
// the gradient taken w.r.t. f_pred.
ScalarWithGrad cda_loss(const Tensor& f_pred, const Tensor& f_gt, double tau);

struct RecLoss {
  double value = 0.0;
  double rgb_term = 0.0;
  double hvi_term = 0.0;  // before lambda_hvi
  Tensor grad_rgb;        // (3,H,W), w.r.t. out_rgb planes
  Tensor grad_hvi;        // (3,H,W), w.r.t. out_hvi planes
};

// mean|out_rgb - gt_rgb| + lambda_hvi * mean|out_hvi - gt_hvi|.
RecLoss rec_loss(const RgbImage& out_rgb, const RgbImage& gt_rgb, const HviImage& out_hvi,
                 const HviImage& gt_hvi, double lambda_hvi);

double total_loss(double rec, double vcf, double cda, const LossWeights& w);

// Assembles the bundle (l_total via total_loss).
LossBundle make_loss_bundle(double rec, double vcf, double cda, const LossWeights& w);

// Line-oriented "key=value" record with l_rec, l_vcf, l_cda, l_total, tau and
// the lambda values.
std::string format_loss_record(const LossBundle& b, const LossWeights& w, double tau);

}  // namespace vcr
