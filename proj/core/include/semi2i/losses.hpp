#pragma once

// Generator / discriminator objectives:
//   L_G = l1 * L_cross + l2 * L_self + l3 * L_grad + l4 * L_adv_G
//   L_D = l4 * L_adv_D
// L1 terms are per-element means; adversarial terms use least squares with
// real label 1 and fake label 0.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "semi2i/core_math.hpp"

namespace semi2i {

struct LossWeights {
  double lambda1 = 10.0;  // cross reconstruction
  double lambda2 = 10.0;  // self reconstruction
  double lambda3 = 10.0;  // Sobel gradient consistency
  double lambda4 = 1.0;   // adversarial
  void validate() const;
};

struct LossReport {
  double cross = 0.0;
  double self_ = 0.0;
  double grad = 0.0;
  double adv_g = 0.0;
  double adv_d = 0.0;
  double total_g = 0.0;
  double total_d = 0.0;
};

/// mean|A - A''| + mean|B - B''|
Tensor cross_reconstruction_loss(const ImageTensor& a, const ImageTensor& a_cross,
                                 const ImageTensor& b, const ImageTensor& b_cross);

/// mean|A - A'| + mean|B - B'|
Tensor self_reconstruction_loss(const ImageTensor& a, const ImageTensor& a_self,
                                const ImageTensor& b, const ImageTensor& b_self);

/// For each pair: mean|Sx(real) - Sx(fake)| + mean|Sy(real) - Sy(fake)|,
/// summed over the (A, fake A) and (B, fake B) pairs.
Tensor gradient_loss(const ImageTensor& a, const ImageTensor& fake_a, const ImageTensor& b,
                     const ImageTensor& fake_b);

/// Least-squares generator loss on the scores a discriminator gave a fake.
Tensor lsgan_generator_loss(const Tensor& fake_scores);
/// 0.5 * (mean((real - 1)^2) + mean(fake^2)).
Tensor lsgan_discriminator_loss(const Tensor& real_scores, const Tensor& fake_scores);

struct AdversarialLosses {
  Tensor adv_g;
  Tensor adv_d;
};

/// Realness maps grouped per discriminator: `real_a` and `fake_a` are what
/// the domain-A discriminator returned for real A and for the A-styled fake
/// (fake B); likewise for B. Pure formula; callers detach generator outputs
/// before scoring them for adv_d.
AdversarialLosses adversarial_losses(const Tensor& real_a, const Tensor& fake_a,
                                     const Tensor& real_b, const Tensor& fake_b);

struct LossComponents {
  double cross = 0.0;
  double self_ = 0.0;
  double grad = 0.0;
  double adv_g = 0.0;
  double adv_d = 0.0;
};

LossReport total_losses(const LossComponents& c, const LossWeights& w);

/// Tab-separated training log: one header line then one line per iteration.
/// Field order: iteration epoch lr cross self grad adv_g adv_d total_g total_d
void write_loss_log_header(std::ostream& os);
void write_loss_log_line(std::ostream& os, std::int64_t iteration, int epoch, double lr,
                         const LossReport& r);

}  // namespace semi2i
