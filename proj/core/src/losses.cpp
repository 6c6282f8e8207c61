#include "semi2i/losses.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "semi2i/errors.hpp"
#include "semi2i/ops.hpp"

namespace semi2i {

void LossWeights::validate() const {
  for (double l : {lambda1, lambda2, lambda3, lambda4}) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidConfig("loss weights must be finite and non-negative");
  }
}

Tensor cross_reconstruction_loss(const ImageTensor& a, const ImageTensor& a_cross,
                                 const ImageTensor& b, const ImageTensor& b_cross) {
  return ops::add(ops::l1_mean(a, a_cross), ops::l1_mean(b, b_cross));
}

Tensor self_reconstruction_loss(const ImageTensor& a, const ImageTensor& a_self,
                                const ImageTensor& b, const ImageTensor& b_self) {
  return ops::add(ops::l1_mean(a, a_self), ops::l1_mean(b, b_self));
}

namespace {

Tensor pair_gradient_term(const ImageTensor& real, const ImageTensor& fake) {
  if (real.shape() != fake.shape()) {
    throw InvalidInput("gradient_loss: shape mismatch " + to_string(real.shape()) + " vs " +
                       to_string(fake.shape()));
  }
  const SobelGradients r = sobel_gradients(real);
  const SobelGradients f = sobel_gradients(fake);
  return ops::add(ops::l1_mean(r.gx, f.gx), ops::l1_mean(r.gy, f.gy));
}

}  // namespace

Tensor gradient_loss(const ImageTensor& a, const ImageTensor& fake_a, const ImageTensor& b,
                     const ImageTensor& fake_b) {
  return ops::add(pair_gradient_term(a, fake_a), pair_gradient_term(b, fake_b));
}

Tensor lsgan_generator_loss(const Tensor& fake_scores) { return ops::mse_to_constant(fake_scores, 1.0); }

Tensor lsgan_discriminator_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  return ops::scale(ops::add(ops::mse_to_constant(real_scores, 1.0), ops::mse_to_constant(fake_scores, 0.0)),
                    0.5);
}

AdversarialLosses adversarial_losses(const Tensor& real_a, const Tensor& fake_a, const Tensor& real_b,
                                     const Tensor& fake_b) {
  for (const Tensor* t : {&real_a, &fake_a, &real_b, &fake_b}) {
    for (double v : t->values()) {
      if (!std::isfinite(v)) throw InvalidInput("adversarial_losses: non-finite score");
    }
  }
  return {ops::add(lsgan_generator_loss(fake_a), lsgan_generator_loss(fake_b)),
          ops::add(lsgan_discriminator_loss(real_a, fake_a), lsgan_discriminator_loss(real_b, fake_b))};
}

LossReport total_losses(const LossComponents& c, const LossWeights& w) {
  LossReport r;
  r.cross = c.cross;
  r.self_ = c.self_;
  r.grad = c.grad;
  r.adv_g = c.adv_g;
  r.adv_d = c.adv_d;
  r.total_g = w.lambda1 * c.cross + w.lambda2 * c.self_ + w.lambda3 * c.grad + w.lambda4 * c.adv_g;
  r.total_d = w.lambda4 * c.adv_d;
  return r;
}

void write_loss_log_header(std::ostream& os) {
  os << "iteration\tepoch\tlr\tcross\tself\tgrad\tadv_g\tadv_d\ttotal_g\ttotal_d\n";
}

void write_loss_log_line(std::ostream& os, std::int64_t iteration, int epoch, double lr,
                         const LossReport& r) {
  const auto old_flags = os.flags();
  const auto old_precision = os.precision();
  os << std::setprecision(9) << iteration << '\t' << epoch << '\t' << lr << '\t' << r.cross << '\t'
     << r.self_ << '\t' << r.grad << '\t' << r.adv_g << '\t' << r.adv_d << '\t' << r.total_g << '\t'
     << r.total_d << '\n';
  os.flags(old_flags);
  os.precision(old_precision);
}

}  // namespace semi2i
