#include "fastgan/training/losses.hpp"

#include "fastgan/ops.hpp"

namespace fastgan::train {

Tensor hinge_real(const Tensor& real_logits) {
  return ops::mean(ops::relu(ops::add_scalar(ops::scale(real_logits, Real(-1)), Real(1))));
}

Tensor hinge_fake(const Tensor& fake_logits) {
  return ops::mean(ops::relu(ops::add_scalar(fake_logits, Real(1))));
}

Tensor hinge_d_loss(const Tensor& real_logits, const Tensor& fake_logits) {
  return ops::add(hinge_real(real_logits), hinge_fake(fake_logits));
}

Tensor g_loss(const Tensor& fake_logits) { return ops::scale(ops::mean(fake_logits), Real(-1)); }

ReconNorm parse_recon_norm(const std::string& s) {
  if (s == "l1" || s == "L1") return ReconNorm::l1;
  if (s == "l2" || s == "L2") return ReconNorm::l2;
  throw ConfigError("unknown reconstruction norm '" + s + "' (expected l1 or l2)");
}

std::string to_string(ReconNorm n) { return n == ReconNorm::l1 ? "l1" : "l2"; }

Tensor image_distance(const Tensor& pred, const Tensor& target, ReconNorm norm) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("reconstruction shapes differ: " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  }
  Tensor diff = ops::sub(pred, target);
  return ops::mean(norm == ReconNorm::l1 ? ops::abs(diff) : ops::square(diff));
}

Tensor recon_loss(const Tensor& part_pred, const Tensor& part_target, const Tensor& full_pred,
                  const Tensor& full_target, ReconNorm norm) {
  return ops::add(image_distance(part_pred, part_target, norm),
                  image_distance(full_pred, full_target, norm));
}

}  // namespace fastgan::train
