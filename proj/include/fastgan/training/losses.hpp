#pragma once

#include <string>

#include "fastgan/tensor.hpp"

namespace fastgan::train {

// mean(max(0, 1 - real)).
Tensor hinge_real(const Tensor& real_logits);
// mean(max(0, 1 + fake)).
Tensor hinge_fake(const Tensor& fake_logits);
Tensor hinge_d_loss(const Tensor& real_logits, const Tensor& fake_logits);
// -mean(fake).
Tensor g_loss(const Tensor& fake_logits);

enum class ReconNorm { l1, l2 };

ReconNorm parse_recon_norm(const std::string& s);
std::string to_string(ReconNorm n);

// Mean elementwise |a-b| (l1) or (a-b)^2 (l2).
Tensor image_distance(const Tensor& pred, const Tensor& target, ReconNorm norm);

// dist(I'_part, I_part) + dist(I', I).
Tensor recon_loss(const Tensor& part_pred, const Tensor& part_target, const Tensor& full_pred,
                  const Tensor& full_target, ReconNorm norm);

}  // namespace fastgan::train
