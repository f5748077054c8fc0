#pragma once

#include "robotseg/tensor.hpp"

namespace robotseg {

// Mean focal loss over probabilities in [0,1] against a {0,1} target of the
// same shape. Probabilities are clamped to [1e-6, 1-1e-6] before the logs.
Tensor focal_loss(const Tensor& probs, const Tensor& target, double alpha = 0.25,
                  double gamma = 2.0);

// Soft dice loss 1 - (2*sum(p*g)+eps) / (sum(p)+sum(g)+eps).
Tensor dice_loss(const Tensor& probs, const Tensor& target, double eps = 1.0);

// The mask distance D used by the cycle loss: 20*focal + 1*dice.
Tensor mask_loss(const Tensor& probs, const Tensor& target, double focal_w = 20.0,
                 double dice_w = 1.0);

// Soft IoU loss 1 - sum(v*p*q) / sum(v*(p+q-p*q)) over patches where the
// validity grid v is 1. A frame with no valid patches contributes exactly 0.
Tensor soft_iou_loss(const Tensor& p, const Tensor& q, const Tensor& valid);

// Binary cross-entropy of a single logit against a hard {0,1} target.
Tensor bce_with_logit(const Tensor& logit, double target);

}  // namespace robotseg
