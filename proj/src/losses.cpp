#include "robotseg/losses.hpp"

namespace robotseg {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " differ");
}

}  // namespace

Tensor focal_loss(const Tensor& probs, const Tensor& target, double alpha, double gamma) {
    check_same_shape(probs, target, "focal_loss");
    Tensor p = clamp(probs, 1e-6, 1.0 - 1e-6);
    Tensor pos = target * pow_scalar(1.0 - p, gamma) * log(p);
    Tensor neg = (1.0 - target) * pow_scalar(p, gamma) * log(1.0 - p);
    return mean(-alpha * pos - (1.0 - alpha) * neg);
}

Tensor dice_loss(const Tensor& probs, const Tensor& target, double eps) {
    check_same_shape(probs, target, "dice_loss");
    Tensor inter = sum(probs * target);
    return 1.0 - (2.0 * inter + eps) / (sum(probs) + sum(target) + eps);
}

Tensor mask_loss(const Tensor& probs, const Tensor& target, double focal_w, double dice_w) {
    return focal_w * focal_loss(probs, target) + dice_w * dice_loss(probs, target);
}

Tensor soft_iou_loss(const Tensor& p, const Tensor& q, const Tensor& valid) {
    check_same_shape(p, q, "soft_iou_loss");
    check_same_shape(p, valid, "soft_iou_loss");
    Tensor den = sum(valid * (p + q - p * q));
    if (den.item() < 1e-12) return Tensor::scalar(0.0);  // nothing valid to compare
    return 1.0 - sum(valid * p * q) / den;
}

Tensor bce_with_logit(const Tensor& logit, double target) {
    Tensor p = clamp(sigmoid(logit), 1e-6, 1.0 - 1e-6);
    return mean(log(p) * (-target) - log(1.0 - p) * (1.0 - target));
}

}  // namespace robotseg
