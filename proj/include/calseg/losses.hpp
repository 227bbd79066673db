#pragma once

#include <functional>
#include <string>

#include "calseg/autodiff.hpp"

namespace calseg {

// Binary segmentation convention throughout: channel 0 = foreground,
// channel 1 = background; probs and onehot are [2,H,W] (or [2,N]).

enum class LossKind { CE, DSC, DSCpp, Tversky, FocalTversky, Combo, UnifiedFocal };

struct LossConfig {
    LossKind kind = LossKind::DSC;
    bool plusplus = false;  // per-pixel FP/FN exponent 2 in every TI/DSC term
    double gamma = 1.0;     // DSCpp exponent / Focal Tversky 1/gamma power / UF focal gamma
    double alpha = 0.5;     // Tversky FP weight / Combo mixing weight
    double beta = 0.5;      // Tversky FN weight / Combo mCE weight
    double delta = 0.6;     // Unified Focal class weight
    double lambda = 0.5;    // Unified Focal mixing weight
    double smooth = 1e-6;   // ratio-loss smoothing, numerator and denominator

    // Paper-default hyperparameters for each loss kind.
    static LossConfig defaults(LossKind kind);
};

struct LabelledBatch {
    Tensor probs;   // [2,H,W], rows sum to 1 across channels
    Tensor onehot;  // [2,H,W], values in {0,1}, channels complementary
};

// Validates the [2,...] shapes and that onehot is binary and complementary.
void validate_batch(const Tensor& probs, const Tensor& onehot);

// mask [H,W] in {0,1} -> onehot [2,H,W] (channel 0 = mask, channel 1 = 1-mask)
Tensor onehot_from_mask(const Tensor& mask);

// Cross entropy: -(1/N) sum_i sum_c y_ic log p_ic, N = pixel count.
NodePtr ce_loss(const NodePtr& probs, const Tensor& onehot);

// Dice loss: 1 - (2*sum p0 y0 + eps) / (2*sum p0 y0 + sum p0 y1 + sum p1 y0 + eps).
NodePtr dsc_loss(const NodePtr& probs, const Tensor& onehot, double smooth = 1e-6);

// Calibrated Dice: per-pixel FP/FN products raised to gamma before summation.
NodePtr dscpp_loss(const NodePtr& probs, const Tensor& onehot, double gamma,
                   double smooth = 1e-6);

// (sum p0 y0 + eps) / (sum p0 y0 + w_fp*sum (p0 y1)^e + w_fn*sum (p1 y0)^e + eps)
NodePtr tversky_index(const NodePtr& probs, const Tensor& onehot, double w_fp,
                      double w_fn, double exponent = 1.0, double smooth = 1e-6);

NodePtr tversky_loss(const NodePtr& probs, const Tensor& onehot, const LossConfig& cfg);

// (1 - TI)^(1/gamma), single foreground term.
NodePtr focal_tversky_loss(const NodePtr& probs, const Tensor& onehot, const LossConfig& cfg);

// alpha * L_mCE - (1-alpha) * DSC_score; may be negative.
NodePtr combo_loss(const NodePtr& probs, const Tensor& onehot, const LossConfig& cfg);

// lambda * L_AF + (1-lambda) * L_AFT (symmetric binary form).
NodePtr unified_focal_loss(const NodePtr& probs, const Tensor& onehot, const LossConfig& cfg);

using LossFn = std::function<NodePtr(const NodePtr& probs, const Tensor& onehot)>;

// Closure dispatching on cfg; validates hyperparameters.
LossFn make_loss(const LossConfig& cfg);

LossKind loss_kind_from_name(const std::string& name, bool* plusplus = nullptr);
std::string loss_name(const LossConfig& cfg);

}  // namespace calseg
