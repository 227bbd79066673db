#include "calseg/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace calseg {

LossConfig LossConfig::defaults(LossKind kind) {
    LossConfig cfg;
    cfg.kind = kind;
    switch (kind) {
        case LossKind::CE:
        case LossKind::DSC:
            break;
        case LossKind::DSCpp:
            cfg.gamma = 2.0;
            break;
        case LossKind::Tversky:
            cfg.alpha = 0.3;
            cfg.beta = 0.7;
            break;
        case LossKind::FocalTversky:
            cfg.alpha = 0.3;
            cfg.beta = 0.7;
            cfg.gamma = 4.0 / 3.0;
            break;
        case LossKind::Combo:
            cfg.alpha = 0.5;
            cfg.beta = 0.5;
            break;
        case LossKind::UnifiedFocal:
            cfg.gamma = 0.1;
            cfg.delta = 0.6;
            cfg.lambda = 0.5;
            break;
    }
    return cfg;
}

void validate_batch(const Tensor& probs, const Tensor& onehot) {
    if (probs.rank() < 2 || probs.shape[0] != 2)
        throw std::invalid_argument("batch: probs must be [2,...], got " +
                                    shape_string(probs.shape));
    if (onehot.shape != probs.shape)
        throw std::invalid_argument("batch: onehot shape " + shape_string(onehot.shape) +
                                    " does not match probs " + shape_string(probs.shape));
    const std::size_t P = probs.size() / 2;
    for (std::size_t i = 0; i < P; ++i) {
        const double y0 = onehot[i], y1 = onehot[P + i];
        if ((y0 != 0.0 && y0 != 1.0) || y0 + y1 != 1.0)
            throw std::invalid_argument("batch: onehot must be binary and complementary");
    }
    // range guard only: a strict per-pixel sum check would reject legitimate
    // finite-difference probes of single probability coordinates
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (probs[i] < -1e-6 || probs[i] > 1.0 + 1e-6)
            throw std::invalid_argument("batch: probabilities must lie in [0,1]");
}

Tensor onehot_from_mask(const Tensor& mask) {
    if (mask.rank() != 2)
        throw std::invalid_argument("onehot_from_mask: mask must be [H,W]");
    Tensor out({2, mask.shape[0], mask.shape[1]});
    const std::size_t P = mask.size();
    for (std::size_t i = 0; i < P; ++i) {
        const double v = mask[i];
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("onehot_from_mask: mask values must be 0 or 1");
        out[i] = v;
        out[P + i] = 1.0 - v;
    }
    return out;
}

namespace {

// Mask that carries onehot channel `y_ch` in the slots of probability channel
// `p_ch` and zero elsewhere, so probs (*) mask holds the per-pixel products
// p_{p_ch,i} * y_{y_ch,i} (in the p_ch slots) of the confusion-style sums.
Tensor slot_mask(const Tensor& onehot, std::size_t y_ch, std::size_t p_ch) {
    const std::size_t P = onehot.size() / 2;
    Tensor m(onehot.shape, 0.0);
    for (std::size_t i = 0; i < P; ++i) m[p_ch * P + i] = onehot[y_ch * P + i];
    return m;
}

// sum_i (p_{p_ch,i} * y_{y_ch,i})^exponent, exponent applied per pixel.
// Slots of the other channel are structural zeros and stay exactly zero
// through pow (0^e = 0), so the full-tensor sum equals the per-class sum.
NodePtr product_sum(const NodePtr& probs, const Tensor& onehot, std::size_t p_ch,
                    std::size_t y_ch, double exponent) {
    NodePtr terms = mul(probs, leaf(slot_mask(onehot, y_ch, p_ch)));
    if (exponent != 1.0) terms = pow(terms, exponent);
    return reduce_sum(terms);
}

// Generalised Tversky ratio with `target` as the class of interest:
// (TP + eps) / (TP + w_fp * FP^e + w_fn * FN^e + eps), all sums per-pixel.
NodePtr tversky_core(const NodePtr& probs, const Tensor& onehot, std::size_t target,
                     double w_fp, double w_fn, double exponent, double smooth) {
    const std::size_t other = 1 - target;
    NodePtr tp = product_sum(probs, onehot, target, target, 1.0);
    NodePtr fp = product_sum(probs, onehot, target, other, exponent);
    NodePtr fn = product_sum(probs, onehot, other, target, exponent);
    NodePtr num = add(tp, smooth);
    NodePtr den = add(add(add(tp, mul(fp, w_fp)), mul(fn, w_fn)), smooth);
    return divide(num, den);
}

// 1 - (2 TP + eps) / (2 TP + FP^e + FN^e + eps): the Dice-family body shared
// by dsc_loss, dscpp_loss and combo's score term.
NodePtr dsc_family(const NodePtr& probs, const Tensor& onehot, double exponent,
                   double smooth) {
    validate_batch(probs->value, onehot);
    NodePtr two_tp = mul(product_sum(probs, onehot, 0, 0, 1.0), 2.0);
    NodePtr fp = product_sum(probs, onehot, 0, 1, exponent);
    NodePtr fn = product_sum(probs, onehot, 1, 0, exponent);
    NodePtr num = add(two_tp, smooth);
    NodePtr den = add(add(add(two_tp, fp), fn), smooth);
    return sub(1.0, divide(num, den));
}

void check_unit_range(double v, const char* name) {
    if (v < 0.0 || v > 1.0)
        throw std::invalid_argument(std::string("make_loss: ") + name +
                                    " must be in [0,1], got " + std::to_string(v));
}

}  // namespace

NodePtr ce_loss(const NodePtr& probs, const Tensor& onehot) {
    validate_batch(probs->value, onehot);
    const std::size_t P = probs->value.size() / 2;
    NodePtr picked = mul(log(probs), leaf(onehot));
    return mul(reduce_sum(picked), -1.0 / static_cast<double>(P));
}

NodePtr dsc_loss(const NodePtr& probs, const Tensor& onehot, double smooth) {
    return dsc_family(probs, onehot, 1.0, smooth);
}

NodePtr dscpp_loss(const NodePtr& probs, const Tensor& onehot, double gamma, double smooth) {
    if (!(gamma > 0.0))
        throw std::invalid_argument("dscpp_loss: gamma must be positive");
    return dsc_family(probs, onehot, gamma, smooth);
}

NodePtr tversky_index(const NodePtr& probs, const Tensor& onehot, double w_fp,
                      double w_fn, double exponent, double smooth) {
    validate_batch(probs->value, onehot);
    if (w_fp < 0.0 || w_fn < 0.0)
        throw std::invalid_argument("tversky_index: weights must be >= 0");
    return tversky_core(probs, onehot, 0, w_fp, w_fn, exponent, smooth);
}

NodePtr tversky_loss(const NodePtr& probs, const Tensor& onehot, const LossConfig& cfg) {
    const double e = cfg.plusplus ? 2.0 : 1.0;
    return sub(1.0, tversky_index(probs, onehot, cfg.alpha, cfg.beta, e, cfg.smooth));
}

NodePtr focal_tversky_loss(const NodePtr& probs, const Tensor& onehot, const LossConfig& cfg) {
    if (!(cfg.gamma > 0.0))
        throw std::invalid_argument("focal_tversky_loss: gamma must be positive");
    const double e = cfg.plusplus ? 2.0 : 1.0;
    NodePtr ti = tversky_index(probs, onehot, cfg.alpha, cfg.beta, e, cfg.smooth);
    return pow(sub(1.0, ti), 1.0 / cfg.gamma);
}

NodePtr combo_loss(const NodePtr& probs, const Tensor& onehot, const LossConfig& cfg) {
    validate_batch(probs->value, onehot);
    const std::size_t P = probs->value.size() / 2;
    const double N = static_cast<double>(P);
    // L_mCE = -(1/N) sum [beta * y * log p0 + (1-beta) * (1-y) * log p1];
    // log runs over the full tensor and the slot masks pick each class term.
    NodePtr logp = log(probs);
    NodePtr fg = reduce_sum(mul(logp, leaf(slot_mask(onehot, 0, 0))));
    NodePtr bg = reduce_sum(mul(logp, leaf(slot_mask(onehot, 1, 1))));
    NodePtr mce = mul(add(mul(fg, cfg.beta), mul(bg, 1.0 - cfg.beta)), -1.0 / N);
    const double e = cfg.plusplus ? 2.0 : 1.0;
    NodePtr dsc_score = sub(1.0, dsc_family(probs, onehot, e, cfg.smooth));
    return sub(mul(mce, cfg.alpha), mul(dsc_score, 1.0 - cfg.alpha));
}

NodePtr unified_focal_loss(const NodePtr& probs, const Tensor& onehot, const LossConfig& cfg) {
    if (!(cfg.gamma > 0.0) || cfg.gamma >= 1.0)
        throw std::invalid_argument("unified_focal_loss: gamma must be in (0,1)");
    validate_batch(probs->value, onehot);
    const std::size_t P = probs->value.size() / 2;
    const double N = static_cast<double>(P);
    const double d = cfg.delta, g = cfg.gamma, l = cfg.lambda;

    // Asymmetric focal CE: plain log term on foreground pixels, focal-damped
    // log term on background pixels.
    NodePtr logp = log(probs);
    NodePtr fg = reduce_sum(mul(logp, leaf(slot_mask(onehot, 0, 0))));
    Tensor bg_sel = slot_mask(onehot, 1, 1);
    NodePtr one_minus_p1 = mul(sub(1.0, probs), leaf(bg_sel));
    NodePtr focal_weight = pow(one_minus_p1, g);
    NodePtr bg = reduce_sum(mul(focal_weight, mul(logp, leaf(bg_sel))));
    NodePtr l_af = add(mul(fg, -d / N), mul(bg, -(1.0 - d) / N));

    // Asymmetric focal Tversky: focal power on the rare-class term only;
    // the background term is the class-swapped Tversky complement.
    const double e = cfg.plusplus ? 2.0 : 1.0;
    NodePtr ti_r = tversky_core(probs, onehot, 0, d, 1.0 - d, e, cfg.smooth);
    NodePtr ti_b = tversky_core(probs, onehot, 1, d, 1.0 - d, e, cfg.smooth);
    NodePtr l_aft = add(pow(sub(1.0, ti_r), 1.0 - g), sub(1.0, ti_b));

    return add(mul(l_af, l), mul(l_aft, 1.0 - l));
}

LossFn make_loss(const LossConfig& cfg) {
    if (cfg.smooth < 0.0) throw std::invalid_argument("make_loss: smooth must be >= 0");
    switch (cfg.kind) {
        case LossKind::CE:
            return [](const NodePtr& p, const Tensor& y) { return ce_loss(p, y); };
        case LossKind::DSC: {
            const double s = cfg.smooth;
            if (cfg.plusplus)
                return [s](const NodePtr& p, const Tensor& y) { return dscpp_loss(p, y, 2.0, s); };
            return [s](const NodePtr& p, const Tensor& y) { return dsc_loss(p, y, s); };
        }
        case LossKind::DSCpp: {
            if (!(cfg.gamma > 0.0))
                throw std::invalid_argument("make_loss: dscpp gamma must be positive");
            const double g = cfg.gamma, s = cfg.smooth;
            return [g, s](const NodePtr& p, const Tensor& y) { return dscpp_loss(p, y, g, s); };
        }
        case LossKind::Tversky: {
            check_unit_range(cfg.alpha, "alpha");
            check_unit_range(cfg.beta, "beta");
            LossConfig c = cfg;
            return [c](const NodePtr& p, const Tensor& y) { return tversky_loss(p, y, c); };
        }
        case LossKind::FocalTversky: {
            check_unit_range(cfg.alpha, "alpha");
            check_unit_range(cfg.beta, "beta");
            if (!(cfg.gamma > 0.0))
                throw std::invalid_argument("make_loss: focal tversky gamma must be positive");
            LossConfig c = cfg;
            return [c](const NodePtr& p, const Tensor& y) { return focal_tversky_loss(p, y, c); };
        }
        case LossKind::Combo: {
            check_unit_range(cfg.alpha, "alpha");
            check_unit_range(cfg.beta, "beta");
            LossConfig c = cfg;
            return [c](const NodePtr& p, const Tensor& y) { return combo_loss(p, y, c); };
        }
        case LossKind::UnifiedFocal: {
            if (!(cfg.gamma > 0.0) || cfg.gamma >= 1.0)
                throw std::invalid_argument("make_loss: unified focal gamma must be in (0,1)");
            check_unit_range(cfg.delta, "delta");
            check_unit_range(cfg.lambda, "lambda");
            LossConfig c = cfg;
            return [c](const NodePtr& p, const Tensor& y) { return unified_focal_loss(p, y, c); };
        }
    }
    throw std::invalid_argument("make_loss: unknown loss kind");
}

LossKind loss_kind_from_name(const std::string& name, bool* plusplus) {
    std::string base = name;
    bool pp = false;
    if (base.size() > 2 && base.substr(base.size() - 2) == "++") {
        pp = true;
        base = base.substr(0, base.size() - 2);
    }
    if (plusplus) *plusplus = pp;
    const auto kind = [&]() -> LossKind {
        if (base == "ce") return LossKind::CE;
        if (base == "dsc" || base == "dice") return LossKind::DSC;
        if (base == "dscpp") return LossKind::DSCpp;
        if (base == "tversky") return LossKind::Tversky;
        if (base == "focal-tversky") return LossKind::FocalTversky;
        if (base == "combo") return LossKind::Combo;
        if (base == "unified-focal") return LossKind::UnifiedFocal;
        throw std::invalid_argument("unknown loss name: " + name);
    }();
    // ++ squares the per-pixel error products inside overlap ratios; it has no
    // meaning for pure cross entropy, and dscpp already owns its exponent.
    if (pp && (kind == LossKind::CE || kind == LossKind::DSCpp))
        throw std::invalid_argument("loss '" + base + "' has no ++ variant");
    return kind;
}

std::string loss_name(const LossConfig& cfg) {
    std::string base;
    switch (cfg.kind) {
        case LossKind::CE: base = "ce"; break;
        case LossKind::DSC: base = "dsc"; break;
        case LossKind::DSCpp: base = "dscpp"; break;
        case LossKind::Tversky: base = "tversky"; break;
        case LossKind::FocalTversky: base = "focal-tversky"; break;
        case LossKind::Combo: base = "combo"; break;
        case LossKind::UnifiedFocal: base = "unified-focal"; break;
    }
    if (cfg.plusplus && cfg.kind != LossKind::CE && cfg.kind != LossKind::DSCpp) base += "++";
    return base;
}

}  // namespace calseg
