#include "calseg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace calseg {

namespace {

constexpr double kPowBaseFloor = 1e-12;
constexpr double kLogFloor = 1e-7;
constexpr double kLogCeil = 1.0;

bool is_scalar(const Tensor& t) { return t.size() == 1; }

void check_broadcast(const Tensor& a, const Tensor& b, const char* what) {
    if (!same_shape(a, b) && !is_scalar(a) && !is_scalar(b))
        throw std::invalid_argument(std::string(what) + ": shapes " + shape_string(a.shape) +
                                    " and " + shape_string(b.shape) + " are not broadcastable");
}

const std::vector<std::size_t>& broadcast_shape(const Tensor& a, const Tensor& b) {
    return is_scalar(a) ? b.shape : a.shape;
}

// Elementwise binary op with scalar broadcast. fv computes the value,
// fga/fgb the local derivatives d out / d a and d out / d b.
template <class FV, class FA, class FB>
NodePtr binary_op(OpKind kind, const char* what, const NodePtr& a, const NodePtr& b,
                  FV fv, FA fga, FB fgb) {
    check_broadcast(a->value, b->value, what);
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    Tensor out(broadcast_shape(av, bv));
    const std::size_t n = out.size();
    const bool sa = is_scalar(av), sb = is_scalar(bv);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = fv(av[sa ? 0 : i], bv[sb ? 0 : i]);
    auto node = std::make_shared<Node>(std::move(out), kind);
    node->parents = {a, b};
    Node* self = node.get();
    Node* pa = a.get();
    Node* pb = b.get();
    node->backprop = [self, pa, pb, sa, sb, fga, fgb, n]() {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = self->grad[i];
            const double x = pa->value[sa ? 0 : i];
            const double y = pb->value[sb ? 0 : i];
            pa->grad[sa ? 0 : i] += g * fga(x, y);
            pb->grad[sb ? 0 : i] += g * fgb(x, y);
        }
    };
    return node;
}

template <class FV, class FG>
NodePtr unary_op(OpKind kind, const NodePtr& a, FV fv, FG fg) {
    Tensor out(a->value.shape);
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = fv(a->value[i]);
    auto node = std::make_shared<Node>(std::move(out), kind);
    node->parents = {a};
    Node* self = node.get();
    Node* pa = a.get();
    node->backprop = [self, pa, fg, n]() {
        for (std::size_t i = 0; i < n; ++i)
            pa->grad[i] += self->grad[i] * fg(pa->value[i]);
    };
    return node;
}

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& shape) {
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

}  // namespace

NodePtr leaf(Tensor v) { return std::make_shared<Node>(std::move(v)); }

NodePtr constant(double v) { return leaf(Tensor::scalar(v)); }

NodePtr add(const NodePtr& a, const NodePtr& b) {
    return binary_op(OpKind::Add, "add", a, b,
                     [](double x, double y) { return x + y; },
                     [](double, double) { return 1.0; },
                     [](double, double) { return 1.0; });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    return binary_op(OpKind::Sub, "sub", a, b,
                     [](double x, double y) { return x - y; },
                     [](double, double) { return 1.0; },
                     [](double, double) { return -1.0; });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    return binary_op(OpKind::Mul, "mul", a, b,
                     [](double x, double y) { return x * y; },
                     [](double, double y) { return y; },
                     [](double x, double) { return x; });
}

NodePtr divide(const NodePtr& a, const NodePtr& b) {
    return binary_op(OpKind::Div, "div", a, b,
                     [](double x, double y) { return x / y; },
                     [](double, double y) { return 1.0 / y; },
                     [](double x, double y) { return -x / (y * y); });
}

NodePtr add(const NodePtr& a, double b) { return add(a, constant(b)); }
NodePtr sub(const NodePtr& a, double b) { return sub(a, constant(b)); }
NodePtr sub(double a, const NodePtr& b) { return sub(constant(a), b); }
NodePtr mul(const NodePtr& a, double b) { return mul(a, constant(b)); }
NodePtr divide(const NodePtr& a, double b) { return divide(a, constant(b)); }

NodePtr pow(const NodePtr& a, double exponent) {
    const bool integral = exponent == std::floor(exponent);
    for (std::size_t i = 0; i < a->value.size(); ++i)
        if (a->value[i] < 0.0 && !integral)
            throw std::domain_error("pow: negative base with non-integer exponent");
    return unary_op(OpKind::Pow, a,
                    [exponent](double x) { return std::pow(x, exponent); },
                    [exponent](double x) {
                        double base = x >= 0.0 ? std::max(x, kPowBaseFloor) : x;
                        return exponent * std::pow(base, exponent - 1.0);
                    });
}

NodePtr exp(const NodePtr& a) {
    return unary_op(OpKind::Exp, a,
                    [](double x) { return std::exp(x); },
                    [](double x) { return std::exp(x); });
}

NodePtr log(const NodePtr& a) {
    for (std::size_t i = 0; i < a->value.size(); ++i)
        if (a->value[i] < 0.0)
            throw std::domain_error("log: negative argument");
    return unary_op(OpKind::Log, a,
                    [](double x) { return std::log(std::clamp(x, kLogFloor, kLogCeil)); },
                    [](double x) {
                        return (x >= kLogFloor && x <= kLogCeil) ? 1.0 / x : 0.0;
                    });
}

NodePtr relu(const NodePtr& a) {
    return unary_op(OpKind::Relu, a,
                    [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

NodePtr neg(const NodePtr& a) {
    return unary_op(OpKind::Neg, a,
                    [](double x) { return -x; },
                    [](double) { return -1.0; });
}

namespace {

NodePtr reduce_op(OpKind kind, const NodePtr& a, std::vector<std::size_t> axes) {
    const Tensor& av = a->value;
    if (axes.empty())
        for (std::size_t i = 0; i < av.rank(); ++i) axes.push_back(i);
    std::sort(axes.begin(), axes.end());
    axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
    for (std::size_t ax : axes)
        if (ax >= av.rank())
            throw std::invalid_argument("reduce: axis " + std::to_string(ax) +
                                        " invalid for shape " + shape_string(av.shape));

    std::vector<bool> reduced(av.rank(), false);
    for (std::size_t ax : axes) reduced[ax] = true;
    std::vector<std::size_t> out_shape;
    for (std::size_t i = 0; i < av.rank(); ++i)
        if (!reduced[i]) out_shape.push_back(av.shape[i]);
    if (out_shape.empty()) out_shape = {1};

    // out_index[i] for each flat input index, via strides
    const auto in_strides = strides_of(av.shape);
    const auto out_strides = strides_of(out_shape);
    const std::size_t n = av.size();
    std::vector<std::size_t> out_index(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t o = 0, k = 0;
        for (std::size_t d = 0; d < av.rank(); ++d) {
            const std::size_t coord = (i / in_strides[d]) % av.shape[d];
            if (!reduced[d]) o += coord * out_strides[k++];
        }
        out_index[i] = o;
    }

    std::size_t group = 1;
    for (std::size_t ax : axes) group *= av.shape[ax];
    const double scale = kind == OpKind::ReduceMean ? 1.0 / static_cast<double>(group) : 1.0;

    Tensor out(out_shape, 0.0);
    for (std::size_t i = 0; i < n; ++i) out[out_index[i]] += av[i] * scale;

    auto node = std::make_shared<Node>(std::move(out), kind);
    node->parents = {a};
    Node* self = node.get();
    Node* pa = a.get();
    node->backprop = [self, pa, out_index = std::move(out_index), scale, n]() {
        for (std::size_t i = 0; i < n; ++i)
            pa->grad[i] += self->grad[out_index[i]] * scale;
    };
    return node;
}

}  // namespace

NodePtr reduce_sum(const NodePtr& a, const std::vector<std::size_t>& axes) {
    return reduce_op(OpKind::ReduceSum, a, axes);
}

NodePtr reduce_mean(const NodePtr& a, const std::vector<std::size_t>& axes) {
    return reduce_op(OpKind::ReduceMean, a, axes);
}

NodePtr softmax_channels(const NodePtr& a) {
    const Tensor& av = a->value;
    if (av.rank() != 2 && av.rank() != 3)
        throw std::invalid_argument("softmax_channels: expected rank 2 or 3, got " +
                                    shape_string(av.shape));
    const std::size_t C = av.shape[0];
    if (C < 2) throw std::invalid_argument("softmax_channels: need at least 2 channels");
    const std::size_t P = av.size() / C;  // pixels

    Tensor out(av.shape);
    for (std::size_t p = 0; p < P; ++p) {
        double mx = av[p];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, av[c * P + p]);
        double denom = 0.0;
        for (std::size_t c = 0; c < C; ++c) denom += std::exp(av[c * P + p] - mx);
        for (std::size_t c = 0; c < C; ++c) out[c * P + p] = std::exp(av[c * P + p] - mx) / denom;
    }

    auto node = std::make_shared<Node>(std::move(out), OpKind::SoftmaxChannels);
    node->parents = {a};
    Node* self = node.get();
    Node* pa = a.get();
    node->backprop = [self, pa, C, P]() {
        for (std::size_t p = 0; p < P; ++p) {
            double dot = 0.0;
            for (std::size_t c = 0; c < C; ++c)
                dot += self->grad[c * P + p] * self->value[c * P + p];
            for (std::size_t c = 0; c < C; ++c) {
                const double s = self->value[c * P + p];
                pa->grad[c * P + p] += s * (self->grad[c * P + p] - dot);
            }
        }
    };
    return node;
}

NodePtr conv2d(const NodePtr& input, const NodePtr& weight, const NodePtr& bias) {
    const Tensor& in = input->value;
    const Tensor& w = weight->value;
    const Tensor& b = bias->value;
    if (in.rank() != 3) throw std::invalid_argument("conv2d: input must be [Cin,H,W]");
    if (w.rank() != 4) throw std::invalid_argument("conv2d: weight must be [Cout,Cin,k,k]");
    const std::size_t Cin = in.shape[0], H = in.shape[1], W = in.shape[2];
    const std::size_t Cout = w.shape[0], k = w.shape[2];
    if (w.shape[1] != Cin)
        throw std::invalid_argument("conv2d: weight expects " + std::to_string(w.shape[1]) +
                                    " input channels, input has " + std::to_string(Cin));
    if (w.shape[3] != k || k % 2 == 0)
        throw std::invalid_argument("conv2d: kernel must be square with odd size");
    if (b.shape != std::vector<std::size_t>{Cout})
        throw std::invalid_argument("conv2d: bias must be [Cout]");
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k / 2);
    const std::ptrdiff_t sH = static_cast<std::ptrdiff_t>(H);
    const std::ptrdiff_t sW = static_cast<std::ptrdiff_t>(W);

    Tensor out({Cout, H, W});
    for (std::size_t co = 0; co < Cout; ++co) {
        double* op = &out.data[co * H * W];
        const double bv = b[co];
        for (std::size_t i = 0; i < H * W; ++i) op[i] = bv;
        for (std::size_t ci = 0; ci < Cin; ++ci) {
            const double* ip = &in.data[ci * H * W];
            for (std::size_t ky = 0; ky < k; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - r;
                const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
                const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(sH, sH - dy);
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const double wv = w.data[((co * Cin + ci) * k + ky) * k + kx];
                    if (wv == 0.0) continue;
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - r;
                    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                    const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(sW, sW - dx);
                    for (std::ptrdiff_t y = y0; y < y1; ++y) {
                        double* orow = op + y * sW;
                        const double* irow = ip + (y + dy) * sW + dx;
                        for (std::ptrdiff_t x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }

    auto node = std::make_shared<Node>(std::move(out), OpKind::Conv2d);
    node->parents = {input, weight, bias};
    Node* self = node.get();
    Node* pin = input.get();
    Node* pw = weight.get();
    Node* pb = bias.get();
    node->backprop = [self, pin, pw, pb, Cin, Cout, H, W, k, r, sH, sW]() {
        const Tensor& g = self->grad;
        for (std::size_t co = 0; co < Cout; ++co) {
            const double* gp = &g.data[co * H * W];
            double acc = 0.0;
            for (std::size_t i = 0; i < H * W; ++i) acc += gp[i];
            pb->grad[co] += acc;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                const double* ip = &pin->value.data[ci * H * W];
                double* dip = &pin->grad.data[ci * H * W];
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - r;
                    const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
                    const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(sH, sH - dy);
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::size_t wi = ((co * Cin + ci) * k + ky) * k + kx;
                        const double wv = pw->value.data[wi];
                        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - r;
                        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(sW, sW - dx);
                        double wacc = 0.0;
                        for (std::ptrdiff_t y = y0; y < y1; ++y) {
                            const double* grow = gp + y * sW;
                            const double* irow = ip + (y + dy) * sW + dx;
                            double* drow = dip + (y + dy) * sW + dx;
                            for (std::ptrdiff_t x = x0; x < x1; ++x) {
                                wacc += grow[x] * irow[x];
                                drow[x] += grow[x] * wv;
                            }
                        }
                        pw->grad.data[wi] += wacc;
                    }
                }
            }
        }
    };
    return node;
}

NodePtr instance_norm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias, double eps) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3) throw std::invalid_argument("instance_norm: input must be [C,H,W]");
    const std::size_t C = xv.shape[0];
    const std::size_t P = xv.shape[1] * xv.shape[2];
    if (gain->value.shape != std::vector<std::size_t>{C} ||
        bias->value.shape != std::vector<std::size_t>{C})
        throw std::invalid_argument("instance_norm: gain/bias must be [C]");

    Tensor out(xv.shape);
    std::vector<double> inv_sd(C);
    for (std::size_t c = 0; c < C; ++c) {
        const double* xp = &xv.data[c * P];
        double mean = 0.0;
        for (std::size_t i = 0; i < P; ++i) mean += xp[i];
        mean /= static_cast<double>(P);
        double var = 0.0;
        for (std::size_t i = 0; i < P; ++i) var += (xp[i] - mean) * (xp[i] - mean);
        var /= static_cast<double>(P);  // population variance
        const double isd = 1.0 / std::sqrt(var + eps);
        inv_sd[c] = isd;
        const double g = gain->value[c], b = bias->value[c];
        double* op = &out.data[c * P];
        for (std::size_t i = 0; i < P; ++i) op[i] = (xp[i] - mean) * isd * g + b;
    }

    auto node = std::make_shared<Node>(std::move(out), OpKind::InstanceNorm);
    node->parents = {x, gain, bias};
    Node* self = node.get();
    Node* px = x.get();
    Node* pg = gain.get();
    Node* pb = bias.get();
    node->backprop = [self, px, pg, pb, C, P, inv_sd = std::move(inv_sd)]() {
        for (std::size_t c = 0; c < C; ++c) {
            const double* xp = &px->value.data[c * P];
            const double* gp = &self->grad.data[c * P];
            const double isd = inv_sd[c];
            const double g = pg->value[c];
            double mean = 0.0;
            for (std::size_t i = 0; i < P; ++i) mean += xp[i];
            mean /= static_cast<double>(P);
            double gsum = 0.0, gdot = 0.0;
            for (std::size_t i = 0; i < P; ++i) {
                const double xhat = (xp[i] - mean) * isd;
                gsum += gp[i];
                gdot += gp[i] * xhat;
            }
            pg->grad[c] += gdot;
            pb->grad[c] += gsum;
            const double gmean = gsum / static_cast<double>(P);
            const double dmean = gdot / static_cast<double>(P);
            double* dxp = &px->grad.data[c * P];
            for (std::size_t i = 0; i < P; ++i) {
                const double xhat = (xp[i] - mean) * isd;
                dxp[i] += g * isd * (gp[i] - gmean - xhat * dmean);
            }
        }
    };
    return node;
}

NodePtr downsample2(const NodePtr& a) {
    const Tensor& av = a->value;
    if (av.rank() != 3) throw std::invalid_argument("downsample2: input must be [C,H,W]");
    const std::size_t C = av.shape[0], H = av.shape[1], W = av.shape[2];
    if (H % 2 != 0 || W % 2 != 0)
        throw std::invalid_argument("downsample2: H and W must be even, got " +
                                    shape_string(av.shape));
    const std::size_t Ho = H / 2, Wo = W / 2;
    Tensor out({C, Ho, Wo});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < Ho; ++y)
            for (std::size_t x = 0; x < Wo; ++x)
                out.at3(c, y, x) = 0.25 * (av.at3(c, 2 * y, 2 * x) + av.at3(c, 2 * y, 2 * x + 1) +
                                           av.at3(c, 2 * y + 1, 2 * x) +
                                           av.at3(c, 2 * y + 1, 2 * x + 1));

    auto node = std::make_shared<Node>(std::move(out), OpKind::Downsample2);
    node->parents = {a};
    Node* self = node.get();
    Node* pa = a.get();
    node->backprop = [self, pa, C, Ho, Wo]() {
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < Ho; ++y)
                for (std::size_t x = 0; x < Wo; ++x) {
                    const double g = 0.25 * self->grad.at3(c, y, x);
                    pa->grad.at3(c, 2 * y, 2 * x) += g;
                    pa->grad.at3(c, 2 * y, 2 * x + 1) += g;
                    pa->grad.at3(c, 2 * y + 1, 2 * x) += g;
                    pa->grad.at3(c, 2 * y + 1, 2 * x + 1) += g;
                }
    };
    return node;
}

NodePtr upsample2(const NodePtr& a) {
    const Tensor& av = a->value;
    if (av.rank() != 3) throw std::invalid_argument("upsample2: input must be [C,H,W]");
    const std::size_t C = av.shape[0], H = av.shape[1], W = av.shape[2];
    Tensor out({C, 2 * H, 2 * W});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                const double v = av.at3(c, y, x);
                out.at3(c, 2 * y, 2 * x) = v;
                out.at3(c, 2 * y, 2 * x + 1) = v;
                out.at3(c, 2 * y + 1, 2 * x) = v;
                out.at3(c, 2 * y + 1, 2 * x + 1) = v;
            }

    auto node = std::make_shared<Node>(std::move(out), OpKind::Upsample2);
    node->parents = {a};
    Node* self = node.get();
    Node* pa = a.get();
    node->backprop = [self, pa, C, H, W]() {
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x)
                    pa->grad.at3(c, y, x) += self->grad.at3(c, 2 * y, 2 * x) +
                                             self->grad.at3(c, 2 * y, 2 * x + 1) +
                                             self->grad.at3(c, 2 * y + 1, 2 * x) +
                                             self->grad.at3(c, 2 * y + 1, 2 * x + 1);
    };
    return node;
}

NodePtr concat_channels(const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    if (av.rank() != 3 || bv.rank() != 3)
        throw std::invalid_argument("concat_channels: inputs must be [C,H,W], got " +
                                    shape_string(av.shape) + " and " + shape_string(bv.shape));
    if (av.shape[1] != bv.shape[1] || av.shape[2] != bv.shape[2])
        throw std::invalid_argument("concat_channels: spatial shapes differ: " +
                                    shape_string(av.shape) + " vs " + shape_string(bv.shape));
    const std::size_t na = av.size(), nb = bv.size();
    Tensor out({av.shape[0] + bv.shape[0], av.shape[1], av.shape[2]});
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + na);

    auto node = std::make_shared<Node>(std::move(out), OpKind::ConcatChannels);
    node->parents = {a, b};
    Node* self = node.get();
    Node* pa = a.get();
    Node* pb = b.get();
    node->backprop = [self, pa, pb, na, nb]() {
        for (std::size_t i = 0; i < na; ++i) pa->grad[i] += self->grad[i];
        for (std::size_t i = 0; i < nb; ++i) pb->grad[i] += self->grad[na + i];
    };
    return node;
}

namespace {

// Iterative post-order DFS; returns nodes in topological order (parents first).
std::vector<Node*> topo_order(const NodePtr& root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

void backward(const NodePtr& root) {
    if (root->value.size() != 1)
        throw std::invalid_argument("backward: root must have exactly one element, got " +
                                    shape_string(root->value.shape));
    auto order = topo_order(root);
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop();
}

void zero_grads(const NodePtr& root) {
    for (Node* n : topo_order(root))
        std::fill(n->grad.data.begin(), n->grad.data.end(), 0.0);
}

double grad_check(const std::function<NodePtr(const NodePtr&)>& build,
                  const Tensor& input, double step) {
    NodePtr x = leaf(input);
    NodePtr root = build(x);
    backward(root);
    const Tensor analytic = x->grad;

    double worst = 0.0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        Tensor hi = input, lo = input;
        hi[i] += step;
        lo[i] -= step;
        const double fhi = build(leaf(hi))->value[0];
        const double flo = build(leaf(lo))->value[0];
        const double numeric = (fhi - flo) / (2.0 * step);
        const double err = std::abs(analytic[i] - numeric) /
                           std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace calseg
