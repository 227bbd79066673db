#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "calseg/tensor.hpp"

namespace calseg {

enum class OpKind {
    Leaf,
    Add, Sub, Mul, Div, Pow, Exp, Log, Relu, Neg,
    ReduceSum, ReduceMean,
    SoftmaxChannels, Conv2d, InstanceNorm,
    Downsample2, Upsample2, ConcatChannels,
};

class Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the computation DAG. `grad` accumulates additively across
// backward passes; callers reset explicitly (zero_grads) before reuse.
class Node {
public:
    OpKind op = OpKind::Leaf;
    Tensor value;
    Tensor grad;  // same shape as value, zero-initialised
    std::vector<NodePtr> parents;
    std::function<void()> backprop;  // pushes this->grad into parents' grads

    explicit Node(Tensor v, OpKind k = OpKind::Leaf)
        : op(k), value(std::move(v)), grad(value.shape, 0.0) {}
};

NodePtr leaf(Tensor v);
NodePtr constant(double v);

// Elementwise. Shapes must be equal, or one operand a scalar (one element).
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr divide(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, double b);
NodePtr sub(const NodePtr& a, double b);
NodePtr sub(double a, const NodePtr& b);
NodePtr mul(const NodePtr& a, double b);
NodePtr divide(const NodePtr& a, double b);

// pow with constant exponent. Negative base requires an integer exponent.
// The derivative clamps the base to >= 1e-12 so gamma < 1 at base 0 stays finite.
NodePtr pow(const NodePtr& a, double exponent);
NodePtr exp(const NodePtr& a);
// log clamps its argument to [1e-7, 1]; a negative argument is an error.
NodePtr log(const NodePtr& a);
NodePtr relu(const NodePtr& a);
NodePtr neg(const NodePtr& a);

// Reductions over the given axes (all axes when `axes` is empty); the result
// drops the reduced axes, collapsing to shape [1] when none remain.
NodePtr reduce_sum(const NodePtr& a, const std::vector<std::size_t>& axes = {});
NodePtr reduce_mean(const NodePtr& a, const std::vector<std::size_t>& axes = {});

// Softmax over axis 0 (channels-first): rank 3 [C,H,W] or rank 2 [C,N], C >= 2.
// Forward subtracts the per-pixel max before exponentiation.
NodePtr softmax_channels(const NodePtr& a);

// Same-padded stride-1 convolution: input [Cin,H,W], weight [Cout,Cin,k,k]
// (k odd), bias [Cout] -> [Cout,H,W].
NodePtr conv2d(const NodePtr& input, const NodePtr& weight, const NodePtr& bias);

// Per-channel normalisation over H*W (population variance), then gain/bias.
NodePtr instance_norm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias,
                      double eps = 1e-5);

// 2x2 average pooling (H, W even) and nearest-neighbour 2x upsampling.
NodePtr downsample2(const NodePtr& a);
NodePtr upsample2(const NodePtr& a);

// Stack two [C,H,W] tensors along the channel axis.
NodePtr concat_channels(const NodePtr& a, const NodePtr& b);

// Reverse-topological gradient propagation from a one-element root.
// Seeds root->grad with exactly 1.0 and accumulates into every reachable node.
void backward(const NodePtr& root);

// Zero the grad buffers of every node reachable from `root`.
void zero_grads(const NodePtr& root);

// Compares analytic gradients of build(leaf(input)) against central finite
// differences with the given step. Returns the max over coordinates of
// |analytic - numeric| / max(1, |analytic|).
double grad_check(const std::function<NodePtr(const NodePtr&)>& build,
                  const Tensor& input, double step = 1e-5);

}  // namespace calseg
