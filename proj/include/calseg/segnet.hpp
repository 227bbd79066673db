#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "calseg/autodiff.hpp"

namespace calseg {

struct NetConfig {
    std::size_t depth = 2;          // encoder/decoder levels
    std::size_t base_channels = 8;  // channels at the finest level
    std::size_t kernel = 3;         // odd
    std::size_t input_channels = 1;
    std::uint64_t seed = 11;
};

// Named parameters in fixed architecture order (the checkpoint order).
struct ParameterSet {
    std::vector<std::pair<std::string, Tensor>> items;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const;
    std::size_t total_values() const;
};

struct ForwardPass {
    NodePtr probs;   // [2,H,W], softmax over channels
    NodePtr logits;  // [2,H,W]
    std::vector<std::pair<std::string, NodePtr>> param_leaves;  // same order as params
};

// Model interface so the training loop is testable with small stand-ins.
class Model {
public:
    virtual ~Model() = default;
    virtual ForwardPass forward(const ParameterSet& params, const Tensor& image) const = 0;
};

// Mirror-symmetric encoder/decoder with skip connections:
// depth blocks of (conv, instance_norm, relu) x2 followed by downsample2, a
// bottom block, then mirrored upsample2 + channel-concat blocks and a final
// 1x1 convolution to 2 channels with channel softmax.
class SegNet : public Model {
public:
    explicit SegNet(NetConfig cfg);

    const NetConfig& config() const { return cfg_; }

    // Xavier-uniform kernels (fan = k*k*channels), zero biases, unit norm
    // gains; deterministic in cfg.seed.
    ParameterSet init_params() const;

    // image [Cin,H,W] or [H,W] (treated as one channel); H, W divisible by 2^depth.
    ForwardPass forward(const ParameterSet& params, const Tensor& image) const override;

    std::size_t param_count() const;

    // Throws unless params carry exactly the expected names and shapes.
    void check_params(const ParameterSet& params) const;

private:
    NetConfig cfg_;
};

// Checkpoint file: magic "SGNT", u32 version, u32 entry count, then per entry
// u16 name length, name bytes, u8 rank, u32 dims, f64 values (little endian).
void save_checkpoint(const std::string& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::string& path);

}  // namespace calseg
