#include "calseg/segnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "calseg/rng.hpp"

namespace calseg {

Tensor& ParameterSet::at(const std::string& name) {
    for (auto& [n, t] : items)
        if (n == name) return t;
    throw std::out_of_range("ParameterSet: no parameter named " + name);
}

const Tensor& ParameterSet::at(const std::string& name) const {
    for (const auto& [n, t] : items)
        if (n == name) return t;
    throw std::out_of_range("ParameterSet: no parameter named " + name);
}

bool ParameterSet::has(const std::string& name) const {
    for (const auto& [n, t] : items)
        if (n == name) return true;
    return false;
}

std::size_t ParameterSet::total_values() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items) n += t.size();
    return n;
}

namespace {

struct LayerSpec {
    std::string name;
    std::vector<std::size_t> shape;
    enum Kind { ConvWeight, ConvBias, NormGain, NormBias } kind;
};

// Fixed architecture order; also defines checkpoint order.
std::vector<LayerSpec> layer_specs(const NetConfig& cfg) {
    std::vector<LayerSpec> specs;
    const std::size_t k = cfg.kernel;
    auto block = [&](const std::string& prefix, std::size_t cin, std::size_t cout) {
        specs.push_back({prefix + ".conv1.weight", {cout, cin, k, k}, LayerSpec::ConvWeight});
        specs.push_back({prefix + ".conv1.bias", {cout}, LayerSpec::ConvBias});
        specs.push_back({prefix + ".norm1.gain", {cout}, LayerSpec::NormGain});
        specs.push_back({prefix + ".norm1.bias", {cout}, LayerSpec::NormBias});
        specs.push_back({prefix + ".conv2.weight", {cout, cout, k, k}, LayerSpec::ConvWeight});
        specs.push_back({prefix + ".conv2.bias", {cout}, LayerSpec::ConvBias});
        specs.push_back({prefix + ".norm2.gain", {cout}, LayerSpec::NormGain});
        specs.push_back({prefix + ".norm2.bias", {cout}, LayerSpec::NormBias});
    };
    std::size_t cin = cfg.input_channels;
    for (std::size_t l = 0; l < cfg.depth; ++l) {
        const std::size_t cout = cfg.base_channels << l;
        block("enc" + std::to_string(l), cin, cout);
        cin = cout;
    }
    const std::size_t bottom = cfg.base_channels << cfg.depth;
    block("bottom", cin, bottom);
    std::size_t above = bottom;
    for (std::size_t l = cfg.depth; l-- > 0;) {
        const std::size_t skip = cfg.base_channels << l;
        block("dec" + std::to_string(l), above + skip, skip);
        above = skip;
    }
    specs.push_back({"head.weight", {2, above, 1, 1}, LayerSpec::ConvWeight});
    specs.push_back({"head.bias", {2}, LayerSpec::ConvBias});
    return specs;
}

void check_net_config(const NetConfig& cfg) {
    if (cfg.depth == 0) throw std::invalid_argument("net: depth must be >= 1");
    if (cfg.base_channels == 0) throw std::invalid_argument("net: base_channels must be >= 1");
    if (cfg.kernel % 2 == 0 || cfg.kernel == 0)
        throw std::invalid_argument("net: kernel must be odd");
    if (cfg.input_channels == 0)
        throw std::invalid_argument("net: input_channels must be >= 1");
}

}  // namespace

SegNet::SegNet(NetConfig cfg) : cfg_(cfg) { check_net_config(cfg_); }

ParameterSet SegNet::init_params() const {
    Rng rng(cfg_.seed);
    ParameterSet params;
    for (const auto& spec : layer_specs(cfg_)) {
        Tensor t(spec.shape, 0.0);
        switch (spec.kind) {
            case LayerSpec::ConvWeight: {
                // Xavier uniform with fan = k*k*channels
                const std::size_t cout = spec.shape[0], cin = spec.shape[1];
                const std::size_t k = spec.shape[2];
                const double fan_in = static_cast<double>(k * k * cin);
                const double fan_out = static_cast<double>(k * k * cout);
                const double bound = std::sqrt(6.0 / (fan_in + fan_out));
                for (double& v : t.data) v = rng.uniform(-bound, bound);
                break;
            }
            case LayerSpec::ConvBias:
            case LayerSpec::NormBias:
                break;  // zeros
            case LayerSpec::NormGain:
                for (double& v : t.data) v = 1.0;
                break;
        }
        params.items.emplace_back(spec.name, std::move(t));
    }
    return params;
}

std::size_t SegNet::param_count() const {
    std::size_t n = 0;
    for (const auto& spec : layer_specs(cfg_)) n += Tensor::count(spec.shape);
    return n;
}

void SegNet::check_params(const ParameterSet& params) const {
    const auto specs = layer_specs(cfg_);
    if (params.items.size() != specs.size())
        throw std::invalid_argument("net: parameter count mismatch: expected " +
                                    std::to_string(specs.size()) + " entries, got " +
                                    std::to_string(params.items.size()));
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (params.items[i].first != specs[i].name)
            throw std::invalid_argument("net: parameter " + std::to_string(i) + " is '" +
                                        params.items[i].first + "', expected '" +
                                        specs[i].name + "'");
        if (params.items[i].second.shape != specs[i].shape)
            throw std::invalid_argument("net: parameter " + specs[i].name + " has shape " +
                                        shape_string(params.items[i].second.shape) +
                                        ", expected " + shape_string(specs[i].shape));
    }
}

ForwardPass SegNet::forward(const ParameterSet& params, const Tensor& image) const {
    check_params(params);
    Tensor input = image;
    if (input.rank() == 2) input.shape = {1, image.shape[0], image.shape[1]};
    if (input.rank() != 3 || input.shape[0] != cfg_.input_channels)
        throw std::invalid_argument("net: image must be [" +
                                    std::to_string(cfg_.input_channels) + ",H,W]");
    const std::size_t div = static_cast<std::size_t>(1) << cfg_.depth;
    if (input.shape[1] % div != 0 || input.shape[2] % div != 0)
        throw std::invalid_argument("net: H and W must be divisible by " + std::to_string(div));

    ForwardPass pass;
    pass.param_leaves.reserve(params.items.size());
    for (const auto& [name, tensor] : params.items)
        pass.param_leaves.emplace_back(name, leaf(tensor));
    auto p = [&](const std::string& name) -> const NodePtr& {
        for (const auto& [n, node] : pass.param_leaves)
            if (n == name) return node;
        throw std::invalid_argument("net: missing parameter leaf " + name);
    };

    auto block = [&](const std::string& prefix, NodePtr x) {
        x = conv2d(x, p(prefix + ".conv1.weight"), p(prefix + ".conv1.bias"));
        x = relu(instance_norm(x, p(prefix + ".norm1.gain"), p(prefix + ".norm1.bias")));
        x = conv2d(x, p(prefix + ".conv2.weight"), p(prefix + ".conv2.bias"));
        x = relu(instance_norm(x, p(prefix + ".norm2.gain"), p(prefix + ".norm2.bias")));
        return x;
    };

    NodePtr x = leaf(std::move(input));
    std::vector<NodePtr> skips;
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
        x = block("enc" + std::to_string(l), x);
        skips.push_back(x);
        x = downsample2(x);
    }
    x = block("bottom", x);
    for (std::size_t l = cfg_.depth; l-- > 0;) {
        x = concat_channels(upsample2(x), skips[l]);
        x = block("dec" + std::to_string(l), x);
    }
    pass.logits = conv2d(x, p("head.weight"), p("head.bias"));
    pass.probs = softmax_channels(pass.logits);
    return pass;
}

namespace {

constexpr char kMagic[4] = {'S', 'G', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::ofstream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ofstream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t get_u16(std::ifstream& in, const std::string& path) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::ifstream& in, const std::string& path) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(params.items.size()));
    for (const auto& [name, tensor] : params.items) {
        if (name.size() > 0xFFFF)
            throw std::invalid_argument("save_checkpoint: parameter name too long");
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        if (tensor.rank() > 0xFF)
            throw std::invalid_argument("save_checkpoint: rank too large");
        const unsigned char rank = static_cast<unsigned char>(tensor.rank());
        out.write(reinterpret_cast<const char*>(&rank), 1);
        for (std::size_t d : tensor.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : tensor.data) put_f64(out, v);
    }
    if (!out) throw std::runtime_error("save_checkpoint: short write to " + path);
}

ParameterSet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": bad checkpoint magic");
    const std::uint32_t version = get_u32(in, path);
    if (version != kVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    const std::uint32_t count = get_u32(in, path);
    ParameterSet params;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint16_t name_len = get_u16(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw std::runtime_error(path + ": truncated checkpoint");
        unsigned char rank;
        in.read(reinterpret_cast<char*>(&rank), 1);
        if (!in) throw std::runtime_error(path + ": truncated checkpoint");
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = get_u32(in, path);
        Tensor t(shape, 0.0);
        for (double& v : t.data) v = get_f64(in, path);
        params.items.emplace_back(std::move(name), std::move(t));
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw std::runtime_error(path + ": trailing bytes after last checkpoint entry");
    return params;
}

}  // namespace calseg
