#include "calseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "calseg/rng.hpp"

namespace calseg {

namespace {

void check_config(const SynthConfig& cfg) {
    if (cfg.height < 8 || cfg.width < 8)
        throw std::invalid_argument("synth: height and width must be >= 8");
    if (!(cfg.fg_fraction_target > 0.0 && cfg.fg_fraction_target < 0.5))
        throw std::invalid_argument("synth: fg_fraction_target must lie in (0, 0.5)");
    if (cfg.ambiguity_width < 0.0 || cfg.noise_sigma < 0.0)
        throw std::invalid_argument("synth: ambiguity_width and noise_sigma must be >= 0");
    if (!(cfg.contrast > 0.0 && cfg.contrast <= 1.0))
        throw std::invalid_argument("synth: contrast must lie in (0, 1]");
    if (cfg.count == 0) throw std::invalid_argument("synth: count must be >= 1");
}

std::size_t popcount_mask(const Tensor& mask) {
    std::size_t n = 0;
    for (double v : mask.data) n += v == 1.0 ? 1 : 0;
    return n;
}

// Stamp a disk of the given radius; radius 0.5 marks the single pixel.
void stamp_disk(Tensor& mask, double cy, double cx, double radius) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(mask.shape[0]);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(mask.shape[1]);
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(std::ceil(radius));
    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(std::floor(cy));
    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(std::floor(cx));
    for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, iy - r);
         y <= std::min(H - 1, iy + r); ++y)
        for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, ix - r);
             x <= std::min(W - 1, ix + r); ++x) {
            const double dy = static_cast<double>(y) + 0.5 - cy;
            const double dx = static_cast<double>(x) + 0.5 - cx;
            if (dy * dy + dx * dx <= radius * radius)
                mask.at2(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 1.0;
        }
}

// Random-walk polyline of the given pixel budget and stroke width (1-2 px).
void stamp_stroke(Tensor& mask, Rng& rng, std::size_t budget, double width) {
    const double H = static_cast<double>(mask.shape[0]);
    const double W = static_cast<double>(mask.shape[1]);
    double y = rng.uniform(0.1 * H, 0.9 * H);
    double x = rng.uniform(0.1 * W, 0.9 * W);
    double angle = rng.uniform(0.0, 2.0 * M_PI);
    const std::size_t steps = std::max<std::size_t>(4, budget / std::max(1.0, width));
    for (std::size_t s = 0; s < steps; ++s) {
        stamp_disk(mask, y, x, width * 0.5 + 0.25);
        angle += rng.normal(0.0, 0.35);
        y += std::sin(angle);
        x += std::cos(angle);
        if (y < 1.0 || y >= H - 1.0 || x < 1.0 || x >= W - 1.0) break;
    }
}

void stamp_ellipse(Tensor& mask, Rng& rng) {
    const double H = static_cast<double>(mask.shape[0]);
    const double W = static_cast<double>(mask.shape[1]);
    const double ry = rng.uniform(2.0, 6.0);
    const double rx = rng.uniform(2.0, 6.0);
    const double cy = rng.uniform(ry, H - ry);
    const double cx = rng.uniform(rx, W - rx);
    const std::ptrdiff_t sH = static_cast<std::ptrdiff_t>(H);
    const std::ptrdiff_t sW = static_cast<std::ptrdiff_t>(W);
    for (std::ptrdiff_t y = 0; y < sH; ++y)
        for (std::ptrdiff_t x = 0; x < sW; ++x) {
            const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
            const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
            if (dy * dy + dx * dx <= 1.0)
                mask.at2(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 1.0;
        }
}

// Build a mask whose foreground fraction lands within the +-50% relative band
// around the target. Shapes are added until the band is reached; an overshoot
// is rolled back and retried with a smaller shape.
Tensor make_mask(const SynthConfig& cfg, Rng& rng, std::size_t& shapes) {
    const double target = cfg.fg_fraction_target;
    const double area = static_cast<double>(cfg.height * cfg.width);
    Tensor mask({cfg.height, cfg.width}, 0.0);
    shapes = 0;
    for (int attempt = 0; attempt < 256; ++attempt) {
        const double frac = static_cast<double>(popcount_mask(mask)) / area;
        if (frac >= 0.8 * target && frac <= 1.4 * target) break;
        if (frac > 1.4 * target) break;  // accepted below if within the +-50% band
        Tensor candidate = mask;
        if (cfg.kind == SynthKind::Vessels) {
            const double deficit = (target - frac) * area;
            const double width = rng.uniform() < 0.5 ? 1.0 : 2.0;
            const std::size_t budget =
                std::max<std::size_t>(6, static_cast<std::size_t>(deficit * 0.9));
            stamp_stroke(candidate, rng, budget, width);
        } else {
            stamp_ellipse(candidate, rng);
        }
        const double cand_frac = static_cast<double>(popcount_mask(candidate)) / area;
        if (cand_frac <= 1.4 * target) {
            mask = std::move(candidate);
            ++shapes;
        } else if (frac >= 0.5 * target) {
            break;  // current mask already inside the band
        }
        // else: rolled back, retry with a new shape draw
    }
    const double frac = static_cast<double>(popcount_mask(mask)) / area;
    if (frac < 0.5 * target || frac > 1.5 * target)
        throw std::runtime_error("synth: could not reach foreground fraction " +
                                 std::to_string(target) + " (got " + std::to_string(frac) + ")");
    return mask;
}

}  // namespace

double foreground_fraction(const Tensor& mask) {
    return static_cast<double>(popcount_mask(mask)) / static_cast<double>(mask.size());
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
    if (image.rank() != 2) throw std::invalid_argument("gaussian_blur: image must be [H,W]");
    if (sigma == 0.0) return image;
    const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(image.shape[0]);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(image.shape[1]);
    Tensor tmp(image.shape, 0.0), out(image.shape, 0.0);
    for (std::ptrdiff_t y = 0; y < H; ++y)
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                const std::ptrdiff_t xx = x + i;
                if (xx >= 0 && xx < W)
                    acc += kernel[i + radius] *
                           image.at2(static_cast<std::size_t>(y), static_cast<std::size_t>(xx));
            }
            tmp.at2(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
        }
    for (std::ptrdiff_t y = 0; y < H; ++y)
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                const std::ptrdiff_t yy = y + i;
                if (yy >= 0 && yy < H)
                    acc += kernel[i + radius] *
                           tmp.at2(static_cast<std::size_t>(yy), static_cast<std::size_t>(x));
            }
            out.at2(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
        }
    return out;
}

std::vector<Sample> generate(const SynthConfig& cfg) {
    check_config(cfg);
    std::vector<Sample> samples;
    samples.reserve(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i) {
        Rng rng(mix_seed(cfg.seed, i));
        Sample s;
        s.mask = make_mask(cfg, rng, s.shapes);
        Tensor image = gaussian_blur(s.mask, cfg.ambiguity_width);
        for (std::size_t j = 0; j < image.size(); ++j) {
            double v = cfg.contrast * image[j];
            if (cfg.noise_sigma > 0.0) v += rng.normal(0.0, cfg.noise_sigma);
            image[j] = std::clamp(v, 0.0, 1.0);
        }
        s.image = std::move(image);
        std::ostringstream meta;
        meta << "index=" << i << " kind=" << (cfg.kind == SynthKind::Vessels ? "vessels" : "blobs")
             << " shapes=" << s.shapes << " fg=" << foreground_fraction(s.mask);
        s.meta = meta.str();
        samples.push_back(std::move(s));
    }
    return samples;
}

SplitIndices split(std::size_t n, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed) {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    const std::size_t n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const std::size_t n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw std::invalid_argument("split: every part must receive at least one sample");
    SplitIndices out;
    out.train.assign(idx.begin(), idx.begin() + n_train);
    out.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    out.test.assign(idx.begin() + n_train + n_val, idx.end());
    return out;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments; throws
// with the byte offset on malformed input.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    for (;;) {
        const int c = in.peek();
        if (c == EOF)
            throw std::runtime_error(path + ": truncated header at byte offset " +
                                     std::to_string(in.tellg() == -1 ? 0 : (long)in.tellg()));
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        break;
    }
    in >> tok;
    return tok;
}

std::size_t parse_dim(const std::string& tok, std::istream& in, const std::string& path) {
    try {
        const long v = std::stol(tok);
        if (v <= 0) throw std::invalid_argument("non-positive");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": bad header token '" + tok + "' at byte offset " +
                                 std::to_string((long)in.tellg()));
    }
}

}  // namespace

void write_pgm(const std::string& path, const Tensor& image) {
    if (image.rank() != 2) throw std::invalid_argument("write_pgm: image must be [H,W]");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << image.shape[1] << " " << image.shape[0] << "\n255\n";
    std::vector<unsigned char> bytes(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = std::clamp(image[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write_pgm: short write to " + path);
}

Tensor read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    const std::string magic = next_token(in, path);
    if (magic != "P5")
        throw std::runtime_error(path + ": expected P5 magic at byte offset 0, got '" + magic + "'");
    const std::size_t w = parse_dim(next_token(in, path), in, path);
    const std::size_t h = parse_dim(next_token(in, path), in, path);
    const std::size_t maxval = parse_dim(next_token(in, path), in, path);
    if (maxval != 255)
        throw std::runtime_error(path + ": only maxval 255 supported, got " +
                                 std::to_string(maxval));
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> bytes(w * h);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw std::runtime_error(path + ": truncated pixel data at byte offset " +
                                 std::to_string((long)in.tellg()));
    Tensor image({h, w});
    for (std::size_t i = 0; i < bytes.size(); ++i)
        image[i] = static_cast<double>(bytes[i]) / 255.0;
    return image;
}

void write_pfm(const std::string& path, const Tensor& image) {
    if (image.rank() != 2) throw std::invalid_argument("write_pfm: image must be [H,W]");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pfm: cannot open " + path);
    out << "Pf\n" << image.shape[1] << " " << image.shape[0] << "\n-1.0\n";
    const std::size_t H = image.shape[0], W = image.shape[1];
    std::vector<unsigned char> row(W * 4);
    for (std::size_t yy = 0; yy < H; ++yy) {
        const std::size_t y = H - 1 - yy;  // bottom-to-top scanlines
        for (std::size_t x = 0; x < W; ++x) {
            const float f = static_cast<float>(image.at2(y, x));
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            row[4 * x + 0] = static_cast<unsigned char>(bits & 0xFF);
            row[4 * x + 1] = static_cast<unsigned char>((bits >> 8) & 0xFF);
            row[4 * x + 2] = static_cast<unsigned char>((bits >> 16) & 0xFF);
            row[4 * x + 3] = static_cast<unsigned char>((bits >> 24) & 0xFF);
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write_pfm: short write to " + path);
}

Tensor read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pfm: cannot open " + path);
    const std::string magic = next_token(in, path);
    if (magic != "Pf")
        throw std::runtime_error(path + ": expected Pf magic at byte offset 0, got '" + magic + "'");
    const std::size_t w = parse_dim(next_token(in, path), in, path);
    const std::size_t h = parse_dim(next_token(in, path), in, path);
    const std::string scale_tok = next_token(in, path);
    double scale;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": bad scale token '" + scale_tok + "' at byte offset " +
                                 std::to_string((long)in.tellg()));
    }
    if (scale >= 0.0)
        throw std::runtime_error(path + ": only little-endian (negative scale) supported");
    in.get();
    Tensor image({h, w});
    std::vector<unsigned char> row(w * 4);
    for (std::size_t yy = 0; yy < h; ++yy) {
        const std::size_t y = h - 1 - yy;
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (static_cast<std::size_t>(in.gcount()) != row.size())
            throw std::runtime_error(path + ": truncated pixel data at byte offset " +
                                     std::to_string((long)in.tellg()));
        for (std::size_t x = 0; x < w; ++x) {
            const std::uint32_t bits = static_cast<std::uint32_t>(row[4 * x]) |
                                       (static_cast<std::uint32_t>(row[4 * x + 1]) << 8) |
                                       (static_cast<std::uint32_t>(row[4 * x + 2]) << 16) |
                                       (static_cast<std::uint32_t>(row[4 * x + 3]) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            image.at2(y, x) = static_cast<double>(f);
        }
    }
    return image;
}

namespace {

std::string sample_name(std::size_t index) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04zu", index);
    return buf;
}

}  // namespace

void write_dataset(const std::string& root, const std::vector<Sample>& samples,
                   const SplitIndices& split) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(root) / "images");
    fs::create_directories(fs::path(root) / "masks");
    std::vector<std::string> split_of(samples.size(), "test");
    for (std::size_t i : split.train) split_of.at(i) = "train";
    for (std::size_t i : split.val) split_of.at(i) = "val";
    for (std::size_t i : split.test) split_of.at(i) = "test";

    std::ofstream manifest(fs::path(root) / "manifest.txt");
    if (!manifest) throw std::runtime_error("write_dataset: cannot open manifest in " + root);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string name = sample_name(i);
        write_pgm((fs::path(root) / "images" / (name + ".pgm")).string(), samples[i].image);
        write_pgm((fs::path(root) / "masks" / (name + ".pgm")).string(), samples[i].mask);
        char frac[32];
        std::snprintf(frac, sizeof(frac), "%.6g", foreground_fraction(samples[i].mask));
        manifest << name << " " << split_of[i] << " " << frac << "\n";
    }
}

Dataset load_dataset(const std::string& root) {
    namespace fs = std::filesystem;
    std::ifstream manifest(fs::path(root) / "manifest.txt");
    if (!manifest) throw std::runtime_error("load_dataset: cannot open manifest in " + root);
    Dataset ds;
    std::string name, split_name;
    double fg;
    while (manifest >> name >> split_name >> fg) {
        const std::size_t index = ds.samples.size();
        Sample s;
        s.image = read_pgm((fs::path(root) / "images" / (name + ".pgm")).string());
        Tensor mask_img = read_pgm((fs::path(root) / "masks" / (name + ".pgm")).string());
        for (double& v : mask_img.data) {
            if (v != 0.0 && v != 1.0)
                throw std::runtime_error("load_dataset: mask " + name + " is not binary");
        }
        s.mask = std::move(mask_img);
        s.meta = "index=" + name + " split=" + split_name + " fg=" + std::to_string(fg);
        if (split_name == "train") ds.split.train.push_back(index);
        else if (split_name == "val") ds.split.val.push_back(index);
        else if (split_name == "test") ds.split.test.push_back(index);
        else throw std::runtime_error("load_dataset: unknown split '" + split_name + "'");
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw std::runtime_error("load_dataset: empty manifest in " + root);
    return ds;
}

}  // namespace calseg
