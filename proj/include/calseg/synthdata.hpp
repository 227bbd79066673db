#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calseg/tensor.hpp"

namespace calseg {

enum class SynthKind { Vessels, Blobs };

struct SynthConfig {
    SynthKind kind = SynthKind::Vessels;
    std::size_t height = 64;
    std::size_t width = 64;
    double fg_fraction_target = 0.04;  // must lie in (0, 0.5)
    double ambiguity_width = 1.5;      // Gaussian blur sigma applied to the mask
    double noise_sigma = 0.05;
    double contrast = 1.0;
    std::size_t count = 200;
    std::uint64_t seed = 7;
};

struct Sample {
    Tensor image;      // [H,W] in [0,1]
    Tensor mask;       // [H,W] in {0,1}
    std::string meta;  // generator parameters actually used
    std::size_t shapes = 0;  // strokes / ellipses stamped into the mask
};

// Deterministic: sample i draws from a stream seeded by mix(seed, i), so any
// index subset regenerates identical samples.
std::vector<Sample> generate(const SynthConfig& cfg);

double foreground_fraction(const Tensor& mask);

// Separable Gaussian blur with zero padding; sigma == 0 is the identity.
Tensor gaussian_blur(const Tensor& image, double sigma);

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// Seeded shuffle of [0,n) then contiguous partition by the given fractions.
SplitIndices split(std::size_t n, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed);

// 8-bit binary PGM (P5). Values are scaled [0,1] <-> [0,255] with rounding,
// so {0,1} masks round-trip exactly through {0,255}.
void write_pgm(const std::string& path, const Tensor& image);
Tensor read_pgm(const std::string& path);

// Grayscale PFM ("Pf", scale -1.0 = little endian, rows bottom-to-top,
// 32-bit floats). Round-trips bit-exactly for f32-representable values.
void write_pfm(const std::string& path, const Tensor& image);
Tensor read_pfm(const std::string& path);

// Dataset directory layout: <root>/images/NNNN.pgm, <root>/masks/NNNN.pgm and
// manifest.txt with one line per sample: index, split name, fg fraction.
void write_dataset(const std::string& root, const std::vector<Sample>& samples,
                   const SplitIndices& split);

struct Dataset {
    std::vector<Sample> samples;
    SplitIndices split;
};

Dataset load_dataset(const std::string& root);

}  // namespace calseg
