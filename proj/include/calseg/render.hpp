#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "calseg/metrics.hpp"
#include "calseg/tensor.hpp"

namespace calseg {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

// 256-entry blue -> cyan -> yellow -> red map (piecewise-linear, entries at
// t = i/255; see README for the construction table).
const std::array<Rgb, 256>& heat_colormap();

// value in [0,1] -> colormap entry round(value * 255)
Rgb heat_color(double value);

// Binary PPM (P6), row-major RGB triplets.
void write_ppm(const std::string& path, std::size_t height, std::size_t width,
               const std::vector<Rgb>& pixels);

// Probability map [H,W] (values clamped to [0,1]) rendered through the colormap.
std::vector<Rgb> heatmap_pixels(const Tensor& map);

// Threshold overlay: TP white, TN black, FP magenta, FN green.
std::vector<Rgb> overlay_pixels(const PredictionMap& map, double threshold);

}  // namespace calseg
