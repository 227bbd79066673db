#include "calseg/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace calseg {

namespace {

std::uint8_t lerp8(double a, double b, double t) {
    return static_cast<std::uint8_t>(std::lround(a + (b - a) * t));
}

std::array<Rgb, 256> build_colormap() {
    // anchors at t = 0, 1/3, 2/3, 1: blue, cyan, yellow, red
    std::array<Rgb, 256> map{};
    for (std::size_t i = 0; i < 256; ++i) {
        const double t = static_cast<double>(i) / 255.0;
        Rgb c;
        if (t < 1.0 / 3.0) {
            const double u = t * 3.0;
            c = {0, lerp8(0, 255, u), 255};
        } else if (t < 2.0 / 3.0) {
            const double u = (t - 1.0 / 3.0) * 3.0;
            c = {lerp8(0, 255, u), 255, lerp8(255, 0, u)};
        } else {
            const double u = (t - 2.0 / 3.0) * 3.0;
            c = {255, lerp8(255, 0, u), 0};
        }
        map[i] = c;
    }
    return map;
}

}  // namespace

const std::array<Rgb, 256>& heat_colormap() {
    static const std::array<Rgb, 256> map = build_colormap();
    return map;
}

Rgb heat_color(double value) {
    const double v = std::clamp(value, 0.0, 1.0);
    return heat_colormap()[static_cast<std::size_t>(std::lround(v * 255.0))];
}

void write_ppm(const std::string& path, std::size_t height, std::size_t width,
               const std::vector<Rgb>& pixels) {
    if (pixels.size() != height * width)
        throw std::invalid_argument("write_ppm: pixel count does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> bytes;
    bytes.reserve(pixels.size() * 3);
    for (const Rgb& p : pixels) {
        bytes.push_back(p.r);
        bytes.push_back(p.g);
        bytes.push_back(p.b);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write_ppm: short write to " + path);
}

std::vector<Rgb> heatmap_pixels(const Tensor& map) {
    if (map.rank() != 2) throw std::invalid_argument("heatmap_pixels: map must be [H,W]");
    std::vector<Rgb> pixels(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) pixels[i] = heat_color(map[i]);
    return pixels;
}

std::vector<Rgb> overlay_pixels(const PredictionMap& map, double threshold) {
    constexpr Rgb kTp{255, 255, 255}, kTn{0, 0, 0}, kFp{255, 0, 255}, kFn{0, 255, 0};
    std::vector<Rgb> pixels(map.fg_prob.size());
    for (std::size_t i = 0; i < map.fg_prob.size(); ++i) {
        const bool pred = map.fg_prob[i] >= threshold;
        const bool truth = map.truth[i] == 1.0;
        pixels[i] = pred ? (truth ? kTp : kFp) : (truth ? kFn : kTn);
    }
    return pixels;
}

}  // namespace calseg
