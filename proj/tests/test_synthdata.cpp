#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "calseg/synthdata.hpp"
#include "doctest.h"

using namespace calseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("calseg_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

SynthConfig small_config(SynthKind kind, std::size_t count = 8) {
    SynthConfig cfg;
    cfg.kind = kind;
    cfg.height = 48;
    cfg.width = 48;
    cfg.count = count;
    cfg.seed = 21;
    return cfg;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
    const auto a = generate(small_config(SynthKind::Vessels));
    const auto b = generate(small_config(SynthKind::Vessels));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.data == b[i].image.data);
        CHECK(a[i].mask.data == b[i].mask.data);
    }
    auto cfg = small_config(SynthKind::Vessels);
    cfg.seed = 22;
    const auto c = generate(cfg);
    CHECK(a[0].image.data != c[0].image.data);
}

TEST_CASE("samples draw from per-index streams, so prefixes agree across counts") {
    const auto big = generate(small_config(SynthKind::Blobs, 8));
    const auto small = generate(small_config(SynthKind::Blobs, 3));
    for (std::size_t i = 0; i < small.size(); ++i) {
        CHECK(big[i].image.data == small[i].image.data);
        CHECK(big[i].mask.data == small[i].mask.data);
    }
}

TEST_CASE("masks are binary, images lie in [0,1], and foreground stays in band") {
    for (const SynthKind kind : {SynthKind::Vessels, SynthKind::Blobs}) {
        auto cfg = small_config(kind, 24);
        cfg.height = 64;
        cfg.width = 64;
        cfg.fg_fraction_target = 0.04;
        const auto samples = generate(cfg);
        REQUIRE(samples.size() == 24);
        for (const Sample& s : samples) {
            REQUIRE(s.mask.shape == std::vector<std::size_t>{64, 64});
            REQUIRE(s.image.shape == std::vector<std::size_t>{64, 64});
            for (double v : s.mask.data) CHECK((v == 0.0 || v == 1.0));
            for (double v : s.image.data) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
            const double f = foreground_fraction(s.mask);
            CHECK(f >= 0.5 * cfg.fg_fraction_target);
            CHECK(f <= 1.5 * cfg.fg_fraction_target);
            CHECK(s.shapes >= 1);
        }
    }
}

TEST_CASE("the two families produce different structures") {
    const auto vessels = generate(small_config(SynthKind::Vessels, 2));
    const auto blobs = generate(small_config(SynthKind::Blobs, 2));
    CHECK(vessels[0].mask.data != blobs[0].mask.data);
}

TEST_CASE("foreground_fraction counts mask pixels") {
    Tensor m({2, 2}, {1.0, 0.0, 0.0, 1.0});
    CHECK(foreground_fraction(m) == 0.5);
}

TEST_CASE("gaussian blur: sigma zero is the identity") {
    Tensor img({4, 4});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i) / 16.0;
    const Tensor out = gaussian_blur(img, 0.0);
    CHECK(out.data == img.data);
}

TEST_CASE("gaussian blur: normalized kernel preserves interior mass") {
    Tensor delta({21, 21}, 0.0);
    delta.at2(10, 10) = 1.0;
    const Tensor out = gaussian_blur(delta, 1.5);
    const double total = std::accumulate(out.data.begin(), out.data.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    // symmetric around the impulse
    CHECK(out.at2(10, 8) == doctest::Approx(out.at2(10, 12)).epsilon(1e-12));
    CHECK(out.at2(8, 10) == doctest::Approx(out.at2(12, 10)).epsilon(1e-12));
    CHECK(out.at2(9, 10) == doctest::Approx(out.at2(10, 9)).epsilon(1e-12));
    // mass decays away from the center
    CHECK(out.at2(10, 10) > out.at2(10, 9));
    CHECK(out.at2(10, 9) > out.at2(10, 8));
}

TEST_CASE("gaussian blur: zero padding lets edge mass leak out") {
    Tensor delta({9, 9}, 0.0);
    delta.at2(0, 0) = 1.0;
    const Tensor out = gaussian_blur(delta, 2.0);
    const double total = std::accumulate(out.data.begin(), out.data.end(), 0.0);
    CHECK(total < 1.0);
}

TEST_CASE("split partitions indices with rounded sizes") {
    const SplitIndices s = split(200, 0.64, 0.16, 0.2, 17);
    CHECK(s.train.size() == 128);
    CHECK(s.val.size() == 32);
    CHECK(s.test.size() == 40);

    std::set<std::size_t> all;
    for (auto v : {&s.train, &s.val, &s.test})
        for (std::size_t i : *v) CHECK(all.insert(i).second);  // no duplicates
    CHECK(all.size() == 200);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 199);

    // deterministic, and seed-dependent
    const SplitIndices t = split(200, 0.64, 0.16, 0.2, 17);
    CHECK(t.train == s.train);
    const SplitIndices u = split(200, 0.64, 0.16, 0.2, 18);
    CHECK(u.train != s.train);
}

TEST_CASE("split validates fractions") {
    CHECK_THROWS_AS((void)split(10, 0.5, 0.2, 0.2, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)split(2, 0.9, 0.05, 0.05, 1), std::invalid_argument);
}

TEST_CASE("pgm round-trips masks exactly and grays to 8-bit precision") {
    TempDir tmp;
    Tensor mask({3, 4}, 0.0);
    mask.at2(0, 0) = 1.0;
    mask.at2(2, 3) = 1.0;
    write_pgm(tmp.file("mask.pgm"), mask);
    const Tensor back = read_pgm(tmp.file("mask.pgm"));
    CHECK(back.shape == mask.shape);
    CHECK(back.data == mask.data);

    Tensor gray({2, 2}, {0.0, 0.25, 0.5, 1.0});
    write_pgm(tmp.file("gray.pgm"), gray);
    const Tensor gback = read_pgm(tmp.file("gray.pgm"));
    for (std::size_t i = 0; i < gray.size(); ++i)
        CHECK(std::abs(gback[i] - gray[i]) <= 0.5 / 255.0 + 1e-12);
    // writing the quantized values again is a fixed point
    write_pgm(tmp.file("gray2.pgm"), gback);
    CHECK(read_pgm(tmp.file("gray2.pgm")).data == gback.data);
}

TEST_CASE("pgm reader accepts comments and rejects malformed headers") {
    TempDir tmp;
    {
        std::ofstream out(tmp.file("ok.pgm"), std::ios::binary);
        out << "P5\n# a comment\n2 1\n255\n";
        out.put(static_cast<char>(0));
        out.put(static_cast<char>(255));
    }
    const Tensor t = read_pgm(tmp.file("ok.pgm"));
    CHECK(t.shape == std::vector<std::size_t>{1, 2});
    CHECK(t[0] == 0.0);
    CHECK(t[1] == 1.0);

    {
        std::ofstream out(tmp.file("badmagic.pgm"), std::ios::binary);
        out << "P6\n2 1\n255\n??";
    }
    CHECK_THROWS_AS((void)read_pgm(tmp.file("badmagic.pgm")), std::runtime_error);

    {
        std::ofstream out(tmp.file("short.pgm"), std::ios::binary);
        out << "P5\n4 4\n255\nxy";  // promises 16 bytes, delivers 2
    }
    CHECK_THROWS_AS((void)read_pgm(tmp.file("short.pgm")), std::runtime_error);

    CHECK_THROWS_AS((void)read_pgm(tmp.file("missing.pgm")), std::runtime_error);
}

TEST_CASE("pfm round-trips float-representable values bit-exactly") {
    TempDir tmp;
    Tensor img({5, 7});
    std::uint32_t state = 12345;
    for (double& v : img.data) {
        state = state * 1664525u + 1013904223u;
        // arbitrary but f32-representable values, including negatives
        v = static_cast<double>(static_cast<float>((state % 2000000) / 1000.0 - 1000.0));
    }
    write_pfm(tmp.file("img.pfm"), img);
    const Tensor back = read_pfm(tmp.file("img.pfm"));
    REQUIRE(back.shape == img.shape);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const float a = static_cast<float>(img[i]);
        const float b = static_cast<float>(back[i]);
        CHECK(std::memcmp(&a, &b, 4) == 0);
    }
}

TEST_CASE("pfm scanlines are stored bottom to top, little endian") {
    TempDir tmp;
    const Tensor img({2, 3}, {1, 2, 3, 4, 5, 6});
    write_pfm(tmp.file("order.pfm"), img);

    std::ifstream in(tmp.file("order.pfm"), std::ios::binary);
    std::string magic, dims, scale;
    std::getline(in, magic);
    std::getline(in, dims);
    std::getline(in, scale);
    CHECK(magic == "Pf");
    CHECK(dims == "3 2");
    CHECK(std::stod(scale) < 0.0);  // negative scale = little endian
    float first = 0.0f;
    char bytes[4];
    in.read(bytes, 4);
    std::memcpy(&first, bytes, 4);
    CHECK(first == 4.0f);  // the bottom row (4,5,6) is written first
}

TEST_CASE("pfm reader rejects malformed files") {
    TempDir tmp;
    {
        std::ofstream out(tmp.file("bad.pfm"), std::ios::binary);
        out << "PF\n2 2\n-1.0\n";  // color magic, not grayscale
    }
    CHECK_THROWS_AS((void)read_pfm(tmp.file("bad.pfm")), std::runtime_error);
    {
        std::ofstream out(tmp.file("short.pfm"), std::ios::binary);
        out << "Pf\n2 2\n-1.0\nxxxx";  // promises 16 bytes of pixels
    }
    CHECK_THROWS_AS((void)read_pfm(tmp.file("short.pfm")), std::runtime_error);
}

TEST_CASE("dataset directory round-trip preserves masks, split, and quantized images") {
    TempDir tmp;
    auto cfg = small_config(SynthKind::Vessels, 10);
    const auto samples = generate(cfg);
    const SplitIndices parts = split(samples.size(), 0.6, 0.2, 0.2, 3);
    write_dataset(tmp.path.string(), samples, parts);

    const Dataset ds = load_dataset(tmp.path.string());
    REQUIRE(ds.samples.size() == samples.size());
    // The manifest records membership per sample index, so splits come back
    // in index order regardless of the shuffle that produced them.
    auto sorted = [](std::vector<std::size_t> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(ds.split.train == sorted(parts.train));
    CHECK(ds.split.val == sorted(parts.val));
    CHECK(ds.split.test == sorted(parts.test));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(ds.samples[i].mask.data == samples[i].mask.data);
        for (std::size_t j = 0; j < samples[i].image.size(); ++j)
            CHECK(std::abs(ds.samples[i].image[j] - samples[i].image[j]) <=
                  0.5 / 255.0 + 1e-12);
    }
}

TEST_CASE("load_dataset requires a manifest") {
    TempDir tmp;
    CHECK_THROWS_AS((void)load_dataset(tmp.path.string()), std::runtime_error);
}

TEST_CASE("generator configuration is validated") {
    auto cfg = small_config(SynthKind::Vessels);
    cfg.fg_fraction_target = 0.9;
    CHECK_THROWS_AS((void)generate(cfg), std::invalid_argument);
    cfg = small_config(SynthKind::Vessels);
    cfg.height = 4;
    CHECK_THROWS_AS((void)generate(cfg), std::invalid_argument);
    cfg = small_config(SynthKind::Vessels);
    cfg.contrast = 0.0;
    CHECK_THROWS_AS((void)generate(cfg), std::invalid_argument);
    cfg = small_config(SynthKind::Vessels);
    cfg.count = 0;
    CHECK_THROWS_AS((void)generate(cfg), std::invalid_argument);
}
