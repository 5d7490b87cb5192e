#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "ccs/dataset.hpp"
#include "ccs/errors.hpp"
#include "doctest.h"

using namespace ccs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "ccs_dataset_tests";
    fs::create_directories(dir);
    return dir;
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

// Hand-built 2-image 2x2 IDX fixture.
struct Fixture {
    fs::path images, labels;
};

Fixture write_fixture(const std::vector<std::uint8_t>& pixels,
                      const std::vector<std::uint8_t>& labels, std::uint32_t img_magic = 0x803,
                      std::uint32_t lab_magic = 0x801, bool truncate_images = false) {
    Fixture fx;
    fx.images = temp_dir() / "imgs.idx3";
    fx.labels = temp_dir() / "labs.idx1";
    {
        std::ofstream out(fx.images, std::ios::binary);
        write_u32_be(out, img_magic);
        write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
        write_u32_be(out, 2);
        write_u32_be(out, 2);
        const std::size_t n = truncate_images ? pixels.size() - 1 : pixels.size();
        out.write(reinterpret_cast<const char*>(pixels.data()),
                  static_cast<std::streamsize>(n));
    }
    {
        std::ofstream out(fx.labels, std::ios::binary);
        write_u32_be(out, lab_magic);
        write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
        out.write(reinterpret_cast<const char*>(labels.data()),
                  static_cast<std::streamsize>(labels.size()));
    }
    return fx;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("idx fixture parses under the scaling formula") {
    const std::vector<std::uint8_t> pixels = {0, 255, 128, 7, 10, 20, 30, 40};
    const auto fx = write_fixture(pixels, {3, 9});
    const Dataset ds = load_idx(fx.images.string(), fx.labels.string());

    CHECK(ds.size() == 2);
    CHECK(ds.input_dim() == 4);
    CHECK(ds.n_classes == 10);
    CHECK(ds.labels == std::vector<int>{3, 9});
    // scaling endpoints: byte 0 -> -0.5, byte 255 -> +0.5 (exact)
    CHECK(ds.inputs(0, 0) == -0.5);
    CHECK(ds.inputs(1, 0) == 0.5);
    for (int p = 0; p < 4; ++p)
        for (int i = 0; i < 2; ++i)
            CHECK(ds.inputs(p, i) ==
                  doctest::Approx(double(pixels[std::size_t(4 * i + p)]) / 255.0 - 0.5)
                      .epsilon(1e-15));
    // preprocessing range invariant
    CHECK(ds.inputs.minCoeff() >= -0.5);
    CHECK(ds.inputs.maxCoeff() <= 0.5);
}

TEST_CASE("wrong image magic reports the observed value") {
    const auto fx = write_fixture(std::vector<std::uint8_t>(8, 0), {0, 1}, 0x802);
    try {
        load_idx(fx.images.string(), fx.labels.string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("0x00000802") != std::string::npos);
        CHECK(std::string(e.what()).find("0x00000803") != std::string::npos);
    }
}

TEST_CASE("wrong label magic rejected") {
    const auto fx = write_fixture(std::vector<std::uint8_t>(8, 0), {0, 1}, 0x803, 0x7ff);
    CHECK_THROWS_AS(load_idx(fx.images.string(), fx.labels.string()), FormatError);
}

TEST_CASE("truncated image data rejected") {
    const auto fx =
        write_fixture(std::vector<std::uint8_t>(8, 0), {0, 1}, 0x803, 0x801, true);
    CHECK_THROWS_AS(load_idx(fx.images.string(), fx.labels.string()), FormatError);
}

TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(load_idx("/nonexistent/a", "/nonexistent/b"), IoError);
}

TEST_CASE("cache round-trip is bit-identical") {
    Dataset ds;
    ds.inputs = Eigen::MatrixXd::Random(7, 13);
    ds.labels.resize(13);
    for (int i = 0; i < 13; ++i) ds.labels[std::size_t(i)] = i % 4;
    ds.n_classes = 4;

    const auto path = (temp_dir() / "cache.dsb").string();
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);

    REQUIRE(back.size() == ds.size());
    CHECK(back.n_classes == ds.n_classes);
    CHECK(back.labels == ds.labels);
    CHECK(std::memcmp(back.inputs.data(), ds.inputs.data(),
                      sizeof(double) * std::size_t(ds.inputs.size())) == 0);
}

TEST_CASE("subset") {
    Dataset ds;
    const int n = 60;
    ds.inputs = Eigen::MatrixXd::Random(3, n);
    ds.labels.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) ds.labels[std::size_t(i)] = i % 5;
    ds.n_classes = 5;

    SUBCASE("n equal to size gives a permutation") {
        const Dataset s = subset(ds, n, 42);
        REQUIRE(s.size() == n);
        // same multiset of columns: match by the (unique) random values
        std::vector<double> a(ds.inputs.data(), ds.inputs.data() + ds.inputs.size());
        std::vector<double> b(s.inputs.data(), s.inputs.data() + s.inputs.size());
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }

    SUBCASE("stratification floor: one per class at n = n_classes") {
        const Dataset s = subset(ds, 5, 1);
        REQUIRE(s.size() == 5);
        std::set<int> classes(s.labels.begin(), s.labels.end());
        CHECK(classes.size() == 5);
    }

    SUBCASE("proportional allocation at larger n") {
        const Dataset s = subset(ds, 20, 9);
        REQUIRE(s.size() == 20);
        std::vector<int> counts(5, 0);
        for (int lab : s.labels) counts[std::size_t(lab)]++;
        for (int c = 0; c < 5; ++c) CHECK(counts[std::size_t(c)] == 4);  // 60 balanced -> 4 each
    }

    SUBCASE("seeded determinism") {
        const Dataset s1 = subset(ds, 17, 123);
        const Dataset s2 = subset(ds, 17, 123);
        CHECK(s1.labels == s2.labels);
        CHECK(std::memcmp(s1.inputs.data(), s2.inputs.data(),
                          sizeof(double) * std::size_t(s1.inputs.size())) == 0);
    }

    SUBCASE("oversized subset rejected") {
        CHECK_THROWS_AS(subset(ds, n + 1, 0), ArgumentError);
    }
}

}  // TEST_SUITE
