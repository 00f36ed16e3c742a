#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <geoseg/logits.hpp>

#include "helpers.hpp"

using namespace geoseg;
using namespace geoseg::predict;

namespace {

LogitTile random_tile(std::int64_t index, std::int64_t h, std::int64_t w, int classes,
                      std::uint64_t seed) {
    LogitTile t;
    t.index = index;
    t.h = h;
    t.w = w;
    t.classes = classes;
    t.data.resize(static_cast<std::size_t>(h) * w * classes);
    std::mt19937_64 rng(mix64(seed));
    for (auto &v : t.data) {
        v = static_cast<float>(rng() >> 40) / 16777216.0f;
    }
    return t;
}

} // namespace

TEST_CASE("logit tiles round-trip bitwise through the container") {
    testutil::TempDir tmp;
    const LogitTile t = random_tile(7, 512, 512, 3, 99);
    write_logit_tile(tmp.path(), t);
    const LogitTile back = load_logits(tmp.path(), 7);
    CHECK(back.h == 512);
    CHECK(back.w == 512);
    CHECK(back.classes == 3);
    CHECK(std::memcmp(back.data.data(), t.data.data(), t.data.size() * 4) == 0);
}

TEST_CASE("encode/decode identity holds across shapes") {
    std::mt19937_64 rng(5);
    for (int iter = 0; iter < 20; ++iter) {
        const std::int64_t h = 1 + static_cast<std::int64_t>(rng() % 40);
        const std::int64_t w = 1 + static_cast<std::int64_t>(rng() % 40);
        const int c = 2 + static_cast<int>(rng() % 6);
        const LogitTile t = random_tile(0, h, w, c, rng());
        const LogitTile back = decode_logits(encode_logits(t), 0, "mem");
        CHECK(back.h == h);
        CHECK(back.w == w);
        CHECK(back.classes == c);
        CHECK(std::memcmp(back.data.data(), t.data.data(), t.data.size() * 4) == 0);
    }
}

TEST_CASE("truncated and corrupt logit files are rejected") {
    testutil::TempDir tmp;
    const LogitTile t = random_tile(3, 16, 16, 2, 1);
    auto bytes = encode_logits(t);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 5);
    write_file_atomic(logit_path(tmp.path(), 3), truncated);
    CHECK_THROWS_AS(load_logits(tmp.path(), 3), FormatError);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    write_file_atomic(logit_path(tmp.path(), 4), bad_magic);
    CHECK_THROWS_AS(load_logits(tmp.path(), 4), FormatError);

    CHECK_THROWS_AS(load_logits(tmp.path(), 5), IoError); // missing file
}

TEST_CASE("directory source cross-checks the class count against grid.json") {
    testutil::TempDir tmp;
    write_logit_tile(tmp.path(), random_tile(0, 8, 8, 3, 2));
    const DirectorySource wrong(tmp.path(), 2, 8, 8); // grid says 2 classes
    CHECK_THROWS_WITH(wrong.get(0), Catch::Matchers::ContainsSubstring("grid.json"));

    const DirectorySource right(tmp.path(), 3, 8, 8);
    CHECK(right.get(0).classes == 3);
    CHECK(right.has(0));
    CHECK_FALSE(right.has(1));

    const DirectorySource badshape(tmp.path(), 3, 16, 16);
    CHECK_THROWS_AS(badshape.get(0), FormatError);
}

namespace {

std::shared_ptr<OracleSource> oracle_over(std::shared_ptr<MemoryRaster> labels, double p,
                                          std::uint64_t seed) {
    const auto grid = tiling::plan_grid(labels->width(), labels->height(), labels->width(),
                                        labels->height(), 1.0);
    return OracleSource::from_raster(labels, grid, 3, p, seed);
}

} // namespace

TEST_CASE("noise-free oracle reproduces the labels as argmax") {
    auto labels = testutil::random_labels(64, 64, 3, 8);
    const auto src = oracle_over(labels, 0.0, 1);
    const LogitTile t = src->get(0);
    for (std::int64_t y = 0; y < 64; ++y) {
        for (std::int64_t x = 0; x < 64; ++x) {
            REQUIRE(t.argmax(y, x) ==
                    labels->read_window({x, y, 1, 1}).u8(0, 0));
        }
    }
}

TEST_CASE("full-noise oracle disagrees everywhere") {
    auto labels = testutil::random_labels(64, 64, 3, 9);
    const auto src = oracle_over(labels, 1.0, 1);
    const LogitTile t = src->get(0);
    const PixelBuffer lab = labels->read_window({0, 0, 64, 64});
    for (std::int64_t y = 0; y < 64; ++y) {
        for (std::int64_t x = 0; x < 64; ++x) {
            REQUIRE(t.argmax(y, x) != lab.u8(x, y));
        }
    }
}

TEST_CASE("noisy oracle flips close to the requested fraction") {
    auto labels = testutil::random_labels(512, 512, 3, 10);
    const auto src = oracle_over(labels, 0.1, 77);
    const LogitTile t = src->get(0);
    const PixelBuffer lab = labels->read_window({0, 0, 512, 512});
    std::int64_t flips = 0;
    for (std::int64_t y = 0; y < 512; ++y) {
        for (std::int64_t x = 0; x < 512; ++x) {
            flips += t.argmax(y, x) != lab.u8(x, y);
        }
    }
    const double fraction = static_cast<double>(flips) / (512.0 * 512.0);
    CHECK(fraction == Catch::Approx(0.1).margin(0.01));
}

TEST_CASE("oracle output is deterministic in labels, rate and seed") {
    auto labels = testutil::random_labels(128, 128, 3, 11);
    const auto a = oracle_over(labels, 0.3, 123)->get(0);
    const auto b = oracle_over(labels, 0.3, 123)->get(0);
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * 4) == 0);

    const auto c = oracle_over(labels, 0.3, 124)->get(0);
    CHECK(std::memcmp(a.data.data(), c.data.data(), a.data.size() * 4) != 0);
}

TEST_CASE("missing_tiles reports every unanswerable index") {
    testutil::TempDir tmp;
    write_logit_tile(tmp.path(), random_tile(0, 8, 8, 3, 2));
    write_logit_tile(tmp.path(), random_tile(2, 8, 8, 3, 2));
    const DirectorySource src(tmp.path(), 3, 8, 8);
    CHECK(missing_tiles(src, 4) == std::vector<std::int64_t>{1, 3});
}
