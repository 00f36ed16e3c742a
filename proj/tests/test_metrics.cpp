#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <geoseg/metrics.hpp>
#include <geoseg/tiling.hpp>

#include "helpers.hpp"

using namespace geoseg;
using namespace geoseg::metrics;

namespace {

PixelBuffer tile_from(const std::vector<std::uint8_t> &v, std::int64_t w, std::int64_t h) {
    PixelBuffer buf(w, h, 1, SampleType::U8);
    buf.bytes() = v;
    return buf;
}

ConfusionAccumulator random_confusion(std::mt19937_64 &rng, int classes) {
    ConfusionAccumulator acc(classes);
    for (int c = 0; c < classes; ++c) {
        acc.tp[static_cast<std::size_t>(c)] = rng() % 10000;
        acc.fp[static_cast<std::size_t>(c)] = rng() % 10000;
        acc.fn[static_cast<std::size_t>(c)] = rng() % 10000;
    }
    return acc;
}

} // namespace

TEST_CASE("perfect predictions leave no false counts") {
    auto gt = testutil::random_labels(32, 32, 3, 1)->read_window({0, 0, 32, 32});
    ConfusionAccumulator acc(3);
    accumulate(gt, gt, acc);
    for (int c = 0; c < 3; ++c) {
        CHECK(acc.fp[static_cast<std::size_t>(c)] == 0);
        CHECK(acc.fn[static_cast<std::size_t>(c)] == 0);
    }
    const ScoreReport r = finalize(acc);
    CHECK(r.miou == 1.0);
    CHECK(r.mdice == 1.0);
}

TEST_CASE("total disagreement counts FN against truth and FP against prediction") {
    const auto pred = testutil::const_tile(16, 16, 1, 1);
    const auto gt = testutil::const_tile(16, 16, 1, 0);
    ConfusionAccumulator acc(2);
    accumulate(pred, gt, acc);
    CHECK(acc.fn[0] == 256);
    CHECK(acc.fp[1] == 256);
    CHECK(acc.tp[0] == 0);
    CHECK(acc.tp[1] == 0);
}

TEST_CASE("offset 2x2 blocks produce the 1/7 IoU fixture") {
    // pred has class 1 in the 2x2 block at (0,0); gt at (1,1)
    std::vector<std::uint8_t> pred(16, 0), gt(16, 0);
    for (const auto [x, y] : {std::pair{0, 0}, {1, 0}, {0, 1}, {1, 1}}) {
        pred[static_cast<std::size_t>(y * 4 + x)] = 1;
        gt[static_cast<std::size_t>((y + 1) * 4 + (x + 1))] = 1;
    }
    ConfusionAccumulator acc(2);
    accumulate(tile_from(pred, 4, 4), tile_from(gt, 4, 4), acc);
    CHECK(acc.tp[1] == 1);
    CHECK(acc.fp[1] == 3);
    CHECK(acc.fn[1] == 3);

    const ScoreReport r = finalize(acc);
    CHECK(r.classes[1].iou == Catch::Approx(1.0 / 7.0));
    CHECK(r.classes[1].dice == Catch::Approx(0.25));
    // Dice identity at the fixture
    CHECK(r.classes[1].dice ==
          Catch::Approx(2.0 * r.classes[1].iou / (1.0 + r.classes[1].iou)));

    // counts add: a second identical tile leaves the ratio unchanged
    accumulate(tile_from(pred, 4, 4), tile_from(gt, 4, 4), acc);
    const ScoreReport r2 = finalize(acc);
    CHECK(r2.classes[1].iou == Catch::Approx(1.0 / 7.0));
}

TEST_CASE("dice equals 2 IoU over 1 plus IoU across random confusion tables") {
    std::mt19937_64 rng(31);
    for (int iter = 0; iter < 1000; ++iter) {
        const ConfusionAccumulator acc = random_confusion(rng, 4);
        const ScoreReport r = finalize(acc);
        for (const auto &s : r.classes) {
            if (!s.present) {
                continue;
            }
            CHECK(std::abs(s.dice - 2.0 * s.iou / (1.0 + s.iou)) <= 1e-12);
            CHECK(s.iou >= 0.0);
            CHECK(s.iou <= 1.0);
            CHECK(s.dice >= 0.0);
            CHECK(s.dice <= 1.0);
        }
        CHECK(r.miou >= 0.0);
        CHECK(r.miou <= 1.0);
    }
}

TEST_CASE("accumulator addition is commutative and associative") {
    std::mt19937_64 rng(77);
    const auto a = random_confusion(rng, 3);
    const auto b = random_confusion(rng, 3);
    const auto c = random_confusion(rng, 3);

    ConfusionAccumulator ab = a;
    ab += b;
    ConfusionAccumulator ba = b;
    ba += a;
    CHECK(ab.tp == ba.tp);
    CHECK(ab.fp == ba.fp);
    CHECK(ab.fn == ba.fn);

    ConfusionAccumulator ab_c = ab;
    ab_c += c;
    ConfusionAccumulator bc = b;
    bc += c;
    ConfusionAccumulator a_bc = a;
    a_bc += bc;
    CHECK(ab_c.tp == a_bc.tp);

    // score of summed accumulators = score of concatenated data
    const ScoreReport joint = finalize(ab_c);
    CHECK(joint.miou == finalize(a_bc).miou);
}

TEST_CASE("absent classes are excluded from the means") {
    ConfusionAccumulator acc(3);
    acc.tp[0] = 10;
    acc.tp[1] = 5;
    acc.fp[1] = 5; // class 2 never appears
    const ScoreReport r = finalize(acc);
    CHECK_FALSE(r.classes[2].present);
    CHECK(r.miou == Catch::Approx((1.0 + 0.5) / 2.0));
}

TEST_CASE("a class predicted and labelled in disjoint places scores zero IoU") {
    // pred: class 2 at pixel 0; gt: class 2 at pixel 5
    std::vector<std::uint8_t> pred(16, 0), gt(16, 0);
    pred[0] = 2;
    gt[5] = 2;
    ConfusionAccumulator acc(3);
    accumulate(tile_from(pred, 4, 4), tile_from(gt, 4, 4), acc);
    const ScoreReport r = finalize(acc);
    CHECK(r.classes[2].present);
    CHECK(r.classes[2].iou == 0.0);
}

TEST_CASE("the exclusion flag removes a class from the means only") {
    ConfusionAccumulator acc(3);
    acc.tp[0] = 8;
    acc.fp[0] = 2; // IoU 0.8
    acc.tp[1] = 1;
    acc.fn[1] = 9; // IoU 0.1
    acc.tp[2] = 1; // IoU 1.0
    const ScoreReport all = finalize(acc);
    CHECK(all.miou == Catch::Approx((0.8 + 0.1 + 1.0) / 3.0));
    const ScoreReport excl = finalize(acc, ScoreMode::TileSummed, {1});
    CHECK(excl.miou == Catch::Approx((0.8 + 1.0) / 2.0));
    CHECK(excl.classes[1].present); // still reported, just not averaged
    CHECK(excl.classes[1].excluded);
}

namespace {

struct ScoredDataset {
    testutil::TempDir tmp;
    tiling::DatasetLayout ds;
    tiling::GridInfo info;
    std::shared_ptr<MemoryRaster> labels;
    std::vector<std::int64_t> all;

    explicit ScoredDataset(std::int64_t size, int classes, double stride, std::uint64_t seed)
        : tmp("geoseg-metrics"), ds{tmp / "ds"} {
        auto image = testutil::random_image(size, size, 3, seed);
        labels = testutil::random_labels(size, size, classes, seed + 1);
        tiling::TileGrid grid = tiling::plan_grid(size, size, 64, 64, stride);
        const auto res = tiling::split_raster(*image, labels.get(), grid, ds.root);
        info = res.info;
        for (std::int64_t i = 0; i < info.grid.count(); ++i) {
            all.push_back(i);
        }
    }
};

} // namespace

TEST_CASE("tile-summed scoring of a one-hot oracle is perfect") {
    ScoredDataset d(256, 3, 0.5, 404);
    const auto source = predict::OracleSource::from_dataset(d.ds, d.info, 0.0, 1);
    const ScoreReport r = score_tiles(d.all, *source, d.ds, 3);
    CHECK(r.miou == 1.0);
    CHECK(r.mdice == 1.0);
    CHECK(r.mode == ScoreMode::TileSummed);
}

TEST_CASE("tile order never changes a score") {
    ScoredDataset d(256, 3, 0.5, 405);
    const auto source = predict::OracleSource::from_dataset(d.ds, d.info, 0.35, 7);
    const ScoreReport a = score_tiles(d.all, *source, d.ds, 3, {}, 1);
    auto reversed = d.all;
    std::reverse(reversed.begin(), reversed.end());
    const ScoreReport b = score_tiles(reversed, *source, d.ds, 3, {}, 3);
    for (int c = 0; c < 3; ++c) {
        CHECK(a.classes[static_cast<std::size_t>(c)].iou ==
              b.classes[static_cast<std::size_t>(c)].iou);
    }
    CHECK(a.miou == b.miou);
}

TEST_CASE("half-noise on two balanced classes drives IoU to one third") {
    // closed form: with p = 0.5 and two equally frequent classes, each class
    // ends with TP ~ N/4, FP ~ N/4, FN ~ N/4, so IoU -> 1/3.
    testutil::TempDir tmp;
    tiling::DatasetLayout ds{tmp / "ds"};
    const std::int64_t size = 512;
    auto image = testutil::random_image(size, size, 3, 1);

    RasterMeta meta;
    meta.width = size;
    meta.height = size;
    std::vector<std::uint8_t> px(static_cast<std::size_t>(size * size), 0);
    std::fill(px.begin() + px.size() / 2, px.end(), 1); // exact 50/50 split
    auto labels = std::make_shared<MemoryRaster>(meta, std::move(px));

    tiling::TileGrid grid = tiling::plan_grid(size, size, 256, 256, 1.0);
    const auto res = tiling::split_raster(*image, labels.get(), grid, ds.root);

    const auto source = predict::OracleSource::from_dataset(ds, res.info, 0.5, 99);
    const ScoreReport r = score_tiles({0, 1, 2, 3}, *source, ds, 2);
    CHECK(r.classes[0].iou == Catch::Approx(1.0 / 3.0).margin(0.02));
    CHECK(r.classes[1].iou == Catch::Approx(1.0 / 3.0).margin(0.02));
    CHECK(r.miou == Catch::Approx(1.0 / 3.0).margin(0.02));
}

TEST_CASE("merged scoring of a crop-merged one-hot oracle is perfect") {
    ScoredDataset d(256, 3, 0.5, 406);
    const auto source = predict::OracleSource::from_dataset(d.ds, d.info, 0.0, 1);
    const auto map = merge::merge_to_map(merge::Strategy::Crop, d.info.grid, *source);
    const ScoreReport r = score_merged(map.map, *d.labels, 3);
    CHECK(r.miou == 1.0);
    CHECK(r.mode == ScoreMode::Merged);
}

TEST_CASE("merged and tile-summed scores coincide on non-overlapping grids") {
    ScoredDataset d(256, 3, 1.0, 407); // stride 1: tiles partition the extent
    const auto source = predict::OracleSource::from_dataset(d.ds, d.info, 0.4, 3);
    const ScoreReport tiles = score_tiles(d.all, *source, d.ds, 3);
    const auto map = merge::merge_to_map(merge::Strategy::Crop, d.info.grid, *source);
    const ScoreReport merged = score_merged(map.map, *d.labels, 3);
    for (int c = 0; c < 3; ++c) {
        CHECK(tiles.classes[static_cast<std::size_t>(c)].iou ==
              merged.classes[static_cast<std::size_t>(c)].iou);
    }
    CHECK(tiles.miou == merged.miou);
}

TEST_CASE("shape mismatches are rejected") {
    ConfusionAccumulator acc(2);
    CHECK_THROWS_AS(accumulate(testutil::const_tile(4, 4, 1, 0),
                               testutil::const_tile(5, 4, 1, 0), acc),
                    ShapeError);
    auto gt = testutil::random_labels(8, 8, 2, 1);
    PixelBuffer map(9, 8, 1, SampleType::U8);
    CHECK_THROWS_AS(score_merged(map, *gt, 2), ShapeError);
}

TEST_CASE("score report serializes at 4 decimal places") {
    ConfusionAccumulator acc(2);
    acc.tp[0] = 1;
    acc.fp[0] = 2;
    acc.fn[0] = 4; // IoU = 1/7 = 0.142857...
    acc.tp[1] = 1;
    const auto j = report_to_json(finalize(acc));
    CHECK(j.at("classes").at(0).at("iou").get<double>() == 0.1429);
    CHECK(j.at("mode").get<std::string>() == "tiles");
}
