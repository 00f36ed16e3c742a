#include <catch2/catch_amalgamated.hpp>

#include <geoseg/pipeline.hpp>

#include "helpers.hpp"

using namespace geoseg;
using namespace geoseg::pipeline;

namespace {

/// Synthetic orthomosaic + labels written as raw rasters in `dir`.
void write_inputs(const fs::path &dir, std::int64_t size, int classes, std::uint64_t seed) {
    auto image = testutil::random_image(size, size, 3, seed);
    auto labels = testutil::random_labels(size, size, classes, seed + 1);
    RasterMeta imeta = image->meta();
    imeta.geo = testutil::sample_geo();
    write_raw_raster(dir / "ortho.bin", imeta, image->pixels().data());
    write_raw_raster(dir / "labels.bin", labels->meta(), labels->pixels().data());
}

nlohmann::json full_config() {
    return nlohmann::json{
        {"tasks",
         {{"split", {{"image", "ortho.bin"}, {"labels", "labels.bin"}, {"tile", 128}, {"stride", 0.5}}},
          {"weights", nlohmann::json::object()},
          {"split-set",
           {{"method", "horizontal"}, {"fractions", {0.6, 0.2, 0.2}}, {"gap", 0}, {"seed", 7}}},
          {"predict-check", {{"logits", {{"kind", "oracle"}, {"seed", 3}}}}},
          {"merge",
           {{"logits", {{"kind", "oracle"}, {"seed", 3}}}, {"strategy", "crop"}, {"out", "map.bin"}}},
          {"score",
           {{"logits", {{"kind", "oracle"}, {"seed", 3}}}, {"split", "test"}, {"mode", "tiles"}}}}}};
}

} // namespace

TEST_CASE("the full pipeline runs end to end on oracle logits") {
    testutil::TempDir tmp;
    write_inputs(tmp.path(), 1024, 3, 2001);

    const Config cfg = Config::from_json(full_config(), tmp.path());
    const RunSummary summary = run_pipeline(cfg);
    CHECK(summary.executed == std::vector<std::string>{"split", "split-set", "weights",
                                                       "predict-check", "merge", "score"});

    // merged one-hot predictions reproduce the label raster bit-exactly
    const auto map = merge::read_segmentation_map(tmp / "map.bin");
    auto labels = open_raw_raster(tmp / "labels.bin");
    CHECK(map.map.bytes() == labels->read_window(labels->full_window()).bytes());
    REQUIRE(map.geo.has_value());
    CHECK(map.geo->crs_id == "EPSG:32651");

    // perfect scores on the test split
    const auto bytes = read_file(tmp / "scores.json");
    const auto scores = nlohmann::json::parse(bytes.begin(), bytes.end());
    CHECK(scores.at("miou").get<double>() == 1.0);
    CHECK(scores.at("mdice").get<double>() == 1.0);

    CHECK(fs::exists(tiling::DatasetLayout{tmp / "dataset"}.weights_file()));
    CHECK(fs::exists(tiling::DatasetLayout{tmp / "dataset"}.split_file()));
}

TEST_CASE("a second run executes nothing") {
    testutil::TempDir tmp;
    write_inputs(tmp.path(), 512, 3, 2002);
    const Config cfg = Config::from_json(full_config(), tmp.path());
    run_pipeline(cfg);
    const RunSummary again = run_pipeline(cfg);
    CHECK(again.executed.empty());
    CHECK(again.skipped.size() == 6);
}

TEST_CASE("tasks run in isolation match their in-pipeline execution") {
    testutil::TempDir tmp;
    write_inputs(tmp.path(), 512, 3, 2003);

    // full pipeline in workspace A
    fs::create_directories(tmp / "a");
    write_inputs(tmp / "a", 512, 3, 2003);
    run_pipeline(Config::from_json(full_config(), tmp / "a"));

    // the same tasks one at a time in workspace B
    fs::create_directories(tmp / "b");
    write_inputs(tmp / "b", 512, 3, 2003);
    auto cfg = full_config();
    for (const auto &task : {"split", "split-set", "weights", "predict-check", "merge", "score"}) {
        nlohmann::json single{{"tasks", nlohmann::json::object()}};
        single["tasks"][task] = cfg["tasks"][task];
        run_pipeline(Config::from_json(single, tmp / "b"));
    }

    for (const auto &artifact :
         {"map.bin", "scores.json", "dataset/manifest.jsonl", "dataset/grid.json",
          "dataset/weights.json", "dataset/split.json"}) {
        CAPTURE(artifact);
        CHECK(read_file(tmp / "a" / artifact) == read_file(tmp / "b" / artifact));
    }
}

TEST_CASE("dependency cycles in the config are rejected") {
    testutil::TempDir tmp;
    auto cfg = full_config();
    cfg["tasks"]["split"]["depends"] = {"merge"}; // merge already depends on split
    CHECK_THROWS_AS(run_pipeline(Config::from_json(cfg, tmp.path())), ConfigError);
}

TEST_CASE("unknown tasks are rejected") {
    CHECK_THROWS_AS(Config::from_json({{"tasks", {{"train", nlohmann::json::object()}}}}),
                    ConfigError);
}

TEST_CASE("task failures name the task") {
    testutil::TempDir tmp;
    nlohmann::json cfg{{"tasks",
                        {{"split", {{"image", "missing.bin"}, {"tile", 64}, {"stride", 0.5}}}}}};
    CHECK_THROWS_WITH(run_pipeline(Config::from_json(cfg, tmp.path())),
                      Catch::Matchers::ContainsSubstring("task split failed"));
}

TEST_CASE("status reflects the journal") {
    testutil::TempDir tmp;
    write_inputs(tmp.path(), 512, 3, 2004);
    nlohmann::json split_only{
        {"tasks",
         {{"split", {{"image", "ortho.bin"}, {"labels", "labels.bin"}, {"tile", 256}, {"stride", 1.0}}}}}};
    run_pipeline(Config::from_json(split_only, tmp.path()));

    const auto states = pipeline::status(tmp.path());
    for (const auto &s : states) {
        if (s.name == "split") {
            CHECK(s.state == "done");
            CHECK(s.checkpoints > 0);
        } else {
            CHECK(s.state == "pending");
        }
    }
}
