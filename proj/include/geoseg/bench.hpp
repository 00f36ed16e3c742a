#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoseg/common.hpp"
#include "geoseg/logits.hpp"
#include "geoseg/merge.hpp"
#include "geoseg/raster.hpp"
#include "geoseg/tiling.hpp"

namespace geoseg::bench {

enum class Op { Split, MergeCrop, MergeLogit };

inline const char *op_name(Op op) {
    switch (op) {
        case Op::Split: return "split";
        case Op::MergeCrop: return "merge-crop";
        case Op::MergeLogit: return "merge-logit";
    }
    return "?";
}

inline Op op_from_name(const std::string &s) {
    if (s == "split") return Op::Split;
    if (s == "merge-crop") return Op::MergeCrop;
    if (s == "merge-logit") return Op::MergeLogit;
    throw ConfigError("unknown bench op: " + s);
}

struct BenchOptions {
    int repetitions = 3;
    std::int64_t tile = 512;
    double stride = 0.5;
    int classes = 3;
    std::uint64_t seed = 20240101;
    fs::path scratch_dir; // split op needs somewhere to write tiles
};

struct SizeSample {
    std::int64_t size = 0;        // square extent in px
    std::int64_t pixels = 0;
    double median_seconds = 0.0;
    std::vector<double> all_seconds;
    std::uint64_t checksum = 0;   // proof the timed runs produced the plain-run output
};

struct BenchResult {
    Op op = Op::Split;
    std::vector<SizeSample> samples;
    double slope = 0.0; // log-log fit of time vs pixel count
};

namespace detail {

inline std::shared_ptr<MemoryRaster> synth_image(std::int64_t size, std::uint64_t seed) {
    RasterMeta meta;
    meta.width = size;
    meta.height = size;
    meta.bands = 3;
    meta.type = SampleType::U8;
    std::vector<std::uint8_t> px(meta.byte_size());
    std::mt19937_64 rng(mix64(seed));
    std::uint64_t word = 0;
    int have = 0;
    for (auto &b : px) {
        if (have == 0) {
            word = rng();
            have = 8;
        }
        b = static_cast<std::uint8_t>(word);
        word >>= 8;
        --have;
    }
    return std::make_shared<MemoryRaster>(std::move(meta), std::move(px));
}

/// Blocky deterministic label field: enough structure that the merges do
/// real work, cheap to generate at any size.
inline std::shared_ptr<MemoryRaster> synth_labels(std::int64_t size, int classes,
                                                  std::uint64_t seed) {
    RasterMeta meta;
    meta.width = size;
    meta.height = size;
    meta.bands = 1;
    meta.type = SampleType::U8;
    std::vector<std::uint8_t> px(meta.byte_size());
    const std::int64_t block = 64;
    for (std::int64_t y = 0; y < size; ++y) {
        for (std::int64_t x = 0; x < size; ++x) {
            const std::uint64_t cell = mix64(seed ^ (static_cast<std::uint64_t>(y / block) << 32 |
                                                     static_cast<std::uint64_t>(x / block)));
            px[static_cast<std::size_t>(y) * size + x] =
                static_cast<std::uint8_t>(cell % static_cast<std::uint64_t>(classes));
        }
    }
    return std::make_shared<MemoryRaster>(std::move(meta), std::move(px));
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

inline std::uint64_t dataset_checksum(const tiling::DatasetLayout &ds, std::int64_t count) {
    std::uint64_t h = kFnvOffset;
    for (std::int64_t i = 0; i < count; ++i) {
        const auto bytes = read_file(ds.root / ds.image_rel(i));
        h = fnv1a64(bytes.data(), bytes.size(), h);
    }
    return h;
}

} // namespace detail

/// Least-squares slope of log(seconds) against log(pixels).
inline double fit_loglog_slope(const std::vector<double> &pixels,
                               const std::vector<double> &seconds) {
    if (pixels.size() < 2 || pixels.size() != seconds.size()) {
        throw ConfigError("slope fit needs matched samples for >= 2 sizes");
    }
    const std::size_t n = pixels.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(pixels[i]);
        const double y = std::log(seconds[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Time one op across square input sizes: median of `repetitions` timed
/// runs per size, plus one untimed run whose output checksum every timed
/// run must reproduce (benchmarks must not change results).
inline BenchResult run_bench(Op op, const std::vector<std::int64_t> &sizes,
                             const BenchOptions &opts = {}) {
    if (sizes.size() < 2) {
        throw ConfigError("bench needs at least 2 sizes");
    }
    BenchResult result;
    result.op = op;

    fs::path scratch = opts.scratch_dir;
    if (scratch.empty()) {
        scratch = fs::temp_directory_path() / ("geoseg-bench-" + std::to_string(::getpid()));
    }
    fs::create_directories(scratch);

    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const std::int64_t size = sizes[si];
        SizeSample sample;
        sample.size = size;
        sample.pixels = size * size;

        const auto image = detail::synth_image(size, opts.seed + si);
        const auto labels = detail::synth_labels(size, opts.classes, opts.seed + si);
        tiling::TileGrid grid =
            tiling::plan_grid(size, size, opts.tile, opts.tile, opts.stride);

        auto run_once = [&](bool timed, int rep) -> std::pair<double, std::uint64_t> {
            const auto t0 = std::chrono::steady_clock::now();
            std::uint64_t checksum = 0;
            if (op == Op::Split) {
                const fs::path out =
                    scratch / (std::string("split-") + std::to_string(size) + "-" +
                               std::to_string(rep) + (timed ? "t" : "r"));
                tiling::SplitOptions sopt;
                sopt.class_count = opts.classes;
                tiling::split_raster(*image, labels.get(), grid, out, sopt);
                const auto t1 = std::chrono::steady_clock::now();
                checksum = detail::dataset_checksum(tiling::DatasetLayout{out}, grid.count());
                fs::remove_all(out);
                return {std::chrono::duration<double>(t1 - t0).count(), checksum};
            }
            const auto source =
                predict::OracleSource::from_raster(labels, grid, opts.classes, 0.0, opts.seed);
            merge::MergeStats stats;
            merge::merge_to_map(op == Op::MergeCrop ? merge::Strategy::Crop
                                                    : merge::Strategy::Logit,
                                grid, *source, {}, &stats);
            const auto t1 = std::chrono::steady_clock::now();
            return {std::chrono::duration<double>(t1 - t0).count(), stats.checksum};
        };

        const auto [_, reference] = run_once(false, -1);
        sample.checksum = reference;
        for (int rep = 0; rep < opts.repetitions; ++rep) {
            const auto [secs, checksum] = run_once(true, rep);
            if (checksum != reference) {
                throw DataError("bench run altered op output (checksum mismatch)");
            }
            sample.all_seconds.push_back(secs);
        }
        sample.median_seconds = detail::median(sample.all_seconds);
        result.samples.push_back(std::move(sample));
    }
    fs::remove_all(scratch);

    std::vector<double> px, secs;
    for (const auto &s : result.samples) {
        px.push_back(static_cast<double>(s.pixels));
        secs.push_back(s.median_seconds);
    }
    result.slope = fit_loglog_slope(px, secs);
    return result;
}

inline nlohmann::json bench_to_json(const BenchResult &r) {
    nlohmann::json j;
    j["op"] = op_name(r.op);
    j["slope"] = r.slope;
    nlohmann::json samples = nlohmann::json::array();
    for (const auto &s : r.samples) {
        samples.push_back({{"size", s.size},
                           {"pixels", s.pixels},
                           {"median_seconds", s.median_seconds},
                           {"seconds", s.all_seconds},
                           {"checksum", to_hex(s.checksum)}});
    }
    j["samples"] = samples;
    return j;
}

inline std::string bench_to_csv(const BenchResult &r) {
    std::string csv = "op,size,pixels,median_seconds\n";
    for (const auto &s : r.samples) {
        csv += std::string(op_name(r.op)) + "," + std::to_string(s.size) + "," +
               std::to_string(s.pixels) + "," + std::to_string(s.median_seconds) + "\n";
    }
    return csv;
}

} // namespace geoseg::bench
