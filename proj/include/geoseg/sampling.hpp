#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoseg/codec.hpp"
#include "geoseg/common.hpp"
#include "geoseg/tiling.hpp"
#include "geoseg/workers.hpp"

namespace geoseg::sampling {

struct ClassHistogram {
    std::vector<std::uint64_t> counts;

    std::uint64_t total() const {
        return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    }

    ClassHistogram &operator+=(const ClassHistogram &o) {
        if (counts.size() < o.counts.size()) {
            counts.resize(o.counts.size(), 0);
        }
        for (std::size_t i = 0; i < o.counts.size(); ++i) {
            counts[i] += o.counts[i];
        }
        return *this;
    }
};

struct HistogramSet {
    std::vector<ClassHistogram> per_tile; // parallel to the input tile list
    ClassHistogram totals;
};

inline ClassHistogram histogram_of(const PixelBuffer &labels, int class_count,
                                   const std::string &tile_name) {
    ClassHistogram h;
    h.counts.assign(static_cast<std::size_t>(class_count), 0);
    for (std::uint8_t v : labels.bytes()) {
        if (v >= class_count) {
            throw DataError("class id " + std::to_string(v) + " out of range in " + tile_name);
        }
        ++h.counts[v];
    }
    return h;
}

/// Per-tile class pixel tallies plus the element-wise total.
inline HistogramSet class_histograms(const tiling::DatasetLayout &ds,
                                     const std::vector<std::int64_t> &indices, int class_count,
                                     int workers = 0) {
    HistogramSet set;
    set.per_tile.resize(indices.size());
    set.totals.counts.assign(static_cast<std::size_t>(class_count), 0);
    parallel_for(static_cast<std::int64_t>(indices.size()), workers > 0 ? workers : worker_count(),
                 [&](std::int64_t i) {
                     const std::string rel = ds.label_rel(indices[static_cast<std::size_t>(i)]);
                     const PixelBuffer tile = codec::decode_image(read_file(ds.root / rel));
                     set.per_tile[static_cast<std::size_t>(i)] = histogram_of(tile, class_count, rel);
                 });
    for (const auto &h : set.per_tile) {
        set.totals += h;
    }
    return set;
}

/// Per-tile oversampling weight: the sum over classes of this tile's share
/// of the dataset-wide pixel count of that class. Classes absent from the
/// whole set contribute nothing. Weights are returned unnormalized.
inline std::vector<double> sample_weights(const std::vector<ClassHistogram> &per_tile,
                                          const ClassHistogram &totals) {
    std::vector<double> weights;
    weights.reserve(per_tile.size());
    for (const auto &tile : per_tile) {
        double w = 0.0;
        for (std::size_t c = 0; c < tile.counts.size(); ++c) {
            const std::uint64_t total = c < totals.counts.size() ? totals.counts[c] : 0;
            if (total > 0) {
                w += static_cast<double>(tile.counts[c]) / static_cast<double>(total);
            }
        }
        weights.push_back(w);
    }
    return weights;
}

// ---------------------------------------------------------------------------
// Train/val/test splitting

enum class SplitMethod { Horizontal, Manual };

struct SplitSpec {
    SplitMethod method = SplitMethod::Horizontal;
    double train_fraction = 0.7;
    double val_fraction = 0.1;
    double test_fraction = 0.2;
    std::int64_t gap_rows = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0) {
            throw ConfigError("split fractions must be non-negative");
        }
        const double sum = train_fraction + val_fraction + test_fraction;
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ConfigError("split fractions must sum to 1");
        }
        if (gap_rows < 0) {
            throw ConfigError("gap_rows must be >= 0");
        }
    }
};

struct SplitSets {
    std::vector<std::int64_t> train;
    std::vector<std::int64_t> val;
    std::vector<std::int64_t> test;
    std::vector<std::int64_t> discarded; // manual split: straddling tiles
};

namespace detail {

// Deterministic Fisher-Yates; std::shuffle's draw sequence is
// implementation-defined, this one is pinned.
inline void shuffle_indices(std::vector<std::int64_t> &v, std::uint64_t seed) {
    std::mt19937_64 rng(mix64(seed));
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace detail

/// Contiguous horizontal bands of tile-grid rows: train on top, then a
/// discarded gap, validation, another gap, test. Only the train list is
/// shuffled; val/test keep row-major order.
inline SplitSets split_horizontal(const tiling::TileGrid &grid, const SplitSpec &spec) {
    spec.validate();
    const std::int64_t rows = grid.rows();
    const std::int64_t cols = grid.cols();

    auto rows_for = [&](double f) { return static_cast<std::int64_t>(std::llround(f * rows)); };
    std::int64_t train_rows = rows_for(spec.train_fraction);
    std::int64_t val_rows = rows_for(spec.val_fraction);
    const bool has_val = spec.val_fraction > 0;
    const bool has_test = spec.test_fraction > 0;
    const std::int64_t gaps = (has_val ? spec.gap_rows : 0) + (has_test ? spec.gap_rows : 0);
    std::int64_t test_rows = rows - train_rows - val_rows - gaps;
    if (!has_test) {
        test_rows = 0;
    }

    if (train_rows <= 0 && spec.train_fraction > 0) {
        throw ConfigError("train fraction yields zero rows");
    }
    if (has_val && val_rows <= 0) {
        throw ConfigError("val fraction yields zero rows");
    }
    if (has_test && test_rows <= 0) {
        throw ConfigError("fractions and gaps infeasible for " + std::to_string(rows) +
                          " grid rows");
    }
    if (train_rows + val_rows + test_rows + gaps > rows) {
        throw ConfigError("fractions and gaps infeasible for " + std::to_string(rows) +
                          " grid rows");
    }

    auto take_rows = [&](std::int64_t first, std::int64_t n) {
        std::vector<std::int64_t> out;
        out.reserve(static_cast<std::size_t>(n * cols));
        for (std::int64_t r = first; r < first + n; ++r) {
            for (std::int64_t c = 0; c < cols; ++c) {
                out.push_back(r * cols + c);
            }
        }
        return out;
    };

    SplitSets sets;
    std::int64_t row = 0;
    sets.train = take_rows(row, train_rows);
    row += train_rows;
    if (has_val) {
        row += spec.gap_rows;
        sets.val = take_rows(row, val_rows);
        row += val_rows;
    }
    if (has_test) {
        row += spec.gap_rows;
        sets.test = take_rows(row, test_rows);
    }
    detail::shuffle_indices(sets.train, spec.seed);
    return sets;
}

/// Region codes in the manual-split raster.
inline constexpr std::uint8_t kRegionTrain = 0;
inline constexpr std::uint8_t kRegionVal = 1;
inline constexpr std::uint8_t kRegionTest = 2;

/// Assign each tile to the set owning the strict majority of its pixels in a
/// user-drawn region raster (0=train, 1=val, 2=test, other=unassigned).
/// Tiles with no strict majority straddle a boundary and are discarded to
/// avoid spatial leakage between the sets.
inline SplitSets split_manual(const tiling::TileGrid &grid, const Raster &regions) {
    if (regions.width() != grid.source_w || regions.height() != grid.source_h) {
        throw ShapeError("region raster dimensions do not match the source");
    }
    if (regions.bands() != 1 || regions.type() != SampleType::U8) {
        throw ShapeError("region raster must be single-band uint8");
    }
    SplitSets sets;
    for (std::int64_t i = 0; i < grid.count(); ++i) {
        const PixelBuffer px = regions.read_window(grid.window(i));
        std::uint64_t counts[3] = {0, 0, 0};
        for (std::uint8_t v : px.bytes()) {
            if (v <= kRegionTest) {
                ++counts[v];
            }
        }
        const std::uint64_t best = std::max({counts[0], counts[1], counts[2]});
        const int winners = (counts[0] == best) + (counts[1] == best) + (counts[2] == best);
        if (best == 0 || winners > 1) {
            sets.discarded.push_back(i);
        } else if (counts[kRegionTrain] == best) {
            sets.train.push_back(i);
        } else if (counts[kRegionVal] == best) {
            sets.val.push_back(i);
        } else {
            sets.test.push_back(i);
        }
    }
    return sets;
}

// ---------------------------------------------------------------------------
// Artifact files

inline void write_weights(const tiling::DatasetLayout &ds, const std::vector<std::int64_t> &indices,
                          const std::vector<double> &weights) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        arr.push_back({{"index", indices[i]}, {"weight", weights[i]}});
    }
    write_file_atomic(ds.weights_file(), arr.dump(2) + "\n");
}

inline nlohmann::json split_spec_json(const SplitSpec &spec) {
    return {{"method", spec.method == SplitMethod::Horizontal ? "horizontal" : "manual"},
            {"fractions", {spec.train_fraction, spec.val_fraction, spec.test_fraction}},
            {"gap_rows", spec.gap_rows},
            {"seed", spec.seed}};
}

inline void write_split(const tiling::DatasetLayout &ds, const SplitSets &sets,
                        const SplitSpec &spec) {
    nlohmann::json j;
    j["train"] = sets.train;
    j["val"] = sets.val;
    j["test"] = sets.test;
    j["discarded"] = sets.discarded;
    j["seed"] = spec.seed;
    j["spec"] = split_spec_json(spec);
    write_file_atomic(ds.split_file(), j.dump(2) + "\n");
}

inline SplitSets read_split(const tiling::DatasetLayout &ds) {
    const auto bytes = read_file(ds.split_file());
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    SplitSets sets;
    sets.train = j.at("train").get<std::vector<std::int64_t>>();
    sets.val = j.at("val").get<std::vector<std::int64_t>>();
    sets.test = j.at("test").get<std::vector<std::int64_t>>();
    if (j.contains("discarded")) {
        sets.discarded = j.at("discarded").get<std::vector<std::int64_t>>();
    }
    return sets;
}

} // namespace geoseg::sampling
