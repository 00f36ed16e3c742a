#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoseg/codec.hpp"
#include "geoseg/common.hpp"
#include "geoseg/geo.hpp"
#include "geoseg/journal.hpp"
#include "geoseg/raster.hpp"
#include "geoseg/workers.hpp"

namespace geoseg::tiling {

/// Sliding-window coverage of a raster extent. Origins step by
/// floor(tile * stride); the last origin in each axis is clamped to
/// extent - tile so the final tile ends flush with the edge (tiles are
/// never padded, every tile is exactly tile_w x tile_h).
struct TileGrid {
    std::int64_t tile_w = 0;
    std::int64_t tile_h = 0;
    double stride = 1.0;
    std::int64_t source_w = 0;
    std::int64_t source_h = 0;
    std::vector<std::int64_t> x_origins;
    std::vector<std::int64_t> y_origins;
    std::optional<GeoTransform> source_geo;

    std::int64_t cols() const { return static_cast<std::int64_t>(x_origins.size()); }
    std::int64_t rows() const { return static_cast<std::int64_t>(y_origins.size()); }
    std::int64_t count() const { return cols() * rows(); }

    Window window(std::int64_t index) const {
        if (index < 0 || index >= count()) {
            throw BoundsError("tile index " + std::to_string(index) + " out of range");
        }
        return {x_origins[static_cast<std::size_t>(index % cols())],
                y_origins[static_cast<std::size_t>(index / cols())], tile_w, tile_h};
    }

    std::vector<Window> windows() const {
        std::vector<Window> out;
        out.reserve(static_cast<std::size_t>(count()));
        for (std::int64_t i = 0; i < count(); ++i) {
            out.push_back(window(i));
        }
        return out;
    }

    /// Grid row of a tile index.
    std::int64_t row_of(std::int64_t index) const { return index / cols(); }
};

namespace detail {

inline std::vector<std::int64_t> axis_origins(std::int64_t extent, std::int64_t tile,
                                              std::int64_t step) {
    std::vector<std::int64_t> origins;
    for (std::int64_t o = 0; o + tile <= extent; o += step) {
        origins.push_back(o);
    }
    const std::int64_t last = extent - tile;
    if (origins.empty() || origins.back() != last) {
        origins.push_back(last); // clamp-shift, never pad
    }
    return origins;
}

} // namespace detail

inline TileGrid plan_grid(std::int64_t width, std::int64_t height, std::int64_t tile_w,
                          std::int64_t tile_h, double stride) {
    if (!(stride > 0.0) || stride > 1.0) {
        throw ConfigError("stride must be in (0, 1]");
    }
    if (tile_w <= 0 || tile_h <= 0) {
        throw ConfigError("tile dimensions must be positive");
    }
    if (tile_w > width || tile_h > height) {
        throw ConfigError("tile larger than image extent");
    }
    const auto step_x = static_cast<std::int64_t>(std::floor(static_cast<double>(tile_w) * stride));
    const auto step_y = static_cast<std::int64_t>(std::floor(static_cast<double>(tile_h) * stride));
    if (step_x < 1 || step_y < 1) {
        throw ConfigError("stride too small: window would not advance");
    }
    TileGrid grid;
    grid.tile_w = tile_w;
    grid.tile_h = tile_h;
    grid.stride = stride;
    grid.source_w = width;
    grid.source_h = height;
    grid.x_origins = detail::axis_origins(width, tile_w, step_x);
    grid.y_origins = detail::axis_origins(height, tile_h, step_y);
    return grid;
}

/// Asymptotic tile-count gain of overlapped splitting versus stride 1.
inline double data_gain(double stride) {
    if (!(stride > 0.0) || stride > 1.0) {
        throw ConfigError("stride must be in (0, 1]");
    }
    return 1.0 / (stride * stride);
}

struct TileRecord {
    std::int64_t index = 0;
    Window window;
    std::string image_path; // relative to the dataset root
    std::string label_path; // empty when the dataset has no labels
    std::optional<GeoTransform> geo;
};

// ---------------------------------------------------------------------------
// Dataset directory layout:
//   images/{index}.jpg  labels/{index}.png  manifest.jsonl  grid.json
//   weights.json  split.json  (written by later stages)

struct DatasetLayout {
    fs::path root;

    fs::path images_dir() const { return root / "images"; }
    fs::path labels_dir() const { return root / "labels"; }
    fs::path manifest() const { return root / "manifest.jsonl"; }
    fs::path grid_file() const { return root / "grid.json"; }
    fs::path weights_file() const { return root / "weights.json"; }
    fs::path split_file() const { return root / "split.json"; }

    std::string image_rel(std::int64_t index) const {
        return "images/" + std::to_string(index) + ".jpg";
    }
    std::string label_rel(std::int64_t index) const {
        return "labels/" + std::to_string(index) + ".png";
    }
};

/// Deterministic display palette for class ids.
inline std::array<int, 3> palette_color(int class_id) {
    static constexpr std::array<std::array<int, 3>, 10> base = {{{0, 0, 0},
                                                                 {0, 255, 255},
                                                                 {255, 64, 64},
                                                                 {64, 255, 64},
                                                                 {255, 255, 0},
                                                                 {255, 128, 0},
                                                                 {160, 64, 255},
                                                                 {64, 128, 255},
                                                                 {255, 64, 200},
                                                                 {128, 255, 200}}};
    return base[static_cast<std::size_t>(class_id) % base.size()];
}

inline nlohmann::json geo_to_json(const GeoTransform &g) {
    return {{"origin_x", g.origin_x},       {"origin_y", g.origin_y},
            {"pixel_size_x", g.pixel_size_x}, {"pixel_size_y", g.pixel_size_y},
            {"skew_x", g.skew_x},           {"skew_y", g.skew_y},
            {"crs_id", g.crs_id}};
}

inline GeoTransform geo_from_json(const nlohmann::json &j) {
    GeoTransform g;
    g.origin_x = j.at("origin_x").get<double>();
    g.origin_y = j.at("origin_y").get<double>();
    g.pixel_size_x = j.at("pixel_size_x").get<double>();
    g.pixel_size_y = j.at("pixel_size_y").get<double>();
    g.skew_x = j.at("skew_x").get<double>();
    g.skew_y = j.at("skew_y").get<double>();
    g.crs_id = j.value("crs_id", std::string{});
    return g;
}

/// grid.json payload: the grid geometry plus dataset-level class info.
struct GridInfo {
    TileGrid grid;
    int class_count = 0; // 0 = unlabeled dataset
    bool has_labels = false;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["tile_w"] = grid.tile_w;
        j["tile_h"] = grid.tile_h;
        j["stride"] = grid.stride;
        j["source_width"] = grid.source_w;
        j["source_height"] = grid.source_h;
        j["x_origins"] = grid.x_origins;
        j["y_origins"] = grid.y_origins;
        j["geo"] = grid.source_geo ? geo_to_json(*grid.source_geo) : nlohmann::json(nullptr);
        j["class_count"] = class_count;
        j["has_labels"] = has_labels;
        nlohmann::json palette = nlohmann::json::array();
        for (int c = 0; c < class_count; ++c) {
            const auto rgb = palette_color(c);
            palette.push_back({{"id", c}, {"rgb", rgb}});
        }
        j["palette"] = palette;
        return j;
    }

    static GridInfo from_json(const nlohmann::json &j) {
        GridInfo info;
        info.grid.tile_w = j.at("tile_w").get<std::int64_t>();
        info.grid.tile_h = j.at("tile_h").get<std::int64_t>();
        info.grid.stride = j.at("stride").get<double>();
        info.grid.source_w = j.at("source_width").get<std::int64_t>();
        info.grid.source_h = j.at("source_height").get<std::int64_t>();
        info.grid.x_origins = j.at("x_origins").get<std::vector<std::int64_t>>();
        info.grid.y_origins = j.at("y_origins").get<std::vector<std::int64_t>>();
        if (!j.at("geo").is_null()) {
            info.grid.source_geo = geo_from_json(j.at("geo"));
        }
        info.class_count = j.at("class_count").get<int>();
        info.has_labels = j.value("has_labels", info.class_count > 0);
        return info;
    }
};

inline void write_grid_info(const DatasetLayout &ds, const GridInfo &info) {
    write_file_atomic(ds.grid_file(), info.to_json().dump(2) + "\n");
}

inline GridInfo read_grid_info(const DatasetLayout &ds) {
    const auto bytes = read_file(ds.grid_file());
    return GridInfo::from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
}

inline nlohmann::json record_to_json(const TileRecord &r) {
    nlohmann::json j;
    j["index"] = r.index;
    j["window"] = {r.window.x, r.window.y, r.window.w, r.window.h};
    j["image"] = r.image_path;
    j["label"] = r.label_path;
    j["geo"] = r.geo ? geo_to_json(*r.geo) : nlohmann::json(nullptr);
    return j;
}

inline TileRecord record_from_json(const nlohmann::json &j) {
    TileRecord r;
    r.index = j.at("index").get<std::int64_t>();
    const auto &w = j.at("window");
    r.window = {w.at(0).get<std::int64_t>(), w.at(1).get<std::int64_t>(),
                w.at(2).get<std::int64_t>(), w.at(3).get<std::int64_t>()};
    r.image_path = j.at("image").get<std::string>();
    r.label_path = j.at("label").get<std::string>();
    if (!j.at("geo").is_null()) {
        r.geo = geo_from_json(j.at("geo"));
    }
    return r;
}

inline void write_manifest(const DatasetLayout &ds, const std::vector<TileRecord> &records) {
    std::string text;
    for (const auto &r : records) {
        text += record_to_json(r).dump();
        text += '\n';
    }
    write_file_atomic(ds.manifest(), text);
}

inline std::vector<TileRecord> read_manifest(const DatasetLayout &ds) {
    const auto bytes = read_file(ds.manifest());
    std::vector<TileRecord> out;
    std::istringstream is(std::string(bytes.begin(), bytes.end()));
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty()) {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// split_raster

struct SplitOptions {
    int jpeg_quality = 90;
    int class_count = 0;          // 0 = infer max id + 1 from the label tiles
    int workers = 0;              // 0 = worker_count()
    Journal *journal = nullptr;   // enables per-row-band checkpointing
    std::string task_name = "split";
    // Test/progress hook, called after each grid row commits. Throwing from
    // here aborts the run like any other failure.
    std::function<void(std::int64_t row)> after_band;
};

struct SplitResult {
    std::vector<TileRecord> records;
    GridInfo info;
    std::int64_t bands_total = 0;
    std::int64_t bands_executed = 0;
    std::int64_t bands_skipped = 0;
};

namespace detail {

inline std::string band_checkpoint(std::int64_t row) {
    return "band:" + std::to_string(row);
}

inline int max_class_id(const PixelBuffer &labels) {
    int m = 0;
    const auto &bytes = labels.bytes();
    for (std::uint8_t v : bytes) {
        m = std::max<int>(m, v);
    }
    return m;
}

} // namespace detail

/// Fragment an orthomosaic (and aligned label map) into the dataset layout.
/// Grid rows are distributed over a worker pool; each completed row is
/// journaled, so an interrupted run resumes without recomputing finished
/// rows and the final dataset bytes are identical either way.
inline SplitResult split_raster(const Raster &image, const Raster *labels, const TileGrid &grid,
                                const fs::path &out_dir, const SplitOptions &opts = {}) {
    if (labels && (labels->width() != image.width() || labels->height() != image.height())) {
        throw ShapeError("label map dimensions do not match the image");
    }
    if (image.type() != SampleType::U8 || (image.bands() != 1 && image.bands() != 3)) {
        throw ShapeError("split expects a 1- or 3-band uint8 image");
    }
    if (labels && (labels->bands() != 1 || labels->type() != SampleType::U8)) {
        throw ShapeError("label map must be single-band uint8 class ids");
    }
    if (grid.source_w != image.width() || grid.source_h != image.height()) {
        throw ShapeError("grid extent does not match the image");
    }

    DatasetLayout ds{out_dir};
    fs::create_directories(ds.images_dir());
    if (labels) {
        fs::create_directories(ds.labels_dir());
    }

    SplitResult result;
    result.bands_total = grid.rows();

    const std::int64_t cols = grid.cols();
    std::vector<int> row_max_class(static_cast<std::size_t>(grid.rows()), 0);
    std::mutex result_mu;

    auto process_row = [&](std::int64_t row) {
        if (opts.journal && opts.journal->has(opts.task_name, detail::band_checkpoint(row))) {
            std::lock_guard<std::mutex> lock(result_mu);
            ++result.bands_skipped;
            return;
        }
        std::uint64_t band_hash = kFnvOffset;
        int band_max = 0;
        for (std::int64_t c = 0; c < cols; ++c) {
            const std::int64_t index = row * cols + c;
            const Window win = grid.window(index);
            const PixelBuffer img = image.read_window(win);
            const auto jpg = codec::encode_jpg(img, opts.jpeg_quality);
            write_file_atomic(ds.root / ds.image_rel(index), jpg);
            band_hash = fnv1a64(jpg.data(), jpg.size(), band_hash);
            if (labels) {
                const PixelBuffer lab = labels->read_window(win);
                band_max = std::max(band_max, detail::max_class_id(lab));
                const auto png = codec::encode_png(lab);
                write_file_atomic(ds.root / ds.label_rel(index), png);
                band_hash = fnv1a64(png.data(), png.size(), band_hash);
            }
        }
        if (opts.journal) {
            opts.journal->commit(opts.task_name, detail::band_checkpoint(row), band_hash);
        }
        {
            std::lock_guard<std::mutex> lock(result_mu);
            row_max_class[static_cast<std::size_t>(row)] = band_max;
            ++result.bands_executed;
        }
        if (opts.after_band) {
            opts.after_band(row);
        }
    };

    parallel_for(grid.rows(), opts.workers > 0 ? opts.workers : worker_count(), process_row);

    // Manifest and grid metadata are derived purely from the grid, so they
    // are identical no matter how work was scheduled or resumed.
    result.records.reserve(static_cast<std::size_t>(grid.count()));
    for (std::int64_t i = 0; i < grid.count(); ++i) {
        TileRecord r;
        r.index = i;
        r.window = grid.window(i);
        r.image_path = ds.image_rel(i);
        r.label_path = labels ? ds.label_rel(i) : std::string{};
        if (grid.source_geo) {
            r.geo = geo_for_window(*grid.source_geo, r.window);
        }
        result.records.push_back(std::move(r));
    }

    int class_count = opts.class_count;
    if (labels && class_count == 0) {
        // Resumed rows were skipped, so recover their max from the tiles.
        for (std::int64_t row = 0; row < grid.rows(); ++row) {
            if (opts.journal && row_max_class[static_cast<std::size_t>(row)] == 0 &&
                opts.journal->has(opts.task_name, detail::band_checkpoint(row))) {
                for (std::int64_t c = 0; c < cols; ++c) {
                    const auto png = read_file(ds.root / ds.label_rel(row * cols + c));
                    row_max_class[static_cast<std::size_t>(row)] = std::max(
                        row_max_class[static_cast<std::size_t>(row)],
                        detail::max_class_id(codec::decode_image(png)));
                }
            }
        }
        class_count = 1 + *std::max_element(row_max_class.begin(), row_max_class.end());
    }

    result.info.grid = grid;
    result.info.class_count = labels ? class_count : opts.class_count;
    result.info.has_labels = labels != nullptr;
    write_manifest(ds, result.records);
    write_grid_info(ds, result.info);
    return result;
}

} // namespace geoseg::tiling
