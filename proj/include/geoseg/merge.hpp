#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geoseg/common.hpp"
#include "geoseg/geo.hpp"
#include "geoseg/journal.hpp"
#include "geoseg/logits.hpp"
#include "geoseg/raster.hpp"
#include "geoseg/tiling.hpp"
#include "geoseg/workers.hpp"

namespace geoseg::merge {

enum class Strategy { Logit, Crop };

inline const char *strategy_name(Strategy s) {
    return s == Strategy::Logit ? "logit" : "crop";
}

/// Single-band class-id map plus the source orthomosaic's georeference.
struct SegmentationMap {
    PixelBuffer map; // uint8 class ids
    std::optional<GeoTransform> geo;
};

struct MergeOptions {
    int workers = 0;                   // 0 = worker_count()
    Journal *journal = nullptr;        // enables banded checkpoints
    std::string task_name = "merge";
    std::int64_t bands_per_checkpoint = 64;
    std::int64_t band_rows = 0;        // logit-merge buffer height, 0 = tile_h
    bool trust_checkpoints = true;     // false forces full recompute
};

struct MergeStats {
    std::int64_t bands_total = 0;
    std::int64_t bands_executed = 0;
    std::int64_t bands_skipped = 0;
    std::uint64_t checksum = 0; // FNV-64 of the merged class-id bytes
};

/// In-memory merge target; mirrors RasterFileWriter's write surface.
class MemorySink {
  public:
    MemorySink(std::int64_t w, std::int64_t h) : buf_(w, h, 1, SampleType::U8) {}

    void write_rows(std::int64_t y0, std::int64_t rows, const std::uint8_t *src) {
        std::memcpy(buf_.data() + static_cast<std::size_t>(y0) * buf_.width(), src,
                    static_cast<std::size_t>(rows) * buf_.width());
    }

    void write_block(const Window &win, const std::uint8_t *src) {
        for (std::int64_t r = 0; r < win.h; ++r) {
            std::memcpy(buf_.data() + static_cast<std::size_t>(win.y + r) * buf_.width() + win.x,
                        src + static_cast<std::size_t>(r) * win.w,
                        static_cast<std::size_t>(win.w));
        }
    }

    std::uint64_t checksum_rows(std::int64_t y0, std::int64_t rows) const {
        return fnv1a64(buf_.data() + static_cast<std::size_t>(y0) * buf_.width(),
                       static_cast<std::size_t>(rows) * buf_.width());
    }

    void sync() {}

    PixelBuffer take() { return std::move(buf_); }

  private:
    PixelBuffer buf_;
};

namespace detail {

inline void require_complete(const predict::LogitSource &src, std::int64_t count) {
    const auto missing = predict::missing_tiles(src, count);
    if (!missing.empty()) {
        std::string msg = "logits incomplete, missing tile indices:";
        for (std::size_t i = 0; i < missing.size() && i < 16; ++i) {
            msg += " " + std::to_string(missing[i]);
        }
        if (missing.size() > 16) {
            msg += " ... (" + std::to_string(missing.size()) + " total)";
        }
        throw IncompleteError(msg);
    }
}

/// Crop boundaries along one axis. Each overlapping strip between
/// consecutive windows is cut at its midpoint, which is exactly the
/// "crop overlap/2 per side" rule on a uniform grid and still tessellates
/// when the final origin was clamped. Outer edges are never cropped.
inline std::vector<std::int64_t> crop_bounds(const std::vector<std::int64_t> &origins,
                                             std::int64_t tile, std::int64_t extent) {
    std::vector<std::int64_t> b(origins.size() + 1);
    b.front() = 0;
    b.back() = extent;
    for (std::size_t i = 0; i + 1 < origins.size(); ++i) {
        b[i + 1] = (origins[i + 1] + origins[i] + tile) / 2;
    }
    return b;
}

/// Run band jobs in parallel with journal checkpoints per fixed-size group
/// of bands. Bands in already-committed groups are skipped; the worker that
/// finishes a group's last band syncs the sink and commits the checkpoint.
template <typename Sink, typename BandFn, typename GroupRange>
void banded_run(std::int64_t bands, const MergeOptions &opts, Sink &sink, MergeStats &stats,
                BandFn &&band_fn, GroupRange &&group_rows) {
    const std::int64_t group_size = std::max<std::int64_t>(1, opts.bands_per_checkpoint);
    const std::int64_t groups = (bands + group_size - 1) / group_size;
    auto group_cp = [&](std::int64_t g) { return "band-group:" + std::to_string(g); };

    std::vector<std::atomic<std::int64_t>> remaining(static_cast<std::size_t>(groups));
    for (std::int64_t g = 0; g < groups; ++g) {
        remaining[static_cast<std::size_t>(g)] =
            std::min(group_size, bands - g * group_size);
    }

    std::atomic<std::int64_t> executed{0};
    std::atomic<std::int64_t> skipped{0};

    parallel_for(bands, opts.workers > 0 ? opts.workers : worker_count(), [&](std::int64_t b) {
        const std::int64_t g = b / group_size;
        if (opts.journal && opts.trust_checkpoints &&
            opts.journal->has(opts.task_name, group_cp(g))) {
            skipped.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        band_fn(b);
        executed.fetch_add(1, std::memory_order_relaxed);
        if (remaining[static_cast<std::size_t>(g)].fetch_sub(1, std::memory_order_acq_rel) == 1 &&
            opts.journal) {
            sink.sync(); // committed bands must be durable before the journal says so
            const auto [y0, y1] = group_rows(g);
            opts.journal->commit(opts.task_name, group_cp(g), sink.checksum_rows(y0, y1 - y0));
        }
    });

    stats.bands_total = bands;
    stats.bands_executed = executed.load();
    stats.bands_skipped = skipped.load();
}

} // namespace detail

/// Crop-merge (fast path): each tile contributes the pointwise argmax of its
/// own logits over a central region; the regions partition the extent, so
/// every pixel is written exactly once by a plain block copy.
template <typename Sink>
MergeStats merge_crop(const tiling::TileGrid &grid, const predict::LogitSource &source,
                      Sink &sink, const MergeOptions &opts = {}) {
    detail::require_complete(source, grid.count());
    const auto xb = detail::crop_bounds(grid.x_origins, grid.tile_w, grid.source_w);
    const auto yb = detail::crop_bounds(grid.y_origins, grid.tile_h, grid.source_h);
    const std::int64_t cols = grid.cols();

    MergeStats stats;
    detail::banded_run(
        grid.rows(), opts, sink, stats,
        [&](std::int64_t row) {
            std::vector<std::uint8_t> block;
            for (std::int64_t c = 0; c < cols; ++c) {
                const std::int64_t index = row * cols + c;
                const Window win = grid.window(index);
                const predict::LogitTile tile = source.get(index);
                const Window region{xb[static_cast<std::size_t>(c)],
                                    yb[static_cast<std::size_t>(row)],
                                    xb[static_cast<std::size_t>(c + 1)] - xb[static_cast<std::size_t>(c)],
                                    yb[static_cast<std::size_t>(row + 1)] - yb[static_cast<std::size_t>(row)]};
                block.resize(static_cast<std::size_t>(region.w) * region.h);
                for (std::int64_t y = 0; y < region.h; ++y) {
                    const std::int64_t ty = region.y + y - win.y;
                    for (std::int64_t x = 0; x < region.w; ++x) {
                        block[static_cast<std::size_t>(y) * region.w + x] =
                            tile.argmax(ty, region.x + x - win.x);
                    }
                }
                sink.write_block(region, block.data());
            }
        },
        [&](std::int64_t g) {
            const std::int64_t r0 = g * std::max<std::int64_t>(1, opts.bands_per_checkpoint);
            const std::int64_t r1 = std::min<std::int64_t>(
                grid.rows(), r0 + std::max<std::int64_t>(1, opts.bands_per_checkpoint));
            return std::pair<std::int64_t, std::int64_t>(yb[static_cast<std::size_t>(r0)],
                                                         yb[static_cast<std::size_t>(r1)]);
        });
    stats.checksum = sink.checksum_rows(0, grid.source_h);
    return stats;
}

/// Logit-merge: each pixel takes the class whose per-class maximum over all
/// covering tiles is largest (ties to the lowest class id). Cross-tile
/// maxima are kept in a running float buffer per output row band so the
/// full logit volume is never materialized.
template <typename Sink>
MergeStats merge_logits(const tiling::TileGrid &grid, const predict::LogitSource &source,
                        Sink &sink, const MergeOptions &opts = {}) {
    detail::require_complete(source, grid.count());
    const int classes = [&] {
        const int c = source.classes();
        return c > 0 ? c : source.get(0).classes;
    }();
    const std::int64_t band_rows = opts.band_rows > 0 ? opts.band_rows : grid.tile_h;
    const std::int64_t bands = (grid.source_h + band_rows - 1) / band_rows;
    const std::int64_t width = grid.source_w;
    const std::int64_t cols = grid.cols();

    MergeStats stats;
    detail::banded_run(
        bands, opts, sink, stats,
        [&](std::int64_t band) {
            const std::int64_t y0 = band * band_rows;
            const std::int64_t rows = std::min(band_rows, grid.source_h - y0);
            std::vector<float> maxima(static_cast<std::size_t>(rows) * width * classes,
                                      -std::numeric_limits<float>::infinity());
            for (std::int64_t r = 0; r < grid.rows(); ++r) {
                const std::int64_t oy = grid.y_origins[static_cast<std::size_t>(r)];
                if (oy >= y0 + rows || oy + grid.tile_h <= y0) {
                    continue;
                }
                for (std::int64_t c = 0; c < cols; ++c) {
                    const std::int64_t index = r * cols + c;
                    const Window win = grid.window(index);
                    const predict::LogitTile tile = source.get(index);
                    const std::int64_t ya = std::max(y0, win.y);
                    const std::int64_t yz = std::min(y0 + rows, win.y + win.h);
                    for (std::int64_t y = ya; y < yz; ++y) {
                        float *dst =
                            maxima.data() +
                            ((static_cast<std::size_t>(y - y0) * width) + win.x) * classes;
                        const float *srcp =
                            tile.data.data() +
                            (static_cast<std::size_t>(y - win.y) * win.w) * classes;
                        const std::size_t n = static_cast<std::size_t>(win.w) * classes;
                        for (std::size_t i = 0; i < n; ++i) {
                            dst[i] = std::max(dst[i], srcp[i]);
                        }
                    }
                }
            }
            std::vector<std::uint8_t> out(static_cast<std::size_t>(rows) * width);
            for (std::size_t p = 0; p < out.size(); ++p) {
                const float *v = maxima.data() + p * classes;
                int best = 0;
                for (int cc = 1; cc < classes; ++cc) {
                    if (v[cc] > v[best]) {
                        best = cc;
                    }
                }
                out[p] = static_cast<std::uint8_t>(best);
            }
            sink.write_rows(y0, rows, out.data());
        },
        [&](std::int64_t g) {
            const std::int64_t group = std::max<std::int64_t>(1, opts.bands_per_checkpoint);
            const std::int64_t b0 = g * group;
            const std::int64_t b1 = std::min(bands, b0 + group);
            return std::pair<std::int64_t, std::int64_t>(
                b0 * band_rows, std::min(grid.source_h, b1 * band_rows));
        });
    stats.checksum = sink.checksum_rows(0, grid.source_h);
    return stats;
}

/// Merge into memory (tests, benchmarks, small extents).
inline SegmentationMap merge_to_map(Strategy strategy, const tiling::TileGrid &grid,
                                    const predict::LogitSource &source,
                                    const MergeOptions &opts = {}, MergeStats *stats_out = nullptr) {
    MemorySink sink(grid.source_w, grid.source_h);
    const MergeStats stats = strategy == Strategy::Crop ? merge_crop(grid, source, sink, opts)
                                                        : merge_logits(grid, source, sink, opts);
    if (stats_out) {
        *stats_out = stats;
    }
    return SegmentationMap{sink.take(), grid.source_geo};
}

/// Merge into a georeferenced raster on disk, resumable through the journal.
/// The six geotransform coefficients and crs_id are carried bit-exactly.
inline MergeStats merge_to_file(Strategy strategy, const tiling::TileGrid &grid,
                                const predict::LogitSource &source, const fs::path &out_path,
                                MergeOptions opts = {}) {
    RasterMeta meta;
    meta.width = grid.source_w;
    meta.height = grid.source_h;
    meta.bands = 1;
    meta.type = SampleType::U8;
    meta.geo = grid.source_geo;

    fs::path partial = out_path;
    partial += ".partial";
    // Checkpoints describe bytes in the partial file; without it they are
    // stale (e.g. the finished output was renamed into place, or deleted).
    opts.trust_checkpoints = opts.trust_checkpoints && fs::exists(partial);

    RasterFileWriter writer(out_path, meta);
    MergeStats stats = strategy == Strategy::Crop ? merge_crop(grid, source, writer, opts)
                                                  : merge_logits(grid, source, writer, opts);
    writer.finalize();
    return stats;
}

/// Write a merged map as the georeferenced raw+sidecar pair.
inline void write_georeferenced(const SegmentationMap &map, const fs::path &out_path) {
    write_raw_raster(out_path, map.map, map.geo);
}

inline SegmentationMap read_segmentation_map(const fs::path &path) {
    RasterPtr r = open_raw_raster(path);
    SegmentationMap map;
    map.map = r->read_window(r->full_window());
    map.geo = r->geo();
    return map;
}

} // namespace geoseg::merge
