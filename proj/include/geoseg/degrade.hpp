#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "geoseg/codec.hpp"
#include "geoseg/common.hpp"
#include "geoseg/raster.hpp"
#include "geoseg/resample.hpp"
#include "geoseg/tiling.hpp"
#include "geoseg/workers.hpp"

namespace geoseg::degrade {

enum class Method { A, B, C };

inline char method_letter(Method m) {
    switch (m) {
        case Method::A: return 'a';
        case Method::B: return 'b';
        case Method::C: return 'c';
    }
    return '?';
}

/// Synthetic GSD degradation parameters. Labels are always resampled with
/// nearest-neighbour; class ids must not be averaged.
struct DegradeSpec {
    Method method = Method::A;
    double source_gsd = 0.0; // m/px
    double target_gsd = 0.0; // m/px
    ImageFilter image_filter = ImageFilter::Area;

    double scale() const { return source_gsd / target_gsd; }

    void validate() const {
        if (!(source_gsd > 0.0) || !(target_gsd > 0.0)) {
            throw ConfigError("GSDs must be positive");
        }
        if (target_gsd < source_gsd) {
            throw ConfigError("target GSD must be >= source GSD (degradation only)");
        }
    }
};

inline std::int64_t scaled_dim_checked(std::int64_t dim, double r) {
    const std::int64_t out = resample::scaled_dim(dim, r);
    if (out < 1) {
        throw ConfigError("scale factor " + std::to_string(r) +
                          " produces a zero-dimension output");
    }
    return out;
}

/// Method A: shrink image and label together; pixel density at the model
/// input drops, each pixel covers more ground.
inline std::pair<PixelBuffer, std::optional<PixelBuffer>>
degrade_tile_a(const PixelBuffer &image, const PixelBuffer *label, const DegradeSpec &spec) {
    spec.validate();
    const double r = spec.scale();
    const std::int64_t w = scaled_dim_checked(image.width(), r);
    const std::int64_t h = scaled_dim_checked(image.height(), r);
    std::optional<PixelBuffer> lab;
    if (label) {
        lab = resample::resize_labels(*label, w, h);
    }
    return {resample::resize(image, w, h, spec.image_filter), std::move(lab)};
}

/// Method B: pixelate in place (downscale then upscale back with bicubic);
/// tile dimensions and labels stay untouched.
inline PixelBuffer degrade_tile_b(const PixelBuffer &image, const DegradeSpec &spec) {
    spec.validate();
    const double r = spec.scale();
    const std::int64_t w = scaled_dim_checked(image.width(), r);
    const std::int64_t h = scaled_dim_checked(image.height(), r);
    if (w == image.width() && h == image.height()) {
        return image;
    }
    const PixelBuffer small = resample::resize(image, w, h, spec.image_filter);
    return resample::resize(small, image.width(), image.height(), ImageFilter::Bicubic);
}

struct DegradeOptions {
    int jpeg_quality = 90;
    int workers = 0;
};

namespace detail {

inline void write_degrade_note(const tiling::DatasetLayout &ds, const DegradeSpec &spec,
                               std::int64_t tile_w, std::int64_t tile_h) {
    nlohmann::json j;
    j["method"] = std::string(1, method_letter(spec.method));
    j["source_gsd"] = spec.source_gsd;
    j["target_gsd"] = spec.target_gsd;
    j["tile_w"] = tile_w;
    j["tile_h"] = tile_h;
    write_file_atomic(ds.root / "degrade.json", j.dump(2) + "\n");
}

} // namespace detail

/// Apply method A or B tile-by-tile over an existing dataset, producing a
/// sibling dataset with the same indices. Method A changes the tile
/// dimensions, which is recorded in grid.json and a degrade.json side file
/// so consumers can adapt the model input shape.
inline tiling::GridInfo degrade_dataset(const tiling::DatasetLayout &src, const fs::path &out_dir,
                                        const DegradeSpec &spec, const DegradeOptions &opts = {}) {
    spec.validate();
    if (spec.method == Method::C) {
        throw ConfigError("method C operates on the orthomosaic, use degrade_mosaic_c");
    }
    const tiling::GridInfo info = tiling::read_grid_info(src);
    const auto records = tiling::read_manifest(src);

    tiling::DatasetLayout out{out_dir};
    fs::create_directories(out.images_dir());
    if (info.has_labels) {
        fs::create_directories(out.labels_dir());
    }

    const double r = spec.scale();
    parallel_for(static_cast<std::int64_t>(records.size()),
                 opts.workers > 0 ? opts.workers : worker_count(), [&](std::int64_t k) {
                     const auto &rec = records[static_cast<std::size_t>(k)];
                     PixelBuffer img = codec::decode_image(read_file(src.root / rec.image_path));
                     if (spec.method == Method::A) {
                         PixelBuffer lab;
                         const bool has_label = !rec.label_path.empty();
                         if (has_label) {
                             lab = codec::decode_image(read_file(src.root / rec.label_path));
                         }
                         auto [dimg, dlab] = degrade_tile_a(img, has_label ? &lab : nullptr, spec);
                         write_file_atomic(out.root / rec.image_path,
                                           codec::encode_jpg(dimg, opts.jpeg_quality));
                         if (dlab) {
                             write_file_atomic(out.root / rec.label_path, codec::encode_png(*dlab));
                         }
                     } else {
                         write_file_atomic(out.root / rec.image_path,
                                           codec::encode_jpg(degrade_tile_b(img, spec),
                                                             opts.jpeg_quality));
                         if (!rec.label_path.empty()) {
                             // labels are not degraded: byte-for-byte copy
                             write_file_atomic(out.root / rec.label_path,
                                               read_file(src.root / rec.label_path));
                         }
                     }
                 });

    tiling::GridInfo out_info = info;
    std::vector<tiling::TileRecord> out_records = records;
    if (spec.method == Method::A) {
        out_info.grid.tile_w = scaled_dim_checked(info.grid.tile_w, r);
        out_info.grid.tile_h = scaled_dim_checked(info.grid.tile_h, r);
        for (auto &rec : out_records) {
            if (rec.geo) {
                rec.geo = geo_for_scale(*rec.geo, r);
            }
        }
        if (out_info.grid.source_geo) {
            out_info.grid.source_geo = geo_for_scale(*out_info.grid.source_geo, r);
        }
    }
    tiling::write_manifest(out, out_records);
    tiling::write_grid_info(out, out_info);
    detail::write_degrade_note(out, spec, out_info.grid.tile_w, out_info.grid.tile_h);
    return out_info;
}

/// Extent of the whole mosaic after method C scaling, half-up rounding.
inline std::pair<std::int64_t, std::int64_t> scaled_extent(std::int64_t w, std::int64_t h,
                                                           const DegradeSpec &spec) {
    const double r = spec.scale();
    return {resample::scaled_dim(w, r), resample::scaled_dim(h, r)};
}

/// Method C: shrink the whole orthomosaic (lanczos) and label map (nearest),
/// then re-fragment. Fewer, "zoomed out" tiles; the tile count shrinks ~r^2.
inline tiling::SplitResult degrade_mosaic_c(const Raster &image, const Raster *labels,
                                            const DegradeSpec &spec, std::int64_t tile_w,
                                            std::int64_t tile_h, double stride,
                                            const fs::path &out_dir,
                                            const tiling::SplitOptions &split_opts = {}) {
    spec.validate();
    const auto [w, h] = scaled_extent(image.width(), image.height(), spec);
    if (w < tile_w || h < tile_h) {
        throw ConfigError("downscaled extent " + std::to_string(w) + "x" + std::to_string(h) +
                          " is smaller than one tile");
    }
    const PixelBuffer img_full = image.read_window(image.full_window());
    const PixelBuffer img_small = resample::resize(img_full, w, h, ImageFilter::Lanczos);
    std::optional<GeoTransform> geo;
    if (image.geo()) {
        geo = geo_for_scale(*image.geo(), spec.scale());
    }
    const auto small_image = MemoryRaster::from_buffer(img_small, RasterMeta{.geo = geo});

    std::shared_ptr<MemoryRaster> small_labels;
    if (labels) {
        const PixelBuffer lab_full = labels->read_window(labels->full_window());
        small_labels = MemoryRaster::from_buffer(resample::resize_labels(lab_full, w, h),
                                                 RasterMeta{});
    }

    tiling::TileGrid grid = tiling::plan_grid(w, h, tile_w, tile_h, stride);
    grid.source_geo = geo;
    auto result = tiling::split_raster(*small_image, small_labels.get(), grid, out_dir, split_opts);
    detail::write_degrade_note(tiling::DatasetLayout{out_dir}, spec, tile_w, tile_h);
    return result;
}

/// The GSD ladder used for degradation studies, smallest (native UAV) first.
struct LadderRung {
    double gsd; // m/px
    const char *platform;
};

inline const std::vector<LadderRung> &ladder_presets() {
    static const std::vector<LadderRung> ladder = {
        {0.08, "UAV"},
        {0.10, "UAV"},
        {0.12, "UAV"},
        {0.15, "Maxar (Upscaled)"},
        {0.30, "Maxar, Digital Globe"},
        {0.50, "Maxar, Airbus"},
        {0.70, "Maxar, Planet, CNES, KARI"},
        {1.0, "Lockheed Martin Space"},
        {3.0, "Planet"},
        {5.0, "RapidEye Blackbridge"},
        {10.0, "Sentinel-2"},
        {15.0, "Landsat"},
    };
    return ladder;
}

} // namespace geoseg::degrade
