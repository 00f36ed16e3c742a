#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "geoseg/common.hpp"

namespace geoseg {

/// Affine pixel->map transform. pixel_size_* is the ground sampling
/// distance in map units per pixel; the sign of pixel_size_y encodes the
/// row direction (negative for north-up rasters).
struct GeoTransform {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size_x = 1.0;
    double pixel_size_y = -1.0;
    double skew_x = 0.0;
    double skew_y = 0.0;
    std::string crs_id; // opaque identifier, carried verbatim

    void validate() const {
        if (!(pixel_size_x > 0.0)) {
            throw ConfigError("geotransform: pixel_size_x must be > 0");
        }
        if (pixel_size_y == 0.0) {
            throw ConfigError("geotransform: pixel_size_y must be nonzero");
        }
    }

    bool operator==(const GeoTransform &) const = default;
};

struct Window {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t w = 0;
    std::int64_t h = 0;

    bool valid() const { return x >= 0 && y >= 0 && w > 0 && h > 0; }

    bool contains(std::int64_t px, std::int64_t py) const {
        return px >= x && px < x + w && py >= y && py < y + h;
    }

    bool intersects(const Window &o) const {
        return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
    }

    bool operator==(const Window &) const = default;
};

inline std::pair<double, double> pixel_to_map(const GeoTransform &g, double px, double py) {
    return {g.origin_x + px * g.pixel_size_x + py * g.skew_x,
            g.origin_y + px * g.skew_y + py * g.pixel_size_y};
}

inline std::pair<double, double> map_to_pixel(const GeoTransform &g, double mx, double my) {
    const double det = g.pixel_size_x * g.pixel_size_y - g.skew_x * g.skew_y;
    if (det == 0.0) {
        throw ConfigError("geotransform is singular, cannot invert");
    }
    const double dx = mx - g.origin_x;
    const double dy = my - g.origin_y;
    return {(dx * g.pixel_size_y - dy * g.skew_x) / det,
            (dy * g.pixel_size_x - dx * g.skew_y) / det};
}

/// Geotransform of a window cut from a raster: same scale and skew, origin
/// moved to the window's top-left pixel corner.
inline GeoTransform geo_for_window(const GeoTransform &g, const Window &win) {
    GeoTransform out = g;
    auto [mx, my] = pixel_to_map(g, static_cast<double>(win.x), static_cast<double>(win.y));
    out.origin_x = mx;
    out.origin_y = my;
    return out;
}

/// Geotransform after resampling the raster by pixel factor r (new extent =
/// old extent * r): coverage is unchanged, so pixel sizes grow by 1/r.
inline GeoTransform geo_for_scale(const GeoTransform &g, double r) {
    GeoTransform out = g;
    out.pixel_size_x /= r;
    out.pixel_size_y /= r;
    out.skew_x /= r;
    out.skew_y /= r;
    return out;
}

} // namespace geoseg
