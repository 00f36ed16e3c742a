#pragma once

#include <algorithm>
#include <cstdint>

#include "geoseg/raster.hpp"
#include "geoseg/workers.hpp"

namespace geoseg {

/// Marker for pixels outside the mask or where NIR+R == 0. Deliberately
/// outside the valid NDVI range [-1, 1] and recorded in the sidecar.
inline constexpr float kNdviNoData = -9999.0f;

namespace detail {

inline float sample_as_float(const PixelBuffer &buf, std::int64_t x, std::int64_t y) {
    return buf.type() == SampleType::U8 ? static_cast<float>(buf.u8(x, y))
                                        : buf.f32(x, y);
}

inline void ndvi_rows(const PixelBuffer &nir, const PixelBuffer &red, const PixelBuffer &mask,
                      std::uint8_t target_class, PixelBuffer &out) {
    for (std::int64_t y = 0; y < out.height(); ++y) {
        for (std::int64_t x = 0; x < out.width(); ++x) {
            float v = kNdviNoData;
            if (mask.u8(x, y) == target_class) {
                const float n = sample_as_float(nir, x, y);
                const float r = sample_as_float(red, x, y);
                const float sum = n + r;
                if (sum != 0.0f) {
                    v = (n - r) / sum;
                }
            }
            out.f32(x, y) = v;
        }
    }
}

} // namespace detail

/// NDVI = (NIR-R)/(NIR+R) where the mask equals target_class, no-data
/// elsewhere and at the NIR+R == 0 singularity.
inline PixelBuffer masked_ndvi(const Raster &nir, const Raster &red, const Raster &mask,
                               std::uint8_t target_class) {
    if (nir.width() != red.width() || nir.height() != red.height() ||
        nir.width() != mask.width() || nir.height() != mask.height()) {
        throw ShapeError("masked_ndvi inputs must share dimensions");
    }
    if (nir.bands() != 1 || red.bands() != 1 || mask.bands() != 1 ||
        mask.type() != SampleType::U8) {
        throw ShapeError("masked_ndvi expects single-band inputs and a uint8 class mask");
    }
    PixelBuffer out(nir.width(), nir.height(), 1, SampleType::F32);
    // Banded so inputs larger than memory stream through window reads.
    const std::int64_t band = 512;
    const std::int64_t nbands = (nir.height() + band - 1) / band;
    parallel_for(nbands, worker_count(), [&](std::int64_t bi) {
        const std::int64_t y0 = bi * band;
        const std::int64_t rows = std::min(band, nir.height() - y0);
        const Window win{0, y0, nir.width(), rows};
        PixelBuffer n = nir.read_window(win);
        PixelBuffer r = red.read_window(win);
        PixelBuffer m = mask.read_window(win);
        PixelBuffer slab(win.w, rows, 1, SampleType::F32);
        detail::ndvi_rows(n, r, m, target_class, slab);
        std::memcpy(out.data() + static_cast<std::size_t>(y0) * out.width() * 4,
                    slab.data(), slab.bytes().size());
    });
    return out;
}

inline void write_masked_ndvi(const fs::path &out_path, const Raster &nir, const Raster &red,
                              const Raster &mask, std::uint8_t target_class) {
    PixelBuffer buf = masked_ndvi(nir, red, mask, target_class);
    write_raw_raster(out_path, buf, nir.geo(), kNdviNoData);
}

} // namespace geoseg
