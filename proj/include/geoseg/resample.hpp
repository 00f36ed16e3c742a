#pragma once

#include <cstdint>

#include "geoseg/codec.hpp"
#include "geoseg/common.hpp"

namespace geoseg {

enum class ImageFilter { Area, Bicubic, Lanczos };

namespace resample {

inline int cv_interp(ImageFilter f) {
    switch (f) {
        case ImageFilter::Area: return cv::INTER_AREA;
        case ImageFilter::Bicubic: return cv::INTER_CUBIC;
        case ImageFilter::Lanczos: return cv::INTER_LANCZOS4;
    }
    return cv::INTER_AREA;
}

/// Target dimension after GSD scaling, rounded half-up (25228 * 0.8 -> 20182).
inline std::int64_t scaled_dim(std::int64_t dim, double r) {
    return round_half_up(static_cast<double>(dim) * r);
}

inline PixelBuffer resize(const PixelBuffer &src, std::int64_t w, std::int64_t h, ImageFilter f) {
    if (w <= 0 || h <= 0) {
        throw ConfigError("resize target has a zero dimension");
    }
    if (w == src.width() && h == src.height()) {
        return src;
    }
    cv::Mat in = codec::to_mat(src);
    cv::Mat out;
    cv::resize(in, out, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0, cv_interp(f));
    return codec::from_mat(out);
}

/// Label maps are resized with nearest-neighbour only: class ids must
/// survive untouched, averaging them is meaningless.
inline PixelBuffer resize_labels(const PixelBuffer &src, std::int64_t w, std::int64_t h) {
    if (w <= 0 || h <= 0) {
        throw ConfigError("resize target has a zero dimension");
    }
    if (w == src.width() && h == src.height()) {
        return src;
    }
    cv::Mat in = codec::to_mat(src);
    cv::Mat out;
    cv::resize(in, out, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0, cv::INTER_NEAREST);
    return codec::from_mat(out);
}

} // namespace resample
} // namespace geoseg
