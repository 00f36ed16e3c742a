#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoseg/detail/opencv.hpp"
#include "geoseg/raster.hpp"

namespace geoseg::codec {

inline cv::Mat to_mat(const PixelBuffer &buf) {
    const int depth = buf.type() == SampleType::U8 ? CV_8U : CV_32F;
    // Wrap without copy; callers keep buf alive.
    return cv::Mat(static_cast<int>(buf.height()), static_cast<int>(buf.width()),
                   CV_MAKETYPE(depth, buf.bands()),
                   const_cast<std::uint8_t *>(buf.data()));
}

inline PixelBuffer from_mat(const cv::Mat &m) {
    SampleType t;
    switch (m.depth()) {
        case CV_8U: t = SampleType::U8; break;
        case CV_32F: t = SampleType::F32; break;
        default: throw FormatError("unsupported cv depth " + std::to_string(m.depth()));
    }
    PixelBuffer out(m.cols, m.rows, m.channels(), t);
    if (m.isContinuous()) {
        std::memcpy(out.data(), m.data, out.bytes().size());
    } else {
        const std::size_t row = static_cast<std::size_t>(m.cols) * m.elemSize();
        for (int r = 0; r < m.rows; ++r) {
            std::memcpy(out.data() + static_cast<std::size_t>(r) * row, m.ptr(r), row);
        }
    }
    return out;
}

/// Lossy image tile bytes (JPG, quality 90 by default). 3-band buffers are
/// stored in RGB order internally and swapped for the encoder.
inline std::vector<std::uint8_t> encode_jpg(const PixelBuffer &buf, int quality = 90) {
    if (buf.type() != SampleType::U8 || (buf.bands() != 1 && buf.bands() != 3)) {
        throw ShapeError("jpg tiles must be 1- or 3-band uint8");
    }
    cv::Mat m = to_mat(buf);
    cv::Mat bgr;
    if (buf.bands() == 3) {
        cv::cvtColor(m, bgr, cv::COLOR_RGB2BGR);
    } else {
        bgr = m;
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".jpg", bgr, out, {cv::IMWRITE_JPEG_QUALITY, quality})) {
        throw IoError("jpg encode failed");
    }
    return out;
}

/// Lossless label tile bytes (single-band 8-bit PNG, pixel value = class id).
inline std::vector<std::uint8_t> encode_png(const PixelBuffer &buf) {
    if (buf.type() != SampleType::U8) {
        throw ShapeError("png tiles must be uint8");
    }
    cv::Mat m = to_mat(buf);
    cv::Mat enc;
    if (buf.bands() == 3) {
        cv::cvtColor(m, enc, cv::COLOR_RGB2BGR);
    } else {
        enc = m;
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", enc, out, {cv::IMWRITE_PNG_COMPRESSION, 3})) {
        throw IoError("png encode failed");
    }
    return out;
}

inline PixelBuffer decode_image(const std::vector<std::uint8_t> &bytes) {
    cv::Mat m = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
    if (m.empty()) {
        throw FormatError("image decode failed");
    }
    if (m.channels() == 3) {
        cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
    } else if (m.channels() == 4) {
        cv::cvtColor(m, m, cv::COLOR_BGRA2RGB);
    }
    return from_mat(m);
}

inline PixelBuffer decode_image_file(const fs::path &path) {
    return decode_image(read_file(path));
}

/// Open any raster input: the raw grid + sidecar pair when the sidecar
/// exists, otherwise whatever OpenCV can decode (no georeference then).
inline RasterPtr open_raster(const fs::path &path,
                             std::size_t budget = kDefaultMemoryBudget) {
    if (fs::exists(sidecar_path(path))) {
        return open_raw_raster(path, budget);
    }
    PixelBuffer buf = decode_image_file(path);
    return MemoryRaster::from_buffer(std::move(buf), RasterMeta{});
}

} // namespace geoseg::codec
