#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <geoseg/raster.hpp>

namespace testutil {

namespace fs = std::filesystem;

/// Scratch directory removed on scope exit.
class TempDir {
  public:
    explicit TempDir(const std::string &tag = "geoseg-test") {
        std::string tmpl = (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) {
            throw std::runtime_error("mkdtemp failed");
        }
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const fs::path &path() const { return path_; }
    fs::path operator/(const std::string &leaf) const { return path_ / leaf; }

  private:
    fs::path path_;
};

inline std::shared_ptr<geoseg::MemoryRaster> random_image(std::int64_t w, std::int64_t h,
                                                          int bands, std::uint64_t seed) {
    geoseg::RasterMeta meta;
    meta.width = w;
    meta.height = h;
    meta.bands = bands;
    meta.type = geoseg::SampleType::U8;
    std::vector<std::uint8_t> px(meta.byte_size());
    std::mt19937_64 rng(geoseg::mix64(seed));
    for (auto &b : px) {
        b = static_cast<std::uint8_t>(rng());
    }
    return std::make_shared<geoseg::MemoryRaster>(std::move(meta), std::move(px));
}

/// Random blocky label field (contiguous class regions, like real labels).
inline std::shared_ptr<geoseg::MemoryRaster> random_labels(std::int64_t w, std::int64_t h,
                                                           int classes, std::uint64_t seed,
                                                           std::int64_t block = 32) {
    geoseg::RasterMeta meta;
    meta.width = w;
    meta.height = h;
    meta.bands = 1;
    meta.type = geoseg::SampleType::U8;
    std::vector<std::uint8_t> px(meta.byte_size());
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const std::uint64_t cell =
                geoseg::mix64(seed ^ ((static_cast<std::uint64_t>(y / block) << 32) |
                                      static_cast<std::uint64_t>(x / block)));
            px[static_cast<std::size_t>(y) * w + x] =
                static_cast<std::uint8_t>(cell % static_cast<std::uint64_t>(classes));
        }
    }
    return std::make_shared<geoseg::MemoryRaster>(std::move(meta), std::move(px));
}

inline geoseg::PixelBuffer const_tile(std::int64_t w, std::int64_t h, int bands,
                                      std::uint8_t value) {
    geoseg::PixelBuffer buf(w, h, bands, geoseg::SampleType::U8);
    std::fill(buf.bytes().begin(), buf.bytes().end(), value);
    return buf;
}

inline geoseg::GeoTransform sample_geo() {
    geoseg::GeoTransform g;
    g.origin_x = 120.5;
    g.origin_y = 16.4;
    g.pixel_size_x = 0.08;
    g.pixel_size_y = -0.08;
    g.crs_id = "EPSG:32651";
    return g;
}

} // namespace testutil
