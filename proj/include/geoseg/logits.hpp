#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "geoseg/codec.hpp"
#include "geoseg/common.hpp"
#include "geoseg/raster.hpp"
#include "geoseg/tiling.hpp"

namespace geoseg::predict {

/// Per-tile model confidences, shape (h, w, classes), class-fastest.
struct LogitTile {
    std::int64_t index = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;
    int classes = 0;
    std::vector<float> data;

    float at(std::int64_t y, std::int64_t x, int c) const {
        return data[(static_cast<std::size_t>(y) * w + x) * classes + c];
    }
    float &at(std::int64_t y, std::int64_t x, int c) {
        return data[(static_cast<std::size_t>(y) * w + x) * classes + c];
    }

    /// Pointwise argmax, ties to the lowest class id.
    std::uint8_t argmax(std::int64_t y, std::int64_t x) const {
        const float *p = data.data() + (static_cast<std::size_t>(y) * w + x) * classes;
        int best = 0;
        for (int c = 1; c < classes; ++c) {
            if (p[c] > p[best]) {
                best = c;
            }
        }
        return static_cast<std::uint8_t>(best);
    }
};

// ---------------------------------------------------------------------------
// .lgt container: "LGT1" magic, then LE u32 h, w, classes, then
// h*w*classes little-endian float32, row-major, class-fastest.

inline constexpr char kLogitMagic[4] = {'L', 'G', 'T', '1'};

inline fs::path logit_path(const fs::path &dir, std::int64_t index) {
    return dir / (std::to_string(index) + ".lgt");
}

inline std::vector<std::uint8_t> encode_logits(const LogitTile &tile) {
    std::vector<std::uint8_t> out(16 + tile.data.size() * 4);
    std::memcpy(out.data(), kLogitMagic, 4);
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(tile.h),
                                   static_cast<std::uint32_t>(tile.w),
                                   static_cast<std::uint32_t>(tile.classes)};
    std::memcpy(out.data() + 4, dims, 12);
    std::memcpy(out.data() + 16, tile.data.data(), tile.data.size() * 4);
    return out;
}

inline LogitTile decode_logits(const std::vector<std::uint8_t> &bytes, std::int64_t index,
                               const std::string &origin) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kLogitMagic, 4) != 0) {
        throw FormatError("bad logit magic in " + origin);
    }
    std::uint32_t dims[3];
    std::memcpy(dims, bytes.data() + 4, 12);
    LogitTile tile;
    tile.index = index;
    tile.h = dims[0];
    tile.w = dims[1];
    tile.classes = static_cast<int>(dims[2]);
    if (tile.h <= 0 || tile.w <= 0 || tile.classes <= 0) {
        throw FormatError("bad logit dimensions in " + origin);
    }
    const std::size_t n = static_cast<std::size_t>(tile.h) * tile.w * tile.classes;
    if (bytes.size() != 16 + n * 4) {
        throw FormatError("truncated logit payload in " + origin);
    }
    tile.data.resize(n);
    std::memcpy(tile.data.data(), bytes.data() + 16, n * 4);
    return tile;
}

inline void write_logit_tile(const fs::path &dir, const LogitTile &tile) {
    write_file_atomic(logit_path(dir, tile.index), encode_logits(tile));
}

inline LogitTile load_logits(const fs::path &dir, std::int64_t index) {
    const fs::path p = logit_path(dir, index);
    if (!fs::exists(p)) {
        throw IoError("missing logit tile " + p.string());
    }
    return decode_logits(read_file(p), index, p.string());
}

// ---------------------------------------------------------------------------
// Sources

/// Pluggable per-tile logit supplier. get() must be safe to call from
/// multiple threads.
class LogitSource {
  public:
    virtual ~LogitSource() = default;
    virtual LogitTile get(std::int64_t index) const = 0;
    virtual bool has(std::int64_t index) const = 0;
    virtual int classes() const = 0;
};

class DirectorySource final : public LogitSource {
  public:
    DirectorySource(fs::path dir, int expected_classes, std::int64_t tile_w, std::int64_t tile_h)
        : dir_(std::move(dir)), classes_(expected_classes), tile_w_(tile_w), tile_h_(tile_h) {}

    LogitTile get(std::int64_t index) const override {
        LogitTile tile = load_logits(dir_, index);
        if (classes_ > 0 && tile.classes != classes_) {
            throw FormatError("logit tile " + std::to_string(index) + " has " +
                              std::to_string(tile.classes) + " classes but grid.json says " +
                              std::to_string(classes_));
        }
        if (tile.w != tile_w_ || tile.h != tile_h_) {
            throw FormatError("logit tile " + std::to_string(index) +
                              " shape does not match the dataset tile size");
        }
        return tile;
    }

    bool has(std::int64_t index) const override { return fs::exists(logit_path(dir_, index)); }

    int classes() const override { return classes_; }

  private:
    fs::path dir_;
    int classes_;
    std::int64_t tile_w_;
    std::int64_t tile_h_;
};

namespace detail {

/// Uniform double in [0,1) from the top 53 bits; pinned across platforms.
inline double unit_double(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace detail

/// Ground-truth-backed source: one-hot logits from label tiles, optionally
/// corrupted by flipping each pixel's argmax to a uniformly chosen wrong
/// class with probability noise_rate. Deterministic in (labels, rate, seed)
/// and independent of evaluation order: every tile derives its own RNG
/// stream from the seed and tile index.
class OracleSource final : public LogitSource {
  public:
    using LabelFetch = std::function<PixelBuffer(std::int64_t index)>;

    OracleSource(LabelFetch fetch, std::int64_t tile_count, int classes, double noise_rate,
                 std::uint64_t seed)
        : fetch_(std::move(fetch)), tile_count_(tile_count), classes_(classes),
          noise_(noise_rate), seed_(seed) {
        if (noise_ < 0.0 || noise_ > 1.0) {
            throw ConfigError("noise rate must be in [0, 1]");
        }
        if (classes_ < 2) {
            throw ConfigError("oracle needs at least 2 classes");
        }
    }

    /// Labels straight from a dataset's lossless label tiles.
    static std::shared_ptr<OracleSource> from_dataset(const tiling::DatasetLayout &ds,
                                                      const tiling::GridInfo &info,
                                                      double noise_rate, std::uint64_t seed) {
        tiling::DatasetLayout layout = ds;
        return std::make_shared<OracleSource>(
            [layout](std::int64_t index) {
                return codec::decode_image(read_file(layout.root / layout.label_rel(index)));
            },
            info.grid.count(), info.class_count, noise_rate, seed);
    }

    /// Labels windowed directly out of a label raster.
    static std::shared_ptr<OracleSource> from_raster(RasterPtr labels, tiling::TileGrid grid,
                                                     int classes, double noise_rate,
                                                     std::uint64_t seed) {
        return std::make_shared<OracleSource>(
            [labels, grid](std::int64_t index) { return labels->read_window(grid.window(index)); },
            grid.count(), classes, noise_rate, seed);
    }

    LogitTile get(std::int64_t index) const override {
        const PixelBuffer labels = fetch_(index);
        LogitTile tile;
        tile.index = index;
        tile.h = labels.height();
        tile.w = labels.width();
        tile.classes = classes_;
        tile.data.assign(static_cast<std::size_t>(tile.h) * tile.w * classes_, 0.0f);

        std::mt19937_64 rng(mix64(seed_ ^ mix64(static_cast<std::uint64_t>(index))));
        const auto &bytes = labels.bytes();
        for (std::size_t p = 0; p < bytes.size(); ++p) {
            int cls = bytes[p];
            if (cls >= classes_) {
                throw DataError("label class " + std::to_string(cls) +
                                " out of range in tile " + std::to_string(index));
            }
            if (noise_ > 0.0 && detail::unit_double(rng) < noise_) {
                const int offset = 1 + static_cast<int>(rng() % (classes_ - 1));
                cls = (cls + offset) % classes_;
            }
            tile.data[p * classes_ + cls] = 1.0f;
        }
        return tile;
    }

    bool has(std::int64_t index) const override { return index >= 0 && index < tile_count_; }

    int classes() const override { return classes_; }

  private:
    LabelFetch fetch_;
    std::int64_t tile_count_;
    int classes_;
    double noise_;
    std::uint64_t seed_;
};

/// Declarative source description (config/CLI facing).
struct PredictorSource {
    enum class Kind { Directory, Oracle, NoisyOracle };
    Kind kind = Kind::Directory;
    fs::path directory;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
};

inline std::shared_ptr<LogitSource> make_source(const PredictorSource &desc,
                                                const tiling::DatasetLayout &ds,
                                                const tiling::GridInfo &info) {
    switch (desc.kind) {
        case PredictorSource::Kind::Directory:
            return std::make_shared<DirectorySource>(desc.directory, info.class_count,
                                                     info.grid.tile_w, info.grid.tile_h);
        case PredictorSource::Kind::Oracle:
            return OracleSource::from_dataset(ds, info, 0.0, desc.seed);
        case PredictorSource::Kind::NoisyOracle:
            return OracleSource::from_dataset(ds, info, desc.noise_rate, desc.seed);
    }
    throw ConfigError("unknown predictor source kind");
}

/// Every grid index must be answerable; returns the missing ones.
inline std::vector<std::int64_t> missing_tiles(const LogitSource &src, std::int64_t count) {
    std::vector<std::int64_t> missing;
    for (std::int64_t i = 0; i < count; ++i) {
        if (!src.has(i)) {
            missing.push_back(i);
        }
    }
    return missing;
}

} // namespace geoseg::predict
