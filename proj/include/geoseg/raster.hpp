#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include "geoseg/common.hpp"
#include "geoseg/geo.hpp"

namespace geoseg {

enum class SampleType : std::uint8_t { U8, F32 };

inline std::size_t sample_size(SampleType t) {
    return t == SampleType::U8 ? 1 : 4;
}

inline const char *sample_type_name(SampleType t) {
    return t == SampleType::U8 ? "uint8" : "float32";
}

inline SampleType sample_type_from_name(const std::string &s) {
    if (s == "uint8") return SampleType::U8;
    if (s == "float32") return SampleType::F32;
    throw FormatError("unknown sample type: " + s);
}

struct RasterMeta {
    std::int64_t width = 0;
    std::int64_t height = 0;
    int bands = 1;
    SampleType type = SampleType::U8;
    std::optional<GeoTransform> geo;
    std::optional<double> nodata;

    std::size_t pixel_stride() const { return sample_size(type) * static_cast<std::size_t>(bands); }
    std::size_t row_stride() const { return pixel_stride() * static_cast<std::size_t>(width); }
    std::size_t byte_size() const { return row_stride() * static_cast<std::size_t>(height); }
};

/// Row-major, band-interleaved-by-pixel block of samples.
class PixelBuffer {
  public:
    PixelBuffer() = default;
    PixelBuffer(std::int64_t w, std::int64_t h, int bands, SampleType t)
        : w_(w), h_(h), bands_(bands), type_(t),
          bytes_(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * bands * sample_size(t)) {}

    std::int64_t width() const { return w_; }
    std::int64_t height() const { return h_; }
    int bands() const { return bands_; }
    SampleType type() const { return type_; }

    const std::vector<std::uint8_t> &bytes() const { return bytes_; }
    std::vector<std::uint8_t> &bytes() { return bytes_; }
    std::uint8_t *data() { return bytes_.data(); }
    const std::uint8_t *data() const { return bytes_.data(); }

    std::uint8_t &u8(std::int64_t x, std::int64_t y, int b = 0) {
        return bytes_[offset(x, y, b)];
    }
    std::uint8_t u8(std::int64_t x, std::int64_t y, int b = 0) const {
        return bytes_[offset(x, y, b)];
    }
    float &f32(std::int64_t x, std::int64_t y, int b = 0) {
        return *reinterpret_cast<float *>(bytes_.data() + offset(x, y, b));
    }
    float f32(std::int64_t x, std::int64_t y, int b = 0) const {
        return *reinterpret_cast<const float *>(bytes_.data() + offset(x, y, b));
    }

    bool same_shape(const PixelBuffer &o) const {
        return w_ == o.w_ && h_ == o.h_ && bands_ == o.bands_ && type_ == o.type_;
    }

  private:
    std::size_t offset(std::int64_t x, std::int64_t y, int b) const {
        return ((static_cast<std::size_t>(y) * w_ + x) * bands_ + b) * sample_size(type_);
    }

    std::int64_t w_ = 0;
    std::int64_t h_ = 0;
    int bands_ = 0;
    SampleType type_ = SampleType::U8;
    std::vector<std::uint8_t> bytes_;
};

/// Read-only raster handle. Window reads are pure and safe to issue from
/// multiple threads against the same handle.
class Raster {
  public:
    virtual ~Raster() = default;

    const RasterMeta &meta() const { return meta_; }
    std::int64_t width() const { return meta_.width; }
    std::int64_t height() const { return meta_.height; }
    int bands() const { return meta_.bands; }
    SampleType type() const { return meta_.type; }
    const std::optional<GeoTransform> &geo() const { return meta_.geo; }

    Window full_window() const { return {0, 0, meta_.width, meta_.height}; }

    void check_window(const Window &win) const {
        if (!win.valid() || win.x + win.w > meta_.width || win.y + win.h > meta_.height) {
            std::ostringstream os;
            os << "window (" << win.x << "," << win.y << "," << win.w << "," << win.h
               << ") outside raster " << meta_.width << "x" << meta_.height;
            throw BoundsError(os.str());
        }
    }

    PixelBuffer read_window(const Window &win) const {
        check_window(win);
        PixelBuffer out(win.w, win.h, meta_.bands, meta_.type);
        read_rows(win, out.data());
        return out;
    }

  protected:
    explicit Raster(RasterMeta meta) : meta_(std::move(meta)) {}

    // Copy the window into dst, contiguous rows of win.w pixels.
    virtual void read_rows(const Window &win, std::uint8_t *dst) const = 0;

    RasterMeta meta_;
};

using RasterPtr = std::shared_ptr<const Raster>;

class MemoryRaster final : public Raster {
  public:
    MemoryRaster(RasterMeta meta, std::vector<std::uint8_t> pixels)
        : Raster(std::move(meta)), pixels_(std::move(pixels)) {
        if (pixels_.size() != meta_.byte_size()) {
            throw ShapeError("pixel payload does not match raster dimensions");
        }
    }

    static std::shared_ptr<MemoryRaster> from_buffer(PixelBuffer buf, RasterMeta meta) {
        meta.width = buf.width();
        meta.height = buf.height();
        meta.bands = buf.bands();
        meta.type = buf.type();
        return std::make_shared<MemoryRaster>(std::move(meta), std::move(buf.bytes()));
    }

    const std::vector<std::uint8_t> &pixels() const { return pixels_; }

  private:
    void read_rows(const Window &win, std::uint8_t *dst) const override {
        const std::size_t ps = meta_.pixel_stride();
        const std::size_t row_bytes = static_cast<std::size_t>(win.w) * ps;
        for (std::int64_t r = 0; r < win.h; ++r) {
            const std::size_t src = (static_cast<std::size_t>(win.y + r) * meta_.width + win.x) * ps;
            std::memcpy(dst + static_cast<std::size_t>(r) * row_bytes, pixels_.data() + src, row_bytes);
        }
    }

    std::vector<std::uint8_t> pixels_;
};

namespace detail {

/// RAII mmap of a whole file.
class MappedFile {
  public:
    MappedFile() = default;

    static MappedFile open_readonly(const fs::path &path) {
        MappedFile m;
        m.fd_ = ::open(path.c_str(), O_RDONLY);
        if (m.fd_ < 0) {
            throw IoError("cannot open " + path.string());
        }
        struct stat st{};
        if (::fstat(m.fd_, &st) != 0) {
            ::close(m.fd_);
            throw IoError("cannot stat " + path.string());
        }
        m.size_ = static_cast<std::size_t>(st.st_size);
        if (m.size_ > 0) {
            m.ptr_ = ::mmap(nullptr, m.size_, PROT_READ, MAP_SHARED, m.fd_, 0);
            if (m.ptr_ == MAP_FAILED) {
                ::close(m.fd_);
                throw IoError("mmap failed for " + path.string());
            }
        }
        return m;
    }

    /// Open (or create) a file of exactly `size` bytes, mapped read-write.
    /// Existing contents are preserved so interrupted runs can resume.
    static MappedFile open_readwrite(const fs::path &path, std::size_t size) {
        MappedFile m;
        m.fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (m.fd_ < 0) {
            throw IoError("cannot open " + path.string() + " for writing");
        }
        if (::ftruncate(m.fd_, static_cast<off_t>(size)) != 0) {
            ::close(m.fd_);
            throw IoError("cannot size " + path.string());
        }
        m.size_ = size;
        if (size > 0) {
            m.ptr_ = ::mmap(nullptr, size, PROT_READ | PROT_WRITE, MAP_SHARED, m.fd_, 0);
            if (m.ptr_ == MAP_FAILED) {
                ::close(m.fd_);
                throw IoError("mmap failed for " + path.string());
            }
        }
        return m;
    }

    MappedFile(MappedFile &&o) noexcept { *this = std::move(o); }
    MappedFile &operator=(MappedFile &&o) noexcept {
        reset();
        ptr_ = o.ptr_;
        size_ = o.size_;
        fd_ = o.fd_;
        o.ptr_ = nullptr;
        o.size_ = 0;
        o.fd_ = -1;
        return *this;
    }
    MappedFile(const MappedFile &) = delete;
    MappedFile &operator=(const MappedFile &) = delete;
    ~MappedFile() { reset(); }

    void sync() const {
        if (ptr_) {
            ::msync(ptr_, size_, MS_SYNC);
        }
    }

    const std::uint8_t *data() const { return static_cast<const std::uint8_t *>(ptr_); }
    std::uint8_t *data() { return static_cast<std::uint8_t *>(ptr_); }
    std::size_t size() const { return size_; }

  private:
    void reset() {
        if (ptr_ && ptr_ != MAP_FAILED) {
            ::munmap(ptr_, size_);
        }
        if (fd_ >= 0) {
            ::close(fd_);
        }
        ptr_ = nullptr;
        size_ = 0;
        fd_ = -1;
    }

    void *ptr_ = nullptr;
    std::size_t size_ = 0;
    int fd_ = -1;
};

} // namespace detail

/// File-backed raster over the raw grid format. Pages are faulted in on
/// demand, so reads never materialize the full image.
class MappedRaster final : public Raster {
  public:
    MappedRaster(RasterMeta meta, detail::MappedFile file)
        : Raster(std::move(meta)), file_(std::move(file)) {
        if (file_.size() < meta_.byte_size()) {
            throw FormatError("raster file shorter than its sidecar dimensions");
        }
    }

  private:
    void read_rows(const Window &win, std::uint8_t *dst) const override {
        const std::size_t ps = meta_.pixel_stride();
        const std::size_t row_bytes = static_cast<std::size_t>(win.w) * ps;
        const std::uint8_t *base = file_.data();
        for (std::int64_t r = 0; r < win.h; ++r) {
            const std::size_t src = (static_cast<std::size_t>(win.y + r) * meta_.width + win.x) * ps;
            std::memcpy(dst + static_cast<std::size_t>(r) * row_bytes, base + src, row_bytes);
        }
    }

    detail::MappedFile file_;
};

// ---------------------------------------------------------------------------
// Raw grid + sidecar container. The sidecar is plain text, one key=value per
// line; doubles are printed with 17 significant digits so they round-trip
// bit-exactly.

inline fs::path sidecar_path(const fs::path &raster_path) {
    fs::path p = raster_path;
    p += ".meta";
    return p;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline std::string sidecar_text(const RasterMeta &meta) {
    std::ostringstream os;
    os << "width=" << meta.width << "\n";
    os << "height=" << meta.height << "\n";
    os << "bands=" << meta.bands << "\n";
    os << "sample_type=" << sample_type_name(meta.type) << "\n";
    if (meta.geo) {
        const GeoTransform &g = *meta.geo;
        os << "origin_x=" << detail::format_double(g.origin_x) << "\n";
        os << "origin_y=" << detail::format_double(g.origin_y) << "\n";
        os << "pixel_size_x=" << detail::format_double(g.pixel_size_x) << "\n";
        os << "pixel_size_y=" << detail::format_double(g.pixel_size_y) << "\n";
        os << "skew_x=" << detail::format_double(g.skew_x) << "\n";
        os << "skew_y=" << detail::format_double(g.skew_y) << "\n";
        os << "crs_id=" << g.crs_id << "\n";
    }
    if (meta.nodata) {
        os << "nodata=" << detail::format_double(*meta.nodata) << "\n";
    }
    return os.str();
}

inline RasterMeta parse_sidecar(const std::string &text, const std::string &origin_hint) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("bad sidecar line in " + origin_hint + ": " + line);
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const char *k) -> const std::string & {
        auto it = kv.find(k);
        if (it == kv.end()) {
            throw FormatError(std::string("sidecar missing key ") + k + " in " + origin_hint);
        }
        return it->second;
    };
    RasterMeta meta;
    meta.width = std::stoll(need("width"));
    meta.height = std::stoll(need("height"));
    meta.bands = std::stoi(need("bands"));
    meta.type = sample_type_from_name(need("sample_type"));
    if (meta.width <= 0 || meta.height <= 0 || meta.bands <= 0) {
        throw FormatError("non-positive raster dimensions in " + origin_hint);
    }
    if (kv.count("origin_x")) {
        GeoTransform g;
        g.origin_x = std::stod(need("origin_x"));
        g.origin_y = std::stod(need("origin_y"));
        g.pixel_size_x = std::stod(need("pixel_size_x"));
        g.pixel_size_y = std::stod(need("pixel_size_y"));
        g.skew_x = std::stod(need("skew_x"));
        g.skew_y = std::stod(need("skew_y"));
        if (kv.count("crs_id")) {
            g.crs_id = kv["crs_id"];
        }
        meta.geo = g;
    }
    if (kv.count("nodata")) {
        meta.nodata = std::stod(kv["nodata"]);
    }
    return meta;
}

inline void write_file_atomic(const fs::path &path, const void *data, std::size_t n) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw IoError("cannot write " + tmp.string());
        }
        os.write(static_cast<const char *>(data), static_cast<std::streamsize>(n));
        if (!os) {
            throw IoError("short write to " + tmp.string());
        }
    }
    crash_point();
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " -> " + path.string());
    }
    crash_point();
}

inline void write_file_atomic(const fs::path &path, const std::string &text) {
    write_file_atomic(path, text.data(), text.size());
}

inline void write_file_atomic(const fs::path &path, const std::vector<std::uint8_t> &bytes) {
    write_file_atomic(path, bytes.data(), bytes.size());
}

inline std::vector<std::uint8_t> read_file(const fs::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot read " + path.string());
    }
    is.seekg(0, std::ios::end);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(is.tellg()));
    is.seekg(0);
    is.read(reinterpret_cast<char *>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!is) {
        throw IoError("short read from " + path.string());
    }
    return out;
}

/// Write a raster as the raw grid + sidecar pair.
inline void write_raw_raster(const fs::path &path, const RasterMeta &meta,
                             const std::uint8_t *pixels) {
    write_file_atomic(path, pixels, meta.byte_size());
    write_file_atomic(sidecar_path(path), sidecar_text(meta));
}

inline void write_raw_raster(const fs::path &path, const PixelBuffer &buf,
                             std::optional<GeoTransform> geo = std::nullopt,
                             std::optional<double> nodata = std::nullopt) {
    RasterMeta meta;
    meta.width = buf.width();
    meta.height = buf.height();
    meta.bands = buf.bands();
    meta.type = buf.type();
    meta.geo = std::move(geo);
    meta.nodata = nodata;
    write_raw_raster(path, meta, buf.data());
}

/// Default byte threshold above which rasters stay on disk (file mapping)
/// instead of being loaded whole.
inline constexpr std::size_t kDefaultMemoryBudget = 256ull << 20;

/// Open a raw-grid raster. Small files are loaded into memory, anything over
/// `budget` is memory mapped so arbitrary sizes stay cheap.
inline RasterPtr open_raw_raster(const fs::path &path,
                                 std::size_t budget = kDefaultMemoryBudget) {
    const fs::path side = sidecar_path(path);
    if (!fs::exists(side)) {
        throw IoError("no sidecar " + side.string() + " for raster " + path.string());
    }
    const auto side_bytes = read_file(side);
    RasterMeta meta = parse_sidecar(std::string(side_bytes.begin(), side_bytes.end()), side.string());
    if (meta.byte_size() <= budget) {
        auto bytes = read_file(path);
        if (bytes.size() < meta.byte_size()) {
            throw FormatError("raster file shorter than its sidecar dimensions: " + path.string());
        }
        bytes.resize(meta.byte_size());
        return std::make_shared<MemoryRaster>(std::move(meta), std::move(bytes));
    }
    return std::make_shared<MappedRaster>(std::move(meta), detail::MappedFile::open_readonly(path));
}

/// Banded writer for large outputs: the destination file is created at full
/// size up front and rows are written (and synced) incrementally, so a
/// resumed run can continue into the same file. finalize() writes the
/// sidecar and renames the partial file into place.
class RasterFileWriter {
  public:
    RasterFileWriter(fs::path final_path, RasterMeta meta)
        : final_path_(std::move(final_path)), meta_(std::move(meta)) {
        partial_path_ = final_path_;
        partial_path_ += ".partial";
        file_ = detail::MappedFile::open_readwrite(partial_path_, meta_.byte_size());
    }

    const RasterMeta &meta() const { return meta_; }

    /// Copy a full-width band of rows [y0, y0+rows) into the output.
    void write_rows(std::int64_t y0, std::int64_t rows, const std::uint8_t *src) {
        const std::size_t rs = meta_.row_stride();
        std::memcpy(file_.data() + static_cast<std::size_t>(y0) * rs, src,
                    static_cast<std::size_t>(rows) * rs);
    }

    /// Copy a block into the output at the given window (row-major src).
    void write_block(const Window &win, const std::uint8_t *src) {
        const std::size_t ps = meta_.pixel_stride();
        const std::size_t src_row = static_cast<std::size_t>(win.w) * ps;
        for (std::int64_t r = 0; r < win.h; ++r) {
            std::memcpy(file_.data() + (static_cast<std::size_t>(win.y + r) * meta_.width + win.x) * ps,
                        src + static_cast<std::size_t>(r) * src_row, src_row);
        }
    }

    std::uint8_t *data() { return file_.data(); }

    void sync() { file_.sync(); }

    std::uint64_t checksum_rows(std::int64_t y0, std::int64_t rows) const {
        const std::size_t rs = meta_.row_stride();
        return fnv1a64(file_.data() + static_cast<std::size_t>(y0) * rs,
                       static_cast<std::size_t>(rows) * rs);
    }

    void finalize() {
        file_.sync();
        file_ = detail::MappedFile();
        crash_point();
        std::error_code ec;
        fs::rename(partial_path_, final_path_, ec);
        if (ec) {
            throw IoError("cannot rename " + partial_path_.string());
        }
        write_file_atomic(sidecar_path(final_path_), sidecar_text(meta_));
        finalized_ = true;
    }

    bool finalized() const { return finalized_; }

  private:
    fs::path final_path_;
    fs::path partial_path_;
    RasterMeta meta_;
    detail::MappedFile file_;
    bool finalized_ = false;
};

} // namespace geoseg
