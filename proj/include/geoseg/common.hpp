#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string_view>
#include <string>

#include <unistd.h>

namespace geoseg {

namespace fs = std::filesystem;

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad tile/grid/stride/config parameters.
class ConfigError : public Error {
    using Error::Error;
};
// Window outside raster bounds.
class BoundsError : public Error {
    using Error::Error;
};
class IoError : public Error {
    using Error::Error;
};
// Mismatched raster/tile dimensions.
class ShapeError : public Error {
    using Error::Error;
};
// Malformed file contents (bad magic, truncation, inconsistent headers).
class FormatError : public Error {
    using Error::Error;
};
// Semantically invalid data (e.g. class id out of range).
class DataError : public Error {
    using Error::Error;
};
// A required per-tile artifact is missing.
class IncompleteError : public Error {
    using Error::Error;
};

inline std::int64_t round_half_up(double x) {
    return static_cast<std::int64_t>(std::floor(x + 0.5));
}

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(const void *data, std::size_t n, std::uint64_t h = kFnvOffset) {
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string &s, std::uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

// String literals must not fall into the (void*, size_t) overload.
inline std::uint64_t fnv1a64(const char *s, std::uint64_t h = kFnvOffset) {
    return fnv1a64(static_cast<const void *>(s), std::char_traits<char>::length(s), h);
}

inline std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// 64-bit mix (splitmix64 finalizer). Used to derive independent seeds
// per tile / per stream from one user seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

namespace detail {

// Crash injection for the fault-tolerance harness. When GEOSEG_CRASH_AT=N is
// set, the process dies hard (no unwinding, like SIGKILL) at the N-th crash
// point it passes. GEOSEG_CRASH_COUNT_FILE=path makes a surviving process
// record how many points it passed, so harnesses can sample valid N.
class CrashInjector {
  public:
    static CrashInjector &instance() {
        static CrashInjector inj;
        return inj;
    }

    void hit() {
        const std::uint64_t n = counter_.fetch_add(1, std::memory_order_relaxed);
        if (armed_ && n == crash_at_) {
            _exit(137);
        }
    }

  private:
    CrashInjector() {
        if (const char *at = std::getenv("GEOSEG_CRASH_AT")) {
            armed_ = true;
            crash_at_ = std::strtoull(at, nullptr, 10);
        }
        if (const char *f = std::getenv("GEOSEG_CRASH_COUNT_FILE")) {
            count_file_ = strdup(f); // leaked: must outlive static destruction
            std::atexit(&CrashInjector::write_count);
        }
    }

    static void write_count() {
        auto &inj = instance();
        if (!inj.count_file_) {
            return;
        }
        if (FILE *fp = std::fopen(inj.count_file_, "w")) {
            std::fprintf(fp, "%llu\n",
                         static_cast<unsigned long long>(inj.counter_.load()));
            std::fclose(fp);
        }
    }

    std::atomic<std::uint64_t> counter_{0};
    std::uint64_t crash_at_ = 0;
    bool armed_ = false;
    const char *count_file_ = nullptr;
};

} // namespace detail

inline void crash_point() {
    detail::CrashInjector::instance().hit();
}

} // namespace geoseg
