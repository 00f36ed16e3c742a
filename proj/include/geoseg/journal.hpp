#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <json.hpp>

#include "geoseg/common.hpp"

namespace geoseg {

struct JournalEntry {
    std::string task;
    std::string checkpoint;
    std::uint64_t payload_hash = 0;
    std::int64_t ts_ms = 0;
};

// Append-only progress log. One JSON object per line carrying an integrity
// hash over the other fields; a line that fails the hash (the torn tail of a
// crashed append) is skipped with a warning, so readers only ever act on
// fully committed entries.
class Journal {
  public:
    explicit Journal(fs::path path) : path_(std::move(path)) { load(); }

    const fs::path &path() const { return path_; }

    bool has(const std::string &task, const std::string &checkpoint) const {
        std::lock_guard<std::mutex> lock(mu_);
        return index_.count({task, checkpoint}) > 0;
    }

    bool task_done(const std::string &task) const { return has(task, "done"); }

    std::vector<JournalEntry> entries() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_;
    }

    /// Durably append one entry. The line is flushed and fsynced before this
    /// returns, so a commit survives any later crash.
    void commit(const std::string &task, const std::string &checkpoint,
                std::uint64_t payload_hash = 0) {
        JournalEntry e;
        e.task = task;
        e.checkpoint = checkpoint;
        e.payload_hash = payload_hash;
        e.ts_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();

        nlohmann::json j;
        j["task"] = e.task;
        j["cp"] = e.checkpoint;
        j["payload"] = to_hex(e.payload_hash);
        j["ts"] = e.ts_ms;
        j["h"] = to_hex(line_hash(e));
        const std::string line = j.dump() + "\n";

        std::lock_guard<std::mutex> lock(mu_);
        const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
        if (fd < 0) {
            throw IoError("cannot open journal " + path_.string());
        }
        // a torn append may have left the file without a trailing newline
        const std::string out = needs_newline_ ? "\n" + line : line;
        const ssize_t n = ::write(fd, out.data(), out.size());
        if (n != static_cast<ssize_t>(out.size()) || ::fsync(fd) != 0) {
            ::close(fd);
            throw IoError("journal append failed for " + path_.string());
        }
        ::close(fd);
        needs_newline_ = false;
        index_.insert({e.task, e.checkpoint});
        entries_.push_back(std::move(e));
        crash_point();
    }

  private:
    static std::uint64_t line_hash(const JournalEntry &e) {
        return fnv1a64(e.task + "|" + e.checkpoint + "|" + to_hex(e.payload_hash) + "|" +
                       std::to_string(e.ts_ms));
    }

    void load() {
        std::ifstream is(path_, std::ios::binary);
        if (!is) {
            return; // fresh run
        }
        {
            is.seekg(0, std::ios::end);
            const auto size = is.tellg();
            if (size > 0) {
                is.seekg(-1, std::ios::end);
                needs_newline_ = is.get() != '\n';
            }
            is.seekg(0);
            is.clear();
        }
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) {
                continue;
            }
            JournalEntry e;
            bool ok = false;
            try {
                const auto j = nlohmann::json::parse(line);
                e.task = j.at("task").get<std::string>();
                e.checkpoint = j.at("cp").get<std::string>();
                e.payload_hash = std::stoull(j.at("payload").get<std::string>(), nullptr, 16);
                e.ts_ms = j.at("ts").get<std::int64_t>();
                ok = j.at("h").get<std::string>() == to_hex(line_hash(e));
            } catch (...) {
                ok = false;
            }
            if (!ok) {
                std::fprintf(stderr, "geoseg: ignoring corrupt journal line %zu in %s\n",
                             lineno, path_.string().c_str());
                continue;
            }
            index_.insert({e.task, e.checkpoint});
            entries_.push_back(std::move(e));
        }
    }

    fs::path path_;
    mutable std::mutex mu_;
    std::set<std::pair<std::string, std::string>> index_;
    std::vector<JournalEntry> entries_;
    bool needs_newline_ = false;
};

/// Exclusive workspace ownership via flock: released automatically when the
/// process exits, however it exits, so crashes never leave a stale lock.
class WorkspaceLock {
  public:
    explicit WorkspaceLock(const fs::path &workspace) {
        fs::create_directories(workspace);
        path_ = workspace / ".geoseg.lock";
        fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) {
            throw IoError("cannot open lockfile " + path_.string());
        }
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            fd_ = -1;
            throw ConfigError("workspace " + workspace.string() +
                              " is locked by another pipeline instance");
        }
    }

    WorkspaceLock(const WorkspaceLock &) = delete;
    WorkspaceLock &operator=(const WorkspaceLock &) = delete;

    ~WorkspaceLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }

  private:
    fs::path path_;
    int fd_ = -1;
};

} // namespace geoseg
