#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include <geoseg/journal.hpp>

#include "helpers.hpp"

using namespace geoseg;

TEST_CASE("commits survive reopening the journal") {
    testutil::TempDir tmp;
    {
        Journal j(tmp / "journal.jsonl");
        j.commit("split", "band:0", 0x1234);
        j.commit("split", "band:1");
        j.commit("split", "done");
        CHECK(j.has("split", "band:0"));
    }
    Journal j(tmp / "journal.jsonl");
    CHECK(j.has("split", "band:0"));
    CHECK(j.has("split", "band:1"));
    CHECK(j.task_done("split"));
    CHECK_FALSE(j.has("merge", "band:0"));
    CHECK(j.entries().size() == 3);
    CHECK(j.entries()[0].payload_hash == 0x1234);
}

TEST_CASE("an empty or absent journal is a fresh run") {
    testutil::TempDir tmp;
    Journal j(tmp / "journal.jsonl");
    CHECK(j.entries().empty());
    CHECK_FALSE(j.task_done("split"));
}

TEST_CASE("a torn trailing line is ignored, prior entries are honored") {
    testutil::TempDir tmp;
    {
        Journal j(tmp / "journal.jsonl");
        j.commit("split", "band:0");
        j.commit("split", "band:1");
    }
    {
        // simulate a crash mid-append: half a line, no newline
        std::ofstream os(tmp / "journal.jsonl", std::ios::app | std::ios::binary);
        os << R"({"task":"split","cp":"band:2","payload":"00000)";
    }
    Journal j(tmp / "journal.jsonl");
    CHECK(j.has("split", "band:0"));
    CHECK(j.has("split", "band:1"));
    CHECK_FALSE(j.has("split", "band:2"));
    CHECK(j.entries().size() == 2);

    // appending after recovery still works
    j.commit("split", "band:2");
    Journal k(tmp / "journal.jsonl");
    CHECK(k.has("split", "band:2"));
}

TEST_CASE("a tampered line fails its integrity hash") {
    testutil::TempDir tmp;
    {
        Journal j(tmp / "journal.jsonl");
        j.commit("split", "band:0");
    }
    auto bytes = read_file(tmp / "journal.jsonl");
    std::string text(bytes.begin(), bytes.end());
    const auto pos = text.find("band:0");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 6, "band:9");
    {
        std::ofstream os(tmp / "journal.jsonl", std::ios::trunc | std::ios::binary);
        os << text;
    }
    Journal j(tmp / "journal.jsonl");
    CHECK_FALSE(j.has("split", "band:9"));
    CHECK(j.entries().empty());
}

TEST_CASE("exactly one pipeline instance may own a workspace") {
    testutil::TempDir tmp;
    WorkspaceLock lock(tmp.path());
    CHECK_THROWS_AS(WorkspaceLock(tmp.path()), ConfigError);
}

TEST_CASE("the lock is released on destruction") {
    testutil::TempDir tmp;
    { WorkspaceLock lock(tmp.path()); }
    WorkspaceLock again(tmp.path());
}
