#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <geoseg/survey.hpp>

using namespace geoseg;
using namespace geoseg::survey;

TEST_CASE("cording interval for Chayote leaves") {
    const auto iv = cording_interval({"chayote", {0.15, 0.35}});
    CHECK(iv.lower == Catch::Approx(0.05));
    CHECK(iv.upper == Catch::Approx(0.35 / 3.0));
}

TEST_CASE("cording interval for dirt-road tire tracks") {
    const auto iv = cording_interval({"dirt", {0.4, 0.85}});
    CHECK(iv.lower == Catch::Approx(0.4 / 3.0));
    CHECK(iv.upper == Catch::Approx(0.85 / 3.0));
}

TEST_CASE("cording interval for asphalt roads") {
    const auto iv = cording_interval({"asphalt", {3.0, 8.0}});
    CHECK(iv.lower == Catch::Approx(1.0));
    CHECK(iv.upper == Catch::Approx(8.0 / 3.0));
}

TEST_CASE("interval uses min and max over many measurements") {
    const auto iv = cording_interval({"f", {0.6, 0.3, 0.9, 0.45}});
    CHECK(iv.lower == Catch::Approx(0.1));
    CHECK(iv.upper == Catch::Approx(0.3));
}

TEST_CASE("empty or non-positive measurements are rejected") {
    CHECK_THROWS_AS(cording_interval({"f", {}}), ConfigError);
    CHECK_THROWS_AS(cording_interval({"f", {0.5, -0.1}}), ConfigError);
}

TEST_CASE("bundled fixtures reproduce the published intervals") {
    // value, decimals printed in the source material
    struct Expect {
        const char *name;
        double lo, hi;
        double tol_lo, tol_hi;
    };
    const std::vector<Expect> expected = {
        {"chayote-leaves", 0.05, 0.117, 1e-9, 1e-3},
        {"dirt-road-tracks", 0.13, 0.28, 5e-3, 5e-3},
        {"asphalt-roads", 1.0, 2.67, 1e-9, 5e-3},
        {"cows", 0.172, 0.23, 1e-3, 1e-9},
        {"sheep", 0.147, 0.22, 1e-3, 1e-9},
        {"vitis-leaves", 0.016, 0.05, 1e-3, 1e-9},
    };
    const auto fixtures = cording_fixtures();
    REQUIRE(fixtures.size() == expected.size());
    for (const auto &e : expected) {
        const auto it = std::find_if(fixtures.begin(), fixtures.end(),
                                     [&](const CordingFixture &f) { return f.name == e.name; });
        REQUIRE(it != fixtures.end());
        CHECK(std::abs(it->interval.lower - e.lo) <= e.tol_lo);
        CHECK(std::abs(it->interval.upper - e.hi) <= e.tol_hi);
    }
}

TEST_CASE("intervals scale exactly with the measurements") {
    const SvaMeasurements base{"f", {0.2, 0.33, 0.5}};
    const auto iv = cording_interval(base);
    for (const double k : {2.0, 4.0, 0.5, 0.25}) { // powers of two scale exactly
        SvaMeasurements scaled = base;
        for (auto &m : scaled.measurements) {
            m *= k;
        }
        const auto siv = cording_interval(scaled);
        CHECK(siv.lower == k * iv.lower);
        CHECK(siv.upper == k * iv.upper);
    }
}

TEST_CASE("interval ordering: lower <= upper, equal only for constant measurements") {
    std::mt19937_64 rng(8);
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<double> m;
        const int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            m.push_back(0.01 + static_cast<double>(rng() % 1000) / 100.0);
        }
        const auto iv = cording_interval({"f", m});
        CHECK(iv.lower <= iv.upper);
        const bool constant = std::all_of(m.begin(), m.end(), [&](double v) { return v == m[0]; });
        CHECK((iv.lower == iv.upper) == constant);
    }
}

TEST_CASE("area law matches the flight-statistics table") {
    // (gsd, area km^2) rows from the calibration flight table
    const std::vector<std::pair<double, double>> rows = {
        {0.04, 10.12}, {0.08, 40.48},  {0.10, 63.26},   {0.12, 91.09},   {0.15, 142.32},
        {0.30, 569.30}, {0.50, 1581.38}, {0.70, 3099.50}, {1.00, 6325.51},
    };
    for (const auto &[gsd, area] : rows) {
        CHECK(std::abs(area_for_gsd(gsd) - area) / area < 0.005);
    }
    // spot value quoted at <= 0.1%
    CHECK(std::abs(area_for_gsd(0.10) - 63.26) / 63.26 < 0.001);
}

TEST_CASE("plan area is exactly quadratic in GSD at a fixed pixel budget") {
    SurveyCalibration calib;
    calib.base_gsd = 1.0;
    calib.base_area_km2 = 3.0;
    CHECK(area_for_gsd(2.0, calib) == 4.0 * area_for_gsd(1.0, calib));
    CHECK(area_for_gsd(4.0, calib) == 16.0 * area_for_gsd(1.0, calib));
    CHECK(area_for_gsd(8.0, calib) / area_for_gsd(2.0, calib) == 16.0);
}

TEST_CASE("plan_survey derives extent, altitude and duration") {
    const SurveyPlan plan = plan_survey(40.48, 0.08, 512, 0.5, 0);
    // 40.48 km^2 at 0.08 m/px: 6.325e9 px, ~79.5k px square extent
    CHECK(plan.pixels == Catch::Approx(40.48e6 / 0.0064));
    CHECK(plan.extent_px == Catch::Approx(79531).margin(1));
    CHECK(plan.tile_count > 90000);
    // altitude scales linearly from the (0.022 m/px, 75.08 m) calibration
    CHECK(plan.altitude_m == Catch::Approx(75.08 * 0.08 / 0.022));
    CHECK(plan.altitude_warning); // far above the 120 m cap
    CHECK(plan.sufficient);
    CHECK(plan.actions.empty());
    CHECK(plan.workdays > 0.0);
}

TEST_CASE("shortages emit the five actions in recommendation order") {
    const SurveyPlan plan = plan_survey(0.01, 0.08, 512, 0.5, 1000);
    CHECK_FALSE(plan.sufficient);
    REQUIRE(plan.actions.size() == 5);
    CHECK(plan.actions[0].name == "larger-area");
    CHECK(plan.actions[1].name == "decrease-gsd");
    CHECK(plan.actions[2].name == "smaller-tiles");
    CHECK(plan.actions[3].name == "satellite");
    CHECK(plan.actions[4].name == "none");
    for (const auto &a : plan.actions) {
        CHECK_FALSE(a.tradeoff.empty());
    }
}

TEST_CASE("low-altitude plans carry no warning") {
    const SurveyPlan plan = plan_survey(3.06, 0.022, 512, 0.5, 0);
    CHECK(plan.altitude_m == Catch::Approx(75.08));
    CHECK_FALSE(plan.altitude_warning);
    CHECK(plan.workdays == Catch::Approx(0.30));
}

TEST_CASE("plan_survey validates its inputs") {
    CHECK_THROWS_AS(plan_survey(-1.0, 0.08, 512, 0.5, 0), ConfigError);
    CHECK_THROWS_AS(plan_survey(1.0, 0.0, 512, 0.5, 0), ConfigError);
}

TEST_CASE("sufficiency check against the 30% convention") {
    CHECK(sufficiency_check(3001, 900).pass);
    const auto shortage = sufficiency_check(254, 900);
    CHECK_FALSE(shortage.pass);
    REQUIRE(shortage.actions.size() == 5);
    CHECK(shortage.actions.front().name == "larger-area");
    CHECK(sufficiency_check(0, 0).pass); // zero threshold always passes

    CHECK(threshold_from_reference(3001) == 901);
    CHECK(threshold_from_reference(3000) == 900);
}
