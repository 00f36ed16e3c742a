#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoseg/common.hpp"
#include "geoseg/tiling.hpp"

namespace geoseg::survey {

enum class ShapeHint { RectangularShortSide, CircularDiameter, IrregularMeanSegment };

/// Field measurements of a feature's smallest visible attribute, in metres.
struct SvaMeasurements {
    std::string feature;
    std::vector<double> measurements;
    ShapeHint shape = ShapeHint::RectangularShortSide;
};

/// Open interval of critical GSD in m/px.
struct CordingInterval {
    double lower = 0.0;
    double upper = 0.0;
};

/// The critical-GSD interval for a feature: (min SVA / 3, max SVA / 3).
/// Sampling much finer than the lower bound buys little; sampling coarser
/// than the upper bound starves the model of the identifying attribute.
inline CordingInterval cording_interval(const SvaMeasurements &m) {
    if (m.measurements.empty()) {
        throw ConfigError("cording interval needs at least one SVA measurement");
    }
    for (double v : m.measurements) {
        if (!(v > 0.0)) {
            throw ConfigError("SVA measurements must be positive");
        }
    }
    const auto [lo, hi] = std::minmax_element(m.measurements.begin(), m.measurements.end());
    return {*lo / 3.0, *hi / 3.0};
}

struct CordingFixture {
    std::string name;
    double sva_min_m;
    double sva_max_m;
    CordingInterval interval;
};

/// Reference intervals for features with published SVA ranges.
inline std::vector<CordingFixture> cording_fixtures() {
    auto make = [](std::string name, double lo, double hi) {
        CordingFixture f{std::move(name), lo, hi, {}};
        f.interval = cording_interval({f.name, {lo, hi}});
        return f;
    };
    return {
        make("chayote-leaves", 0.15, 0.35),
        make("dirt-road-tracks", 0.4, 0.85),
        make("asphalt-roads", 3.0, 8.0),
        make("cows", 0.517, 0.69),
        make("sheep", 0.44, 0.66),
        make("vitis-leaves", 0.05, 0.15),
    };
}

// ---------------------------------------------------------------------------
// Survey planning

/// Calibration anchor: one flown survey whose statistics scale to others.
/// Defaults are a DJI Mavic 3M flight at native quality.
struct SurveyCalibration {
    double base_gsd = 0.022;      // m/px
    double base_altitude_m = 75.08;
    double base_area_km2 = 3.06;
    double base_workdays = 0.30;  // 8h workdays
};

/// Area that keeps the pixel budget of the calibration survey at a coarser
/// GSD: quadratic in the GSD ratio.
inline double area_for_gsd(double gsd, const SurveyCalibration &calib = {}) {
    if (!(gsd > 0.0)) {
        throw ConfigError("GSD must be positive");
    }
    const double ratio = gsd / calib.base_gsd;
    return calib.base_area_km2 * ratio * ratio;
}

enum class Action { None, LargerArea, DecreaseGsd, SmallerTiles, Satellite };

struct ActionAdvice {
    Action action;
    std::string name;
    std::string tradeoff;
};

/// The data-shortage menu, in recommendation order.
inline std::vector<ActionAdvice> shortage_actions() {
    return {
        {Action::LargerArea, "larger-area",
         "survey duration increases; the model receives sufficient data at the desired GSD"},
        {Action::DecreaseGsd, "decrease-gsd",
         "survey duration increases and unnecessary detail may be captured, but the imagery can "
         "be downscaled later and supports future analysis of smaller features"},
        {Action::SmallerTiles, "smaller-tiles",
         "survey duration unaffected; smaller tiles may reduce model performance"},
        {Action::Satellite, "satellite",
         "no flight needed; commercial VHR products reach ~0.15 m/px but can be noisier and "
         "cloud-occluded"},
        {Action::None, "none",
         "survey duration unaffected; a too-small dataset risks overfitting"},
    };
}

/// Most countries cap UAV flights at 120 m; plans above it carry a warning.
inline constexpr double kLegalAltitudeCap = 120.0;

struct SurveyPlan {
    double gsd = 0.0;            // m/px
    double area_km2 = 0.0;
    double pixels = 0.0;
    std::int64_t extent_px = 0;  // implied square extent
    std::int64_t tile_count = 0;
    std::int64_t train_tile_estimate = 0;
    double altitude_m = 0.0;
    bool altitude_warning = false;
    double workdays = 0.0;       // approximate, see duration model note
    bool sufficient = true;
    std::vector<ActionAdvice> actions; // empty when sufficient
};

/// Feasibility estimate for a survey: pixel and tile yield of the area at
/// the requested GSD, flight altitude scaled linearly from the calibration,
/// and a duration estimate assuming areal coverage rate grows linearly with
/// altitude. Durations are approximate by construction.
inline SurveyPlan plan_survey(double area_km2, double gsd, std::int64_t tile_px, double stride,
                              std::int64_t min_train_tiles,
                              const SurveyCalibration &calib = {}) {
    if (!(area_km2 > 0.0) || !(gsd > 0.0) || tile_px <= 0) {
        throw ConfigError("survey plan needs positive area, GSD and tile size");
    }
    SurveyPlan plan;
    plan.gsd = gsd;
    plan.area_km2 = area_km2;
    plan.pixels = area_km2 * 1e6 / (gsd * gsd);
    plan.extent_px = std::max<std::int64_t>(1, round_half_up(std::sqrt(plan.pixels)));
    if (plan.extent_px >= tile_px) {
        const auto grid = tiling::plan_grid(plan.extent_px, plan.extent_px, tile_px, tile_px, stride);
        plan.tile_count = grid.count();
    } else {
        plan.tile_count = 0;
    }
    // ~70% of tiles feed training under the usual 70/10/20 split.
    plan.train_tile_estimate = static_cast<std::int64_t>(plan.tile_count * 0.7);

    const double alt_ratio = gsd / calib.base_gsd;
    plan.altitude_m = calib.base_altitude_m * alt_ratio;
    plan.altitude_warning = plan.altitude_m > kLegalAltitudeCap;
    plan.workdays = calib.base_workdays * (area_km2 / calib.base_area_km2) / alt_ratio;

    plan.sufficient = plan.train_tile_estimate >= min_train_tiles;
    if (!plan.sufficient) {
        plan.actions = shortage_actions();
    }
    return plan;
}

struct SufficiencyResult {
    std::int64_t train_tiles = 0;
    std::int64_t threshold = 0;
    bool pass = true;
    std::vector<ActionAdvice> actions;
};

/// Compare an existing train set against a minimum tile count. The default
/// threshold convention is 30% of a reference dataset's train-set size.
inline SufficiencyResult sufficiency_check(std::int64_t train_tiles, std::int64_t min_train_tiles) {
    SufficiencyResult r;
    r.train_tiles = train_tiles;
    r.threshold = min_train_tiles;
    r.pass = train_tiles >= min_train_tiles;
    if (!r.pass) {
        r.actions = shortage_actions();
    }
    return r;
}

inline std::int64_t threshold_from_reference(std::int64_t reference_train_tiles,
                                             double fraction = 0.30) {
    return static_cast<std::int64_t>(std::ceil(fraction * static_cast<double>(reference_train_tiles)));
}

inline nlohmann::json plan_to_json(const SurveyPlan &plan) {
    nlohmann::json j;
    j["gsd"] = plan.gsd;
    j["area_km2"] = plan.area_km2;
    j["pixels"] = plan.pixels;
    j["extent_px"] = plan.extent_px;
    j["tile_count"] = plan.tile_count;
    j["train_tile_estimate"] = plan.train_tile_estimate;
    j["altitude_m"] = plan.altitude_m;
    j["altitude_warning"] = plan.altitude_warning;
    j["workdays_approx"] = plan.workdays;
    j["sufficient"] = plan.sufficient;
    nlohmann::json actions = nlohmann::json::array();
    for (const auto &a : plan.actions) {
        actions.push_back({{"action", a.name}, {"tradeoff", a.tradeoff}});
    }
    j["actions"] = actions;
    return j;
}

} // namespace geoseg::survey
