#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoseg/codec.hpp"
#include "geoseg/common.hpp"
#include "geoseg/degrade.hpp"
#include "geoseg/journal.hpp"
#include "geoseg/logits.hpp"
#include "geoseg/merge.hpp"
#include "geoseg/metrics.hpp"
#include "geoseg/sampling.hpp"
#include "geoseg/survey.hpp"
#include "geoseg/tiling.hpp"

namespace geoseg::pipeline {

/// A task failed; the message names it.
class TaskError : public Error {
    using Error::Error;
};

inline const std::vector<std::string> &known_tasks() {
    static const std::vector<std::string> names = {"split",         "weights", "split-set",
                                                   "degrade",       "predict-check", "merge",
                                                   "score",         "plan"};
    return names;
}

/// Declarative pipeline description: a workspace root plus per-task
/// parameter objects. Tasks absent from `tasks` do not run.
struct Config {
    fs::path workspace = ".";
    std::string dataset = "dataset";
    nlohmann::json tasks = nlohmann::json::object();

    static Config from_json(const nlohmann::json &j, const fs::path &workspace_override = {}) {
        Config cfg;
        if (j.contains("workspace")) {
            cfg.workspace = j.at("workspace").get<std::string>();
        }
        if (!workspace_override.empty()) {
            cfg.workspace = workspace_override;
        }
        cfg.dataset = j.value("dataset", cfg.dataset);
        cfg.tasks = j.value("tasks", nlohmann::json::object());
        for (const auto &item : cfg.tasks.items()) {
            bool known = false;
            for (const auto &name : known_tasks()) {
                known = known || name == item.key();
            }
            if (!known) {
                throw ConfigError("unknown task in config: " + item.key());
            }
        }
        return cfg;
    }

    static Config from_file(const fs::path &path, const fs::path &workspace_override = {}) {
        const auto bytes = read_file(path);
        return from_json(nlohmann::json::parse(bytes.begin(), bytes.end()), workspace_override);
    }

    bool enabled(const std::string &task) const { return tasks.contains(task); }

    nlohmann::json params(const std::string &task) const {
        return tasks.value(task, nlohmann::json::object());
    }

    fs::path resolve(const std::string &rel_or_abs) const {
        fs::path p(rel_or_abs);
        return p.is_absolute() ? p : workspace / p;
    }

    fs::path dataset_dir() const {
        const std::string ds = params("split").value("out", dataset);
        return resolve(ds);
    }
};

namespace detail {

inline std::map<std::string, std::set<std::string>> dependency_graph(const Config &cfg) {
    std::map<std::string, std::set<std::string>> deps;
    for (const auto &name : known_tasks()) {
        deps[name] = {};
    }
    deps["weights"] = {"split"};
    deps["split-set"] = {"split"};
    deps["degrade"] = {"split"};
    deps["predict-check"] = {"split"};
    deps["merge"] = {"split"};
    deps["score"] = {"split"};
    if (cfg.enabled("predict-check")) {
        deps["merge"].insert("predict-check");
        deps["score"].insert("predict-check");
    }
    if (cfg.enabled("split-set")) {
        deps["weights"].insert("split-set");
        deps["score"].insert("split-set");
    }
    if (cfg.enabled("merge") && cfg.params("score").value("mode", "tiles") == std::string("merged")) {
        deps["score"].insert("merge");
    }
    // Config may declare extra ordering constraints.
    for (const auto &item : cfg.tasks.items()) {
        if (item.value().is_object() && item.value().contains("depends")) {
            for (const auto &d : item.value().at("depends")) {
                deps[item.key()].insert(d.get<std::string>());
            }
        }
    }
    return deps;
}

/// Topological order of the enabled tasks; throws ConfigError on cycles.
inline std::vector<std::string> execution_order(const Config &cfg) {
    const auto deps = dependency_graph(cfg);
    std::vector<std::string> order;
    std::map<std::string, int> state; // 0 unseen, 1 visiting, 2 done
    std::function<void(const std::string &)> visit = [&](const std::string &name) {
        if (state[name] == 2) {
            return;
        }
        if (state[name] == 1) {
            throw ConfigError("dependency cycle through task " + name);
        }
        state[name] = 1;
        for (const auto &d : deps.at(name)) {
            visit(d);
        }
        state[name] = 2;
        if (cfg.enabled(name)) {
            order.push_back(name);
        }
    };
    for (const auto &name : known_tasks()) {
        visit(name);
    }
    return order;
}

inline predict::PredictorSource parse_predictor(const nlohmann::json &j, const Config &cfg) {
    predict::PredictorSource src;
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "oracle") {
            src.kind = predict::PredictorSource::Kind::Oracle;
        } else {
            src.kind = predict::PredictorSource::Kind::Directory;
            src.directory = cfg.resolve(s);
        }
        return src;
    }
    const std::string kind = j.value("kind", "directory");
    if (kind == "directory") {
        src.kind = predict::PredictorSource::Kind::Directory;
        src.directory = cfg.resolve(j.at("dir").get<std::string>());
    } else if (kind == "oracle") {
        src.kind = predict::PredictorSource::Kind::Oracle;
        src.seed = j.value("seed", std::uint64_t{0});
    } else if (kind == "noisy-oracle") {
        src.kind = predict::PredictorSource::Kind::NoisyOracle;
        src.noise_rate = j.value("noise", 0.0);
        src.seed = j.value("seed", std::uint64_t{0});
    } else {
        throw ConfigError("unknown predictor kind: " + kind);
    }
    return src;
}

inline std::vector<std::int64_t> indices_for_subset(const tiling::DatasetLayout &ds,
                                                    const tiling::GridInfo &info,
                                                    const std::string &subset) {
    if (subset == "all" || !fs::exists(ds.split_file())) {
        std::vector<std::int64_t> all(static_cast<std::size_t>(info.grid.count()));
        for (std::int64_t i = 0; i < info.grid.count(); ++i) {
            all[static_cast<std::size_t>(i)] = i;
        }
        return all;
    }
    const auto sets = sampling::read_split(ds);
    if (subset == "train") return sets.train;
    if (subset == "val") return sets.val;
    if (subset == "test") return sets.test;
    throw ConfigError("unknown subset: " + subset);
}

// --- task bodies -----------------------------------------------------------

inline void run_split(const Config &cfg, Journal &journal, const std::string &task_id) {
    const auto p = cfg.params("split");
    const RasterPtr image = codec::open_raster(cfg.resolve(p.at("image").get<std::string>()));
    RasterPtr labels;
    if (p.contains("labels")) {
        labels = codec::open_raster(cfg.resolve(p.at("labels").get<std::string>()));
    }
    const std::int64_t tile = p.value("tile", 512);
    const double stride = p.value("stride", 0.5);
    tiling::TileGrid grid = tiling::plan_grid(image->width(), image->height(), tile,
                                              p.value("tile_h", tile), stride);
    grid.source_geo = image->geo();
    tiling::SplitOptions opts;
    opts.journal = &journal;
    opts.task_name = task_id;
    opts.class_count = p.value("classes", 0);
    tiling::split_raster(*image, labels.get(), grid, cfg.dataset_dir(), opts);
}

inline void run_weights(const Config &cfg, Journal &) {
    const tiling::DatasetLayout ds{cfg.dataset_dir()};
    const auto info = tiling::read_grid_info(ds);
    if (!info.has_labels) {
        throw TaskError("weights: dataset has no labels");
    }
    const auto subset = cfg.params("weights").value("subset", "train");
    const auto indices = indices_for_subset(ds, info, subset);
    const auto hists = sampling::class_histograms(ds, indices, info.class_count);
    const auto weights = sampling::sample_weights(hists.per_tile, hists.totals);
    sampling::write_weights(ds, indices, weights);
}

inline void run_split_set(const Config &cfg, Journal &) {
    const auto p = cfg.params("split-set");
    const tiling::DatasetLayout ds{cfg.dataset_dir()};
    const auto info = tiling::read_grid_info(ds);
    sampling::SplitSpec spec;
    const std::string method = p.value("method", "horizontal");
    spec.method = method == "manual" ? sampling::SplitMethod::Manual
                                     : sampling::SplitMethod::Horizontal;
    if (p.contains("fractions")) {
        const auto &f = p.at("fractions");
        spec.train_fraction = f.at(0).get<double>();
        spec.val_fraction = f.at(1).get<double>();
        spec.test_fraction = f.at(2).get<double>();
    }
    spec.gap_rows = p.value("gap", 1);
    spec.seed = p.value("seed", std::uint64_t{0});
    sampling::SplitSets sets;
    if (spec.method == sampling::SplitMethod::Manual) {
        const RasterPtr regions = codec::open_raster(cfg.resolve(p.at("regions").get<std::string>()));
        sets = sampling::split_manual(info.grid, *regions);
    } else {
        sets = sampling::split_horizontal(info.grid, spec);
    }
    sampling::write_split(ds, sets, spec);
}

inline void run_degrade(const Config &cfg, Journal &journal, const std::string &task_id) {
    const auto p = cfg.params("degrade");
    const tiling::DatasetLayout ds{cfg.dataset_dir()};
    const auto info = tiling::read_grid_info(ds);

    degrade::DegradeSpec spec;
    const std::string m = p.value("method", "a");
    spec.method = m == "b" ? degrade::Method::B : m == "c" ? degrade::Method::C : degrade::Method::A;
    spec.target_gsd = p.at("target_gsd").get<double>();
    if (p.contains("source_gsd")) {
        spec.source_gsd = p.at("source_gsd").get<double>();
    } else if (info.grid.source_geo) {
        spec.source_gsd = info.grid.source_geo->pixel_size_x;
    } else {
        throw TaskError("degrade: no source GSD (dataset has no georeference)");
    }

    std::string out = p.value("out", std::string{});
    if (out.empty()) {
        out = cfg.dataset_dir().string() + "-gsd" + std::to_string(spec.target_gsd);
    }
    if (spec.method == degrade::Method::C) {
        const RasterPtr image = codec::open_raster(cfg.resolve(p.at("image").get<std::string>()));
        RasterPtr labels;
        if (p.contains("labels")) {
            labels = codec::open_raster(cfg.resolve(p.at("labels").get<std::string>()));
        }
        tiling::SplitOptions opts;
        opts.journal = &journal;
        opts.task_name = task_id;
        opts.class_count = info.class_count;
        degrade::degrade_mosaic_c(*image, labels.get(), spec, info.grid.tile_w, info.grid.tile_h,
                                  info.grid.stride, cfg.resolve(out), opts);
    } else {
        degrade::degrade_dataset(ds, cfg.resolve(out), spec);
    }
}

inline void run_predict_check(const Config &cfg, Journal &) {
    const auto p = cfg.params("predict-check");
    const tiling::DatasetLayout ds{cfg.dataset_dir()};
    const auto info = tiling::read_grid_info(ds);
    const auto desc = parse_predictor(p.at("logits"), cfg);
    const auto source = predict::make_source(desc, ds, info);
    const auto missing = predict::missing_tiles(*source, info.grid.count());
    if (!missing.empty()) {
        throw IncompleteError("predict-check: " + std::to_string(missing.size()) +
                              " tiles have no logits (first missing: " +
                              std::to_string(missing.front()) + ")");
    }
    source->get(0); // validates header shape and class count against grid.json
}

inline void run_merge(const Config &cfg, Journal &journal, const std::string &task_id) {
    const auto p = cfg.params("merge");
    const tiling::DatasetLayout ds{cfg.dataset_dir()};
    const auto info = tiling::read_grid_info(ds);
    const auto desc = parse_predictor(p.at("logits"), cfg);
    const auto source = predict::make_source(desc, ds, info);
    const std::string strategy = p.value("strategy", "crop");
    merge::MergeOptions opts;
    opts.journal = &journal;
    opts.task_name = task_id;
    opts.bands_per_checkpoint = p.value("bands_per_checkpoint", 64);
    const fs::path out = cfg.resolve(p.value("out", "map.bin"));
    merge::merge_to_file(strategy == "logit" ? merge::Strategy::Logit : merge::Strategy::Crop,
                         info.grid, *source, out, opts);
}

inline void run_score(const Config &cfg, Journal &) {
    const auto p = cfg.params("score");
    const tiling::DatasetLayout ds{cfg.dataset_dir()};
    const auto info = tiling::read_grid_info(ds);
    if (!info.has_labels) {
        throw TaskError("score: dataset has no labels");
    }
    std::set<int> exclude;
    if (p.contains("exclude")) {
        for (const auto &e : p.at("exclude")) {
            exclude.insert(e.get<int>());
        }
    }
    const std::string mode = p.value("mode", "tiles");
    metrics::ScoreReport report;
    if (mode == "merged") {
        const fs::path map_path = cfg.resolve(p.value("map", cfg.params("merge").value("out", "map.bin")));
        const auto map = merge::read_segmentation_map(map_path);
        // merged mode scores against the source label raster
        const RasterPtr gt = codec::open_raster(cfg.resolve(p.at("gt").get<std::string>()));
        report = metrics::score_merged(map.map, *gt, info.class_count, exclude);
    } else {
        const auto desc = parse_predictor(p.at("logits"), cfg);
        const auto source = predict::make_source(desc, ds, info);
        const auto indices = indices_for_subset(ds, info, p.value("split", "test"));
        report = metrics::score_tiles(indices, *source, ds, info.class_count, exclude);
    }
    const fs::path out = cfg.resolve(p.value("out", "scores.json"));
    write_file_atomic(out, metrics::report_to_json(report).dump(2) + "\n");
}

inline void run_plan(const Config &cfg, Journal &) {
    const auto p = cfg.params("plan");
    survey::SurveyCalibration calib;
    if (p.contains("calibration")) {
        const auto &c = p.at("calibration");
        calib.base_gsd = c.value("gsd", calib.base_gsd);
        calib.base_altitude_m = c.value("altitude_m", calib.base_altitude_m);
        calib.base_area_km2 = c.value("area_km2", calib.base_area_km2);
        calib.base_workdays = c.value("workdays", calib.base_workdays);
    }
    const double area = p.contains("area") ? p.at("area").get<double>()
                                           : survey::area_for_gsd(p.at("gsd").get<double>(), calib);
    const auto plan = survey::plan_survey(area, p.at("gsd").get<double>(), p.value("tile", 512),
                                          p.value("stride", 0.5), p.value("min_train", 0), calib);
    const fs::path out = cfg.resolve(p.value("out", "plan.json"));
    write_file_atomic(out, survey::plan_to_json(plan).dump(2) + "\n");
}

inline void execute_task(const std::string &name, const std::string &task_id, const Config &cfg,
                         Journal &journal) {
    if (name == "split") return run_split(cfg, journal, task_id);
    if (name == "weights") return run_weights(cfg, journal);
    if (name == "split-set") return run_split_set(cfg, journal);
    if (name == "degrade") return run_degrade(cfg, journal, task_id);
    if (name == "predict-check") return run_predict_check(cfg, journal);
    if (name == "merge") return run_merge(cfg, journal, task_id);
    if (name == "score") return run_score(cfg, journal);
    if (name == "plan") return run_plan(cfg, journal);
    throw ConfigError("unknown task: " + name);
}

} // namespace detail

struct RunSummary {
    std::vector<std::string> executed;
    std::vector<std::string> skipped;
};

/// Execute the enabled tasks in dependency order under a workspace lock.
/// Tasks already journaled done are skipped; interrupted tasks resume from
/// their last committed checkpoint, so a rerun always converges on the same
/// artifact bytes as an uninterrupted run.
inline RunSummary run_pipeline(const Config &cfg) {
    fs::create_directories(cfg.workspace);
    WorkspaceLock lock(cfg.workspace);
    Journal journal(cfg.workspace / "journal.jsonl");
    const auto order = detail::execution_order(cfg);

    RunSummary summary;
    for (const auto &name : order) {
        // Journal ids carry a parameter hash: an identical rerun skips, a
        // reconfigured task is new work (done outputs stay immutable).
        const std::string task_id = name + "@" + to_hex(fnv1a64(cfg.params(name).dump()));
        if (journal.task_done(task_id)) {
            summary.skipped.push_back(name);
            continue;
        }
        if (!journal.has(task_id, "start")) {
            journal.commit(task_id, "start");
        }
        try {
            detail::execute_task(name, task_id, cfg, journal);
        } catch (const std::exception &e) {
            throw TaskError("task " + name + " failed: " + e.what());
        }
        journal.commit(task_id, "done");
        summary.executed.push_back(name);
    }
    return summary;
}

struct TaskStatus {
    std::string name;
    std::string state; // pending | running | done
    std::int64_t checkpoints = 0;
};

/// Journal-derived task states. A task with committed work but no done
/// marker reads as "running" (it is resumable, not lost).
inline std::vector<TaskStatus> status(const fs::path &workspace) {
    Journal journal(workspace / "journal.jsonl");
    std::map<std::string, TaskStatus> by_name;
    for (const auto &name : known_tasks()) {
        by_name[name] = {name, "pending", 0};
    }
    for (const auto &e : journal.entries()) {
        const std::string name = e.task.substr(0, e.task.find('@'));
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            continue;
        }
        if (e.checkpoint == "done") {
            it->second.state = "done";
        } else if (it->second.state != "done") {
            it->second.state = "running";
        }
        if (e.checkpoint != "done" && e.checkpoint != "start") {
            ++it->second.checkpoints;
        }
    }
    std::vector<TaskStatus> out;
    for (const auto &name : known_tasks()) {
        out.push_back(by_name[name]);
    }
    return out;
}

} // namespace geoseg::pipeline
