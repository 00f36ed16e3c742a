// geoseg: fragment orthomosaics into overlapping tile datasets, weight and
// split them, simulate GSD degradation, merge per-tile predictions back into
// georeferenced segmentation maps, score them, and plan field surveys.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <geoseg/geoseg.hpp>

namespace gs = geoseg;
using nlohmann::json;

namespace {

std::vector<double> parse_csv_doubles(const std::string &csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(std::stod(item));
        }
    }
    return out;
}

std::vector<std::int64_t> parse_csv_ints(const std::string &csv) {
    std::vector<std::int64_t> out;
    for (double v : parse_csv_doubles(csv)) {
        out.push_back(static_cast<std::int64_t>(v));
    }
    return out;
}

json predictor_json(const std::string &logits, double noise, std::uint64_t seed) {
    if (logits == "oracle") {
        return {{"kind", "oracle"}, {"seed", seed}};
    }
    if (logits == "noisy-oracle") {
        return {{"kind", "noisy-oracle"}, {"noise", noise}, {"seed", seed}};
    }
    return {{"kind", "directory"}, {"dir", logits}};
}

int run_config(const gs::pipeline::Config &cfg) {
    const auto summary = gs::pipeline::run_pipeline(cfg);
    for (const auto &t : summary.skipped) {
        std::printf("%-14s already done\n", t.c_str());
    }
    for (const auto &t : summary.executed) {
        std::printf("%-14s done\n", t.c_str());
    }
    return 0;
}

/// Build a one-task pipeline so CLI verbs share the journaled execution
/// path with `geoseg run`.
int run_single(const std::string &task, json params, const std::string &workspace) {
    json cfg{{"tasks", {{task, std::move(params)}}}};
    return run_config(gs::pipeline::Config::from_json(cfg, workspace));
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"geospatial segmentation dataset pipeline"};
    app.require_subcommand(1);

    std::string workspace = ".";
    app.add_option("--workspace", workspace, "workspace root (journal, default outputs)")
        ->capture_default_str();

    // --- split ---------------------------------------------------------
    auto *split = app.add_subcommand("split", "fragment an orthomosaic into overlapping tiles");
    std::string split_image, split_labels, split_out = "dataset";
    std::int64_t split_tile = 512;
    double split_stride = 0.5;
    int split_classes = 0;
    split->add_option("--image", split_image, "input orthomosaic")->required();
    split->add_option("--labels", split_labels, "aligned label map (class ids)");
    split->add_option("--tile", split_tile, "tile size in px")->capture_default_str();
    split->add_option("--stride", split_stride, "stride fraction in (0,1]")->capture_default_str();
    split->add_option("--out", split_out, "dataset directory")->capture_default_str();
    split->add_option("--classes", split_classes, "class count (0 = infer from labels)");

    // --- weights -------------------------------------------------------
    auto *weights = app.add_subcommand("weights", "per-tile oversampling weights");
    std::string weights_dataset = "dataset", weights_subset = "train";
    weights->add_option("--dataset", weights_dataset, "dataset directory")->capture_default_str();
    weights->add_option("--subset", weights_subset, "train|val|test|all")->capture_default_str();

    // --- split-set -----------------------------------------------------
    auto *split_set = app.add_subcommand("split-set", "train/val/test split");
    std::string ss_dataset = "dataset", ss_method = "horizontal", ss_fractions = "0.7,0.1,0.2";
    std::string ss_regions;
    std::int64_t ss_gap = 1;
    std::uint64_t ss_seed = 0;
    split_set->add_option("--dataset", ss_dataset, "dataset directory")->capture_default_str();
    split_set->add_option("--method", ss_method, "horizontal|manual")->capture_default_str();
    split_set->add_option("--fractions", ss_fractions, "train,val,test")->capture_default_str();
    split_set->add_option("--gap", ss_gap, "tile-grid rows discarded between sets")
        ->capture_default_str();
    split_set->add_option("--seed", ss_seed, "train shuffle seed")->capture_default_str();
    split_set->add_option("--regions", ss_regions, "region raster for the manual method");

    // --- degrade -------------------------------------------------------
    auto *degrade = app.add_subcommand("degrade", "synthetic GSD degradation");
    std::string dg_dataset = "dataset", dg_method = "a", dg_out, dg_image, dg_labels;
    double dg_target = 0.0, dg_source = 0.0;
    bool dg_ladder = false;
    degrade->add_option("--dataset", dg_dataset, "dataset directory")->capture_default_str();
    degrade->add_option("--method", dg_method, "a|b|c")->capture_default_str();
    degrade->add_option("--target-gsd", dg_target, "target GSD in m/px");
    degrade->add_flag("--ladder", dg_ladder, "degrade to every preset ladder rung");
    degrade->add_option("--source-gsd", dg_source, "source GSD (default: dataset georeference)");
    degrade->add_option("--out", dg_out, "output dataset directory (default: sibling per GSD)");
    degrade->add_option("--image", dg_image, "source orthomosaic (method c)");
    degrade->add_option("--labels", dg_labels, "source label map (method c)");

    // --- merge ---------------------------------------------------------
    auto *merge = app.add_subcommand("merge", "merge per-tile logits into a segmentation map");
    std::string mg_dataset = "dataset", mg_logits, mg_strategy = "crop", mg_out = "map.bin";
    double mg_noise = 0.0;
    std::uint64_t mg_seed = 0;
    merge->add_option("--dataset", mg_dataset, "dataset directory")->capture_default_str();
    merge->add_option("--logits", mg_logits, "logit directory, or oracle|noisy-oracle")->required();
    merge->add_option("--strategy", mg_strategy, "logit|crop")->capture_default_str();
    merge->add_option("--out", mg_out, "output raster path")->capture_default_str();
    merge->add_option("--noise", mg_noise, "noisy-oracle flip rate");
    merge->add_option("--seed", mg_seed, "oracle seed");

    // --- score ---------------------------------------------------------
    auto *score = app.add_subcommand("score", "IoU/Dice scoring");
    std::string sc_dataset = "dataset", sc_logits, sc_split = "test", sc_mode = "tiles";
    std::string sc_map = "map.bin", sc_gt, sc_exclude, sc_out = "scores.json";
    double sc_noise = 0.0;
    std::uint64_t sc_seed = 0;
    score->add_option("--dataset", sc_dataset, "dataset directory")->capture_default_str();
    score->add_option("--logits", sc_logits, "logit directory, or oracle|noisy-oracle");
    score->add_option("--split", sc_split, "train|val|test|all")->capture_default_str();
    score->add_option("--mode", sc_mode, "tiles|merged")->capture_default_str();
    score->add_option("--map", sc_map, "merged map (merged mode)")->capture_default_str();
    score->add_option("--gt", sc_gt, "ground-truth label raster (merged mode)");
    score->add_option("--exclude", sc_exclude, "class ids excluded from the means, e.g. 2");
    score->add_option("--out", sc_out, "scores file")->capture_default_str();
    score->add_option("--noise", sc_noise, "noisy-oracle flip rate");
    score->add_option("--seed", sc_seed, "oracle seed");

    // --- cording -------------------------------------------------------
    auto *cording = app.add_subcommand("cording", "critical-GSD interval from SVA measurements");
    std::string cd_measurements, cd_feature = "feature";
    bool cd_fixtures = false;
    cording->add_option("--measurements", cd_measurements, "SVA sizes in metres, e.g. 0.15,0.35");
    cording->add_option("--feature", cd_feature, "feature name")->capture_default_str();
    cording->add_flag("--fixtures", cd_fixtures, "print the bundled reference intervals");

    // --- plan ----------------------------------------------------------
    auto *plan = app.add_subcommand("plan", "survey feasibility plan");
    double pl_area = 0.0, pl_gsd = 0.0, pl_stride = 0.5;
    std::int64_t pl_tile = 512, pl_min_train = 0;
    std::string pl_out = "plan.json";
    plan->add_option("--area", pl_area, "survey area in km^2 (default: match pixel budget)");
    plan->add_option("--gsd", pl_gsd, "target GSD in m/px")->required();
    plan->add_option("--tile", pl_tile, "tile size")->capture_default_str();
    plan->add_option("--stride", pl_stride, "stride fraction")->capture_default_str();
    plan->add_option("--min-train", pl_min_train, "required train tiles")->capture_default_str();
    plan->add_option("--out", pl_out, "plan file")->capture_default_str();

    // --- run / status ----------------------------------------------------
    auto *run = app.add_subcommand("run", "run the pipeline from a config file");
    std::string run_config_path;
    run->add_option("--config", run_config_path, "pipeline config (JSON)")->required();

    auto *status = app.add_subcommand("status", "journal-derived task states");

    // --- bench -----------------------------------------------------------
    auto *bench = app.add_subcommand("bench", "profile split/merge scaling");
    std::string bn_op = "split", bn_sizes = "1024,2048,4096,8192", bn_out = "bench.json";
    int bn_reps = 3;
    bench->add_option("--op", bn_op, "split|merge-crop|merge-logit")->capture_default_str();
    bench->add_option("--sizes", bn_sizes, "square extents in px")->capture_default_str();
    bench->add_option("--reps", bn_reps, "timed repetitions per size")->capture_default_str();
    bench->add_option("--out", bn_out, "result file (plus .csv sibling)")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (split->parsed()) {
            json p{{"image", split_image}, {"tile", split_tile}, {"stride", split_stride},
                   {"out", split_out}};
            if (!split_labels.empty()) p["labels"] = split_labels;
            if (split_classes > 0) p["classes"] = split_classes;
            return run_single("split", p, workspace);
        }
        if (weights->parsed()) {
            json p{{"subset", weights_subset}};
            json cfg{{"dataset", weights_dataset}, {"tasks", {{"weights", p}}}};
            return run_config(gs::pipeline::Config::from_json(cfg, workspace));
        }
        if (split_set->parsed()) {
            const auto f = parse_csv_doubles(ss_fractions);
            if (f.size() != 3) {
                throw gs::ConfigError("--fractions needs train,val,test");
            }
            json p{{"method", ss_method}, {"fractions", f}, {"gap", ss_gap}, {"seed", ss_seed}};
            if (!ss_regions.empty()) p["regions"] = ss_regions;
            json cfg{{"dataset", ss_dataset}, {"tasks", {{"split-set", p}}}};
            return run_config(gs::pipeline::Config::from_json(cfg, workspace));
        }
        if (degrade->parsed()) {
            std::vector<double> targets;
            if (dg_ladder) {
                for (const auto &rung : gs::degrade::ladder_presets()) {
                    targets.push_back(rung.gsd);
                }
            } else if (dg_target > 0.0) {
                targets.push_back(dg_target);
            } else {
                throw gs::ConfigError("need --target-gsd or --ladder");
            }
            for (double t : targets) {
                json p{{"method", dg_method}, {"target_gsd", t}};
                if (dg_source > 0.0) p["source_gsd"] = dg_source;
                if (!dg_out.empty()) p["out"] = dg_out;
                if (!dg_image.empty()) p["image"] = dg_image;
                if (!dg_labels.empty()) p["labels"] = dg_labels;
                json cfg{{"dataset", dg_dataset}, {"tasks", {{"degrade", p}}}};
                try {
                    gs::pipeline::run_pipeline(gs::pipeline::Config::from_json(cfg, workspace));
                    std::printf("degrade -> %.3g m/px done\n", t);
                } catch (const gs::ConfigError &e) {
                    if (!dg_ladder) throw;
                    std::printf("degrade -> %.3g m/px skipped (%s)\n", t, e.what());
                } catch (const gs::pipeline::TaskError &e) {
                    if (!dg_ladder) throw;
                    std::printf("degrade -> %.3g m/px skipped (%s)\n", t, e.what());
                }
            }
            return 0;
        }
        if (merge->parsed()) {
            json p{{"logits", predictor_json(mg_logits, mg_noise, mg_seed)},
                   {"strategy", mg_strategy},
                   {"out", mg_out}};
            json cfg{{"dataset", mg_dataset}, {"tasks", {{"merge", p}}}};
            return run_config(gs::pipeline::Config::from_json(cfg, workspace));
        }
        if (score->parsed()) {
            json p{{"split", sc_split}, {"mode", sc_mode}, {"out", sc_out}};
            if (!sc_logits.empty()) p["logits"] = predictor_json(sc_logits, sc_noise, sc_seed);
            if (sc_mode == "merged") {
                p["map"] = sc_map;
                if (sc_gt.empty()) {
                    throw gs::ConfigError("merged mode needs --gt");
                }
                p["gt"] = sc_gt;
            }
            if (!sc_exclude.empty()) p["exclude"] = parse_csv_ints(sc_exclude);
            json cfg{{"dataset", sc_dataset}, {"tasks", {{"score", p}}}};
            const int rc = run_config(gs::pipeline::Config::from_json(cfg, workspace));
            const auto bytes = gs::read_file(gs::fs::path(workspace) / sc_out);
            std::fwrite(bytes.data(), 1, bytes.size(), stdout);
            return rc;
        }
        if (cording->parsed()) {
            if (cd_fixtures) {
                for (const auto &f : gs::survey::cording_fixtures()) {
                    std::printf("%-18s SVA %.3f-%.3f m  ->  GSD in (%.4f, %.4f) m/px\n",
                                f.name.c_str(), f.sva_min_m, f.sva_max_m, f.interval.lower,
                                f.interval.upper);
                }
                return 0;
            }
            if (cd_measurements.empty()) {
                throw gs::ConfigError("need --measurements or --fixtures");
            }
            const auto iv = gs::survey::cording_interval({cd_feature, parse_csv_doubles(cd_measurements)});
            std::printf("%s: critical GSD in (%.4f, %.4f) m/px\n", cd_feature.c_str(), iv.lower,
                        iv.upper);
            return 0;
        }
        if (plan->parsed()) {
            json p{{"gsd", pl_gsd}, {"tile", pl_tile}, {"stride", pl_stride},
                   {"min_train", pl_min_train}, {"out", pl_out}};
            if (pl_area > 0.0) p["area"] = pl_area;
            json cfg{{"tasks", {{"plan", p}}}};
            const int rc = run_config(gs::pipeline::Config::from_json(cfg, workspace));
            const auto bytes = gs::read_file(gs::fs::path(workspace) / pl_out);
            const auto j = json::parse(bytes.begin(), bytes.end());
            std::printf("survey plan @ %.4g m/px\n", pl_gsd);
            std::printf("  area            %.2f km^2\n", j.at("area_km2").get<double>());
            std::printf("  pixels          %.3g\n", j.at("pixels").get<double>());
            std::printf("  tiles           %lld\n",
                        static_cast<long long>(j.at("tile_count").get<std::int64_t>()));
            std::printf("  altitude        %.1f m%s\n", j.at("altitude_m").get<double>(),
                        j.at("altitude_warning").get<bool>() ? "  (above the 120 m legal cap)" : "");
            std::printf("  duration approx %.2f workdays\n", j.at("workdays_approx").get<double>());
            if (!j.at("sufficient").get<bool>()) {
                std::printf("  data shortage; consider in order:\n");
                for (const auto &a : j.at("actions")) {
                    std::printf("    - %-13s %s\n", a.at("action").get<std::string>().c_str(),
                                a.at("tradeoff").get<std::string>().c_str());
                }
            }
            return rc;
        }
        if (run->parsed()) {
            return run_config(gs::pipeline::Config::from_file(run_config_path, workspace));
        }
        if (status->parsed()) {
            for (const auto &s : gs::pipeline::status(workspace)) {
                std::printf("%-14s %-8s %lld checkpoints\n", s.name.c_str(), s.state.c_str(),
                            static_cast<long long>(s.checkpoints));
            }
            return 0;
        }
        if (bench->parsed()) {
            const auto result = gs::bench::run_bench(gs::bench::op_from_name(bn_op),
                                                     parse_csv_ints(bn_sizes),
                                                     {.repetitions = bn_reps});
            const gs::fs::path out = gs::fs::path(workspace) / bn_out;
            gs::write_file_atomic(out, gs::bench::bench_to_json(result).dump(2) + "\n");
            gs::fs::path csv = out;
            csv.replace_extension(".csv");
            gs::write_file_atomic(csv, gs::bench::bench_to_csv(result));
            for (const auto &s : result.samples) {
                std::printf("%-12s %6lld px^2  median %.4f s\n", bn_op.c_str(),
                            static_cast<long long>(s.size), s.median_seconds);
            }
            std::printf("log-log slope %.3f\n", result.slope);
            return 0;
        }
    } catch (const std::exception &e) {
        std::fprintf(stderr, "geoseg: %s\n", e.what());
        return 1;
    }
    return 0;
}
