#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoseg/codec.hpp"
#include "geoseg/common.hpp"
#include "geoseg/logits.hpp"
#include "geoseg/merge.hpp"
#include "geoseg/raster.hpp"
#include "geoseg/tiling.hpp"
#include "geoseg/workers.hpp"

namespace geoseg::metrics {

/// One-vs-rest confusion counts per class. 64-bit: a full orthomosaic
/// (23662 x 25228 ~ 6e8 px) overflows 32-bit counters.
struct ConfusionAccumulator {
    std::vector<std::uint64_t> tp, fp, fn;

    explicit ConfusionAccumulator(int classes = 0)
        : tp(static_cast<std::size_t>(classes), 0),
          fp(static_cast<std::size_t>(classes), 0),
          fn(static_cast<std::size_t>(classes), 0) {}

    int classes() const { return static_cast<int>(tp.size()); }

    ConfusionAccumulator &operator+=(const ConfusionAccumulator &o) {
        if (o.classes() != classes()) {
            throw ShapeError("cannot add accumulators with different class counts");
        }
        for (std::size_t c = 0; c < tp.size(); ++c) {
            tp[c] += o.tp[c];
            fp[c] += o.fp[c];
            fn[c] += o.fn[c];
        }
        return *this;
    }

    bool present(int c) const {
        return tp[static_cast<std::size_t>(c)] + fp[static_cast<std::size_t>(c)] +
                   fn[static_cast<std::size_t>(c)] >
               0;
    }
};

inline void accumulate(const std::uint8_t *pred, const std::uint8_t *gt, std::size_t n,
                       ConfusionAccumulator &acc) {
    const int classes = acc.classes();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t p = pred[i];
        const std::uint8_t g = gt[i];
        if (p >= classes || g >= classes) {
            throw DataError("class id out of range while scoring");
        }
        if (p == g) {
            ++acc.tp[p];
        } else {
            ++acc.fp[p];
            ++acc.fn[g];
        }
    }
}

inline void accumulate(const PixelBuffer &pred, const PixelBuffer &gt, ConfusionAccumulator &acc) {
    if (!pred.same_shape(gt) || pred.bands() != 1 || pred.type() != SampleType::U8) {
        throw ShapeError("prediction/ground-truth tiles must be single-band uint8 of equal shape");
    }
    accumulate(pred.data(), gt.data(), pred.bytes().size(), acc);
}

enum class ScoreMode { TileSummed, Merged };

struct ClassScore {
    int id = 0;
    bool present = false;
    bool excluded = false;
    double iou = 0.0;
    double dice = 0.0;
};

struct ScoreReport {
    ScoreMode mode = ScoreMode::TileSummed;
    std::vector<ClassScore> classes;
    double miou = 0.0;
    double mdice = 0.0;
};

/// IoU = TP/(TP+FP+FN), Dice = 2TP/(2TP+FP+FN). Classes absent from both
/// prediction and ground truth are reported absent and excluded from the
/// means, as are classes in `exclude`.
inline ScoreReport finalize(const ConfusionAccumulator &acc, ScoreMode mode = ScoreMode::TileSummed,
                            const std::set<int> &exclude = {}) {
    ScoreReport report;
    report.mode = mode;
    double iou_sum = 0.0;
    double dice_sum = 0.0;
    std::int64_t counted = 0;
    for (int c = 0; c < acc.classes(); ++c) {
        ClassScore s;
        s.id = c;
        s.present = acc.present(c);
        s.excluded = exclude.count(c) > 0;
        if (s.present) {
            const auto tp = static_cast<double>(acc.tp[static_cast<std::size_t>(c)]);
            const auto fp = static_cast<double>(acc.fp[static_cast<std::size_t>(c)]);
            const auto fn = static_cast<double>(acc.fn[static_cast<std::size_t>(c)]);
            s.iou = tp / (tp + fp + fn);
            s.dice = 2.0 * tp / (2.0 * tp + fp + fn);
            if (!s.excluded) {
                iou_sum += s.iou;
                dice_sum += s.dice;
                ++counted;
            }
        }
        report.classes.push_back(s);
    }
    report.miou = counted > 0 ? iou_sum / static_cast<double>(counted) : 0.0;
    report.mdice = counted > 0 ? dice_sum / static_cast<double>(counted) : 0.0;
    return report;
}

/// Tile-summed mode: one accumulator over all tiles, counts first, single
/// ratio at the end (not a mean of per-tile ratios).
inline ScoreReport score_tiles(const std::vector<std::int64_t> &indices,
                               const predict::LogitSource &logits,
                               const tiling::DatasetLayout &ds, int class_count,
                               const std::set<int> &exclude = {}, int workers = 0) {
    for (std::int64_t i : indices) {
        if (!logits.has(i)) {
            throw IncompleteError("missing logits for tile " + std::to_string(i));
        }
    }
    const int n_workers = workers > 0 ? workers : worker_count();
    std::vector<ConfusionAccumulator> parts(static_cast<std::size_t>(n_workers),
                                            ConfusionAccumulator(class_count));
    std::atomic<int> next_slot{0};
    thread_local int slot = -1; // one accumulator per pool thread
    parallel_for(static_cast<std::int64_t>(indices.size()), n_workers, [&](std::int64_t k) {
        if (slot < 0) {
            slot = next_slot.fetch_add(1);
        }
        const std::int64_t index = indices[static_cast<std::size_t>(k)];
        const predict::LogitTile tile = logits.get(index);
        const PixelBuffer gt = codec::decode_image(read_file(ds.root / ds.label_rel(index)));
        if (gt.width() != tile.w || gt.height() != tile.h) {
            throw ShapeError("logit tile " + std::to_string(index) + " does not match its label");
        }
        ConfusionAccumulator &acc = parts[static_cast<std::size_t>(slot)];
        for (std::int64_t y = 0; y < tile.h; ++y) {
            for (std::int64_t x = 0; x < tile.w; ++x) {
                const std::uint8_t p = tile.argmax(y, x);
                const std::uint8_t g = gt.u8(x, y);
                if (p >= class_count || g >= class_count) {
                    throw DataError("class id out of range in tile " + std::to_string(index));
                }
                if (p == g) {
                    ++acc.tp[p];
                } else {
                    ++acc.fp[p];
                    ++acc.fn[g];
                }
            }
        }
    });
    ConfusionAccumulator total(class_count);
    for (const auto &p : parts) {
        total += p; // integer counts: reduction order never matters
    }
    return finalize(total, ScoreMode::TileSummed, exclude);
}

/// Merged mode: score the stitched map against the full ground-truth raster.
inline ScoreReport score_merged(const PixelBuffer &map, const Raster &gt, int class_count,
                                const std::set<int> &exclude = {}) {
    if (map.width() != gt.width() || map.height() != gt.height()) {
        throw ShapeError("merged map dimensions do not match ground truth");
    }
    ConfusionAccumulator acc(class_count);
    const std::int64_t band = 1024;
    for (std::int64_t y0 = 0; y0 < gt.height(); y0 += band) {
        const std::int64_t rows = std::min(band, gt.height() - y0);
        const PixelBuffer g = gt.read_window({0, y0, gt.width(), rows});
        accumulate(map.data() + static_cast<std::size_t>(y0) * map.width(), g.data(),
                   static_cast<std::size_t>(rows) * map.width(), acc);
    }
    return finalize(acc, ScoreMode::Merged, exclude);
}

inline double round4(double v) {
    return std::round(v * 10000.0) / 10000.0;
}

/// scores.json, per-class IoU plus the means, scores at 4 decimal places.
inline nlohmann::json report_to_json(const ScoreReport &report) {
    nlohmann::json j;
    j["mode"] = report.mode == ScoreMode::TileSummed ? "tiles" : "merged";
    nlohmann::json classes = nlohmann::json::array();
    for (const auto &s : report.classes) {
        nlohmann::json c;
        c["id"] = s.id;
        c["present"] = s.present;
        c["excluded"] = s.excluded;
        if (s.present) {
            c["iou"] = round4(s.iou);
            c["dice"] = round4(s.dice);
        }
        classes.push_back(c);
    }
    j["classes"] = classes;
    j["miou"] = round4(report.miou);
    j["mdice"] = round4(report.mdice);
    return j;
}

} // namespace geoseg::metrics
