#pragma once
/// @file eval.hpp
/// @brief COCO-style mAP over IoU 0.50:0.05:0.95 with detection-timestamp
/// tolerance and per-motion-level breakdown.
///
/// Ground truth and detections are grouped into frames: every distinct
/// annotation timestamp is paired with the nearest detection timestamp within
/// the tolerance, and only the detections at that paired timestamp are
/// evaluated against it. Detections at unpaired timestamps are not scored.

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "evtaf/core.hpp"
#include "evtaf/motion.hpp"

namespace evtaf {

inline std::vector<double> coco_iou_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(static_cast<double>(50 + 5 * i) / 100.0);
    return t;
}

struct EvalConfig {
    std::vector<double> iou_thresholds = coco_iou_thresholds();
    Micros timestamp_tolerance = 0;

    void validate() const {
        if (iou_thresholds.empty()) throw Error(ErrorCode::InvalidParam, "no IoU thresholds");
        for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
            if (!(iou_thresholds[i] > 0.0 && iou_thresholds[i] < 1.0))
                throw Error(ErrorCode::InvalidParam, "IoU thresholds must lie in (0, 1)");
            if (i > 0 && !(iou_thresholds[i] > iou_thresholds[i - 1]))
                throw Error(ErrorCode::InvalidParam, "IoU thresholds must be strictly ascending");
        }
        if (timestamp_tolerance < 0) throw Error(ErrorCode::InvalidParam, "tolerance must be >= 0");
    }
};

inline double iou(const Box& a, const Box& b) {
    const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
    const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

/// For each annotation time, the index of the nearest detection time within
/// `tolerance`; equidistant candidates resolve to the earlier one. Both
/// inputs must be sorted ascending.
inline std::vector<std::optional<std::size_t>> match_timestamps(std::span<const Micros> annotation_times,
                                                                std::span<const Micros> detection_times,
                                                                Micros tolerance) {
    std::vector<std::optional<std::size_t>> out;
    out.reserve(annotation_times.size());
    for (Micros ta : annotation_times) {
        auto it = std::lower_bound(detection_times.begin(), detection_times.end(), ta);
        std::optional<std::size_t> best;
        Micros best_gap = 0;
        auto consider = [&](std::size_t i) {
            const Micros gap = detection_times[i] > ta ? detection_times[i] - ta : ta - detection_times[i];
            if (gap > tolerance) return;
            if (!best || gap < best_gap) {
                best = i;
                best_gap = gap;
            }
        };
        // earlier candidate first so that ties keep it
        if (it != detection_times.begin()) {
            // step back over duplicates to the first occurrence of the earlier time
            auto prev = std::lower_bound(detection_times.begin(), it, *(it - 1));
            consider(static_cast<std::size_t>(prev - detection_times.begin()));
        }
        if (it != detection_times.end()) consider(static_cast<std::size_t>(it - detection_times.begin()));
        out.push_back(best);
    }
    return out;
}

struct ClassResult {
    int class_id = 0;
    std::vector<double> ap;  ///< per IoU threshold
    double mean_ap = 0.0;
};

struct MapResult {
    double map = 0.0;
    std::vector<double> per_threshold;  ///< mean over classes at each threshold
    std::vector<ClassResult> per_class;
    bool empty = false;  ///< no ground truth to evaluate; map reported as 0
};

namespace detail {

struct Frame {
    std::vector<std::size_t> gts;
    std::vector<std::size_t> dets;
};

inline std::vector<Frame> build_frames(std::span<const Detection> dets, std::span<const Annotation> gts,
                                       Micros tolerance) {
    std::map<Micros, std::vector<std::size_t>> gt_by_t, det_by_t;
    for (std::size_t i = 0; i < gts.size(); ++i) gt_by_t[gts[i].t].push_back(i);
    for (std::size_t i = 0; i < dets.size(); ++i) det_by_t[dets[i].t].push_back(i);
    std::vector<Micros> gt_times, det_times;
    for (const auto& kv : gt_by_t) gt_times.push_back(kv.first);
    for (const auto& kv : det_by_t) det_times.push_back(kv.first);
    auto pairing = match_timestamps(gt_times, det_times, tolerance);
    std::vector<Frame> frames;
    frames.reserve(gt_times.size());
    for (std::size_t i = 0; i < gt_times.size(); ++i) {
        Frame f;
        f.gts = gt_by_t[gt_times[i]];
        if (pairing[i]) f.dets = det_by_t[det_times[*pairing[i]]];
        frames.push_back(std::move(f));
    }
    return frames;
}

/// 101-point interpolated AP from score-ordered TP/FP flags.
inline double interpolated_ap(const std::vector<bool>& is_tp, std::size_t positives) {
    const std::size_t n = is_tp.size();
    std::vector<double> recall(n), precision(n);
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        (is_tp[i] ? tp : fp) += 1;
        recall[i] = static_cast<double>(tp) / static_cast<double>(positives);
        precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double r = static_cast<double>(k) / 100.0;
        auto it = std::lower_bound(recall.begin(), recall.end(), r);
        if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
    }
    return sum / 101.0;
}

/// AP for one class and threshold; nullopt when the class has no
/// non-ignored ground truth. A detection matched to an ignored box is
/// neither a true nor a false positive.
inline std::optional<double> class_ap(const std::vector<Frame>& frames, std::span<const Detection> dets,
                                      std::span<const Annotation> gts, const std::vector<bool>& ignored,
                                      int class_id, double iou_threshold) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < gts.size(); ++i)
        if (gts[i].class_id == class_id && !ignored[i]) ++positives;
    if (positives == 0) return std::nullopt;

    struct Candidate {
        std::size_t frame;
        std::size_t det;
    };
    std::vector<Candidate> order;
    for (std::size_t f = 0; f < frames.size(); ++f)
        for (std::size_t d : frames[f].dets)
            if (dets[d].class_id == class_id) order.push_back({f, d});
    std::stable_sort(order.begin(), order.end(),
                     [&](const Candidate& a, const Candidate& b) { return dets[a.det].score > dets[b.det].score; });

    // per frame: class GTs, non-ignored first
    std::vector<std::vector<std::size_t>> frame_gts(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        for (std::size_t g : frames[f].gts)
            if (gts[g].class_id == class_id) frame_gts[f].push_back(g);
        std::stable_partition(frame_gts[f].begin(), frame_gts[f].end(), [&](std::size_t g) { return !ignored[g]; });
    }

    std::vector<bool> taken(gts.size(), false);
    std::vector<bool> is_tp;
    is_tp.reserve(order.size());
    for (const Candidate& c : order) {
        std::optional<std::size_t> best;
        double best_iou = std::min(iou_threshold, 1.0 - 1e-10);
        for (std::size_t g : frame_gts[c.frame]) {
            if (taken[g]) continue;
            if (best && !ignored[*best] && ignored[g]) break;
            const double u = iou(dets[c.det].box, gts[g].box);
            if (u < best_iou) continue;
            best_iou = u;
            best = g;
        }
        if (best) {
            taken[*best] = true;
            if (ignored[*best]) continue;
            is_tp.push_back(true);
        } else {
            is_tp.push_back(false);
        }
    }
    return interpolated_ap(is_tp, positives);
}

inline MapResult evaluate(std::span<const Detection> dets, std::span<const Annotation> gts,
                          const std::vector<bool>& ignored, const EvalConfig& cfg) {
    cfg.validate();
    const auto frames = build_frames(dets, gts, cfg.timestamp_tolerance);
    std::set<int> classes;
    for (std::size_t i = 0; i < gts.size(); ++i)
        if (!ignored[i]) classes.insert(gts[i].class_id);

    MapResult r;
    r.per_threshold.assign(cfg.iou_thresholds.size(), 0.0);
    if (classes.empty()) {
        r.empty = true;
        return r;
    }
    for (int cls : classes) {
        ClassResult cr{cls, {}, 0.0};
        for (double thr : cfg.iou_thresholds) cr.ap.push_back(*class_ap(frames, dets, gts, ignored, cls, thr));
        cr.mean_ap = std::accumulate(cr.ap.begin(), cr.ap.end(), 0.0) / static_cast<double>(cr.ap.size());
        r.per_class.push_back(std::move(cr));
    }
    double total = 0.0;
    for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
        double s = 0.0;
        for (const ClassResult& cr : r.per_class) s += cr.ap[t];
        r.per_threshold[t] = s / static_cast<double>(r.per_class.size());
        total += r.per_threshold[t];
    }
    r.map = total / static_cast<double>(cfg.iou_thresholds.size());
    return r;
}

}  // namespace detail

/// AP of one class at one IoU threshold; 0 when the class has no ground truth.
inline double average_precision(std::span<const Detection> dets, std::span<const Annotation> gts, int class_id,
                                double iou_threshold, Micros tolerance = 0) {
    const auto frames = detail::build_frames(dets, gts, tolerance);
    std::vector<bool> ignored(gts.size(), false);
    return detail::class_ap(frames, dets, gts, ignored, class_id, iou_threshold).value_or(0.0);
}

/// Mean over classes present in the ground truth, then over IoU thresholds.
inline MapResult map_metric(std::span<const Detection> dets, std::span<const Annotation> gts,
                            const EvalConfig& cfg) {
    return detail::evaluate(dets, gts, std::vector<bool>(gts.size(), false), cfg);
}

struct LevelMapResult {
    MapResult overall;
    std::array<std::optional<MapResult>, MotionLevels::kLevels> by_level;  ///< empty where a level has no boxes
    std::array<std::size_t, MotionLevels::kLevels> gt_count{};
};

/// Per-level mAP. `levels[i]` in 1..5 is the level of `gts[i]`. Boxes of
/// other levels, and the optional `excluded` boxes (e.g. those removed by
/// sanitize_boxes), act as ignore regions; detections matching no box at all
/// are false positives in every level.
inline LevelMapResult map_by_level(std::span<const Detection> dets, std::span<const Annotation> gts,
                                   std::span<const int> levels, const EvalConfig& cfg,
                                   std::span<const Annotation> excluded = {}) {
    if (levels.size() != gts.size()) throw Error(ErrorCode::MissingLevel, "one level per annotation required");
    for (int l : levels)
        if (l < 1 || l > MotionLevels::kLevels) throw Error(ErrorCode::MissingLevel, "level outside 1..5");

    std::vector<Annotation> all(gts.begin(), gts.end());
    all.insert(all.end(), excluded.begin(), excluded.end());
    std::vector<bool> base(all.size(), false);
    std::fill(base.begin() + static_cast<std::ptrdiff_t>(gts.size()), base.end(), true);

    LevelMapResult out;
    out.overall = detail::evaluate(dets, all, base, cfg);
    for (int level = 1; level <= MotionLevels::kLevels; ++level) {
        std::vector<bool> ignored = base;
        std::size_t count = 0;
        for (std::size_t i = 0; i < gts.size(); ++i) {
            ignored[i] = levels[i] != level;
            if (!ignored[i]) ++count;
        }
        out.gt_count[level - 1] = count;
        if (count > 0) out.by_level[level - 1] = detail::evaluate(dets, all, ignored, cfg);
    }
    return out;
}

}  // namespace evtaf
