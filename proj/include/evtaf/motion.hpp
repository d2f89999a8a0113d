#pragma once
/// @file motion.hpp
/// @brief Optical-flow intensity, bounding-box flow density (BBOFD), box
/// sanitisation and quintile motion levels.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "evtaf/core.hpp"

namespace evtaf {

struct IntensityPlane {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<float> values;  ///< row-major

    float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// Element-wise sqrt(u^2 + v^2).
inline IntensityPlane flow_intensity(const FlowField& f) {
    const std::size_t n = std::size_t{f.height} * f.width;
    if (f.u.size() != n || f.v.size() != n) throw Error(ErrorCode::DimMismatch, "flow planes do not match H*W");
    IntensityPlane out{f.height, f.width, std::vector<float>(n)};
    for (std::size_t i = 0; i < n; ++i)
        out.values[i] = static_cast<float>(std::hypot(double{f.u[i]}, double{f.v[i]}));
    return out;
}

/// Mean intensity over the box rasterised to floor(w) x floor(h) pixels from
/// its truncated upper-left corner, extending right and down. Pixels outside
/// the plane are not counted.
inline double bbofd(const IntensityPlane& plane, const Box& box) {
    const auto x0 = static_cast<long long>(std::trunc(box.x));
    const auto y0 = static_cast<long long>(std::trunc(box.y));
    const auto w = static_cast<long long>(std::floor(box.w));
    const auto h = static_cast<long long>(std::floor(box.h));
    const long long xa = std::max(x0, 0LL), xb = std::min(x0 + w, static_cast<long long>(plane.width));
    const long long ya = std::max(y0, 0LL), yb = std::min(y0 + h, static_cast<long long>(plane.height));
    if (w < 1 || h < 1 || xa >= xb || ya >= yb)
        throw Error(ErrorCode::DegenerateBox, "box rasterises to zero area");
    double sum = 0.0;
    for (long long y = ya; y < yb; ++y)
        for (long long x = xa; x < xb; ++x) sum += plane.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    return sum / static_cast<double>((xb - xa) * (yb - ya));
}

/// Clips `box` to [0, W) x [0, H). Returns false if nothing remains.
inline bool clip_box(Box& box, std::uint32_t width, std::uint32_t height) {
    // edges are only touched when they actually cross the frame, so clipping twice is a no-op
    auto clip_axis = [](double& lo, double& extent, double limit) {
        if (lo < 0.0) {
            extent += lo;
            lo = 0.0;
        }
        if (lo + extent > limit) extent = limit - lo;
        return extent > 0.0;
    };
    Box b = box;
    if (!clip_axis(b.x, b.w, width) || !clip_axis(b.y, b.h, height)) return false;
    box = b;
    return true;
}

inline bool boxes_overlap(const Box& a, const Box& b) {
    const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
    const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
    return iw > 0.0 && ih > 0.0;
}

struct SanitizedBoxes {
    std::vector<Annotation> boxes;
    std::vector<std::size_t> source_index;  ///< index of each kept box in the input
};

/// Clips every box to the frame, then drops both members of every pair of
/// same-timestamp boxes with positive-area overlap. Input order is kept.
inline SanitizedBoxes sanitize_boxes_indexed(std::span<const Annotation> boxes, std::uint32_t width,
                                              std::uint32_t height) {
    std::vector<Annotation> clipped(boxes.begin(), boxes.end());
    std::vector<bool> keep(boxes.size());
    for (std::size_t i = 0; i < clipped.size(); ++i) keep[i] = clip_box(clipped[i].box, width, height);

    std::map<Micros, std::vector<std::size_t>> by_time;
    for (std::size_t i = 0; i < clipped.size(); ++i)
        if (keep[i]) by_time[clipped[i].t].push_back(i);
    std::vector<bool> overlapped(boxes.size(), false);
    for (const auto& [t, idx] : by_time)
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = a + 1; b < idx.size(); ++b)
                if (boxes_overlap(clipped[idx[a]].box, clipped[idx[b]].box))
                    overlapped[idx[a]] = overlapped[idx[b]] = true;

    SanitizedBoxes out;
    for (std::size_t i = 0; i < clipped.size(); ++i) {
        if (!keep[i] || overlapped[i]) continue;
        out.boxes.push_back(clipped[i]);
        out.source_index.push_back(i);
    }
    return out;
}

inline std::vector<Annotation> sanitize_boxes(std::span<const Annotation> boxes, const FrameGeometry& geometry) {
    return sanitize_boxes_indexed(boxes, geometry.width, geometry.height).boxes;
}

struct MotionLevels {
    static constexpr int kLevels = 5;
    std::array<double, kLevels - 1> boundaries{};  ///< 20/40/60/80% nearest-rank quantiles
    std::vector<int> levels;                       ///< per input value, in 1..5

    /// 1 + #{boundaries < v}
    int level_of(double v) const {
        int level = 1;
        for (double b : boundaries)
            if (b < v) ++level;
        return std::min(level, kLevels);
    }
};

/// Nearest-rank quantile: the ceil(pct * n / 100)-th order statistic.
inline double nearest_rank(std::span<const double> sorted, unsigned pct) {
    std::size_t rank = (pct * sorted.size() + 99) / 100;
    if (rank == 0) rank = 1;
    return sorted[rank - 1];
}

inline MotionLevels motion_levels(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "motion levels need at least one value");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    MotionLevels m;
    for (unsigned i = 0; i < m.boundaries.size(); ++i) m.boundaries[i] = nearest_rank(sorted, 20 * (i + 1));
    m.levels.reserve(values.size());
    for (double v : values) m.levels.push_back(m.level_of(v));
    return m;
}

}  // namespace evtaf
