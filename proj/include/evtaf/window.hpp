#pragma once
/// @file window.hpp
/// @brief Time-window slicing over a sorted event stream.

#include <algorithm>
#include <span>

#include "evtaf/core.hpp"

namespace evtaf {

/// Contiguous run of events with t in [t_lo, t_hi), seen from detection time t_n.
struct WindowView {
    std::span<const Event> events;
    Micros t_lo = 0;
    Micros t_hi = 0;
    Micros t_n = 0;
};

/// Events with t < t_end. Binary search; the stream must be sorted.
inline std::span<const Event> events_before(const EventStream& stream, Micros t_end) {
    auto it = std::lower_bound(stream.events.begin(), stream.events.end(), t_end,
                               [](const Event& e, Micros t) { return e.t < t; });
    return {stream.events.data(), static_cast<std::size_t>(it - stream.events.begin())};
}

inline WindowView slice_window(const EventStream& stream, Micros t_lo, Micros t_hi) {
    auto by_time = [](const Event& e, Micros t) { return e.t < t; };
    auto lo = std::lower_bound(stream.events.begin(), stream.events.end(), t_lo, by_time);
    auto hi = std::lower_bound(lo, stream.events.end(), t_hi, by_time);
    return WindowView{std::span<const Event>(stream.events.data() + (lo - stream.events.begin()),
                                             static_cast<std::size_t>(hi - lo)),
                      t_lo, t_hi, t_hi};
}

/// Throws GeometryMismatch if any event lies outside the stream's frame.
inline void check_geometry(std::span<const Event> events, const FrameGeometry& g) {
    for (const Event& e : events)
        if (e.x >= g.width || e.y >= g.height || e.p > 1)
            throw Error(ErrorCode::GeometryMismatch, "event outside frame geometry");
}

}  // namespace evtaf
