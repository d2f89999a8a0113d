#pragma once
/// @file baseline.hpp
/// @brief Comparison representations: Event Volume, Event Count Image and
/// Surface of Active Events. All are pure functions of (stream, t_n, params).

#include <algorithm>
#include <cmath>
#include <vector>

#include "evtaf/core.hpp"
#include "evtaf/window.hpp"

namespace evtaf {

enum class VolumeKernel { Rect, Triangular };

namespace detail {

inline void check_detection_time(const EventStream& stream, Micros t_n) {
    if (t_n < 0 || t_n > stream.geometry.t_max)
        throw Error(ErrorCode::InvalidParam, "detection time outside [0, T_max]");
}

}  // namespace detail

/// 2B channels; channel 2b+p holds polarity p in temporal bin b of
/// [t_n - B*dt, t_n), bin 0 oldest.
///
/// The triangular kernel splits each event between the two nearest bin
/// centres. Events in the outer half of the first or last bin go wholly to
/// that bin, so mass is conserved for both kernels.
inline TensorCHW event_volume(const EventStream& stream, Micros t_n, Micros delta_tau, int bins,
                              VolumeKernel kernel = VolumeKernel::Rect) {
    if (bins < 1 || delta_tau <= 0) throw Error(ErrorCode::InvalidParam, "need B >= 1 and delta_tau > 0");
    detail::check_detection_time(stream, t_n);
    const auto& g = stream.geometry;
    TensorCHW out(2 * static_cast<std::size_t>(bins), g.height, g.width);
    const Micros t_lo = t_n - bins * delta_tau;
    WindowView win = slice_window(stream, t_lo, t_n);
    check_geometry(win.events, g);

    for (const Event& e : win.events) {
        const Micros rel = e.t - t_lo;
        if (kernel == VolumeKernel::Rect) {
            const auto b = static_cast<std::size_t>(rel / delta_tau);
            out(2 * b + e.p, e.y, e.x) += 1.0f;
            continue;
        }
        // position in bin-centre units: centre of bin b sits at b
        double pos = static_cast<double>(rel) / static_cast<double>(delta_tau) - 0.5;
        pos = std::clamp(pos, 0.0, static_cast<double>(bins - 1));
        const auto lower = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lower);
        out(2 * lower + e.p, e.y, e.x) += static_cast<float>(1.0 - frac);
        if (frac > 0.0) out(2 * (lower + 1) + e.p, e.y, e.x) += static_cast<float>(frac);
    }
    return out;
}

/// Per-pixel, per-polarity counts of the latest min(N, available) events before t_n.
inline TensorCHW event_count_image(const EventStream& stream, Micros t_n, int recent_events) {
    if (recent_events < 1) throw Error(ErrorCode::InvalidParam, "N must be >= 1");
    detail::check_detection_time(stream, t_n);
    const auto& g = stream.geometry;
    TensorCHW out(2, g.height, g.width);
    auto before = events_before(stream, t_n);
    auto n = std::min<std::size_t>(static_cast<std::size_t>(recent_events), before.size());
    auto recent = before.last(n);
    check_geometry(recent, g);
    for (const Event& e : recent) out(e.p, e.y, e.x) += 1.0f;
    return out;
}

/// exp(lambda * (t_latest - t_n)) per (x, y, p); 0 where no event precedes t_n.
inline TensorCHW surface_active_events(const EventStream& stream, Micros t_n, double lambda) {
    if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidParam, "lambda must be > 0");
    detail::check_detection_time(stream, t_n);
    const auto& g = stream.geometry;
    auto before = events_before(stream, t_n);
    check_geometry(before, g);

    const std::size_t plane = g.pixels();
    std::vector<Micros> latest(2 * plane, -1);
    for (const Event& e : before) latest[e.p * plane + std::size_t{e.y} * g.width + e.x] = e.t;

    TensorCHW out(2, g.height, g.width);
    auto data = out.data();
    for (std::size_t i = 0; i < latest.size(); ++i) {
        if (latest[i] < 0) continue;
        data[i] = static_cast<float>(std::exp(lambda * static_cast<double>(latest[i] - t_n)));
    }
    return out;
}

}  // namespace evtaf
