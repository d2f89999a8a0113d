#pragma once
/// @file bench.hpp
/// @brief Representation-time harness and synthetic stream generation.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "evtaf/baseline.hpp"
#include "evtaf/core.hpp"
#include "evtaf/taf.hpp"

namespace evtaf {

/// `windows` consecutive windows of length `window_us`, each holding
/// `events_per_window` uniformly placed events (sorted).
inline EventStream synthetic_stream(std::uint32_t width, std::uint32_t height, std::size_t windows,
                                    std::size_t events_per_window, Micros window_us, std::uint64_t seed) {
    EventStream s;
    s.geometry = FrameGeometry{width, height, static_cast<Micros>(windows) * window_us};
    s.events.reserve(windows * events_per_window);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> ux(0, width - 1), uy(0, height - 1), up(0, 1);
    std::uniform_int_distribution<Micros> ut(0, window_us - 1);
    std::vector<Micros> times(events_per_window);
    for (std::size_t w = 0; w < windows; ++w) {
        const Micros base = static_cast<Micros>(w) * window_us;
        for (Micros& t : times) t = base + ut(rng);
        std::sort(times.begin(), times.end());
        for (Micros t : times)
            s.events.push_back(Event{t, static_cast<std::uint16_t>(ux(rng)), static_cast<std::uint16_t>(uy(rng)),
                                     static_cast<std::uint8_t>(up(rng))});
    }
    return s;
}

struct BenchReport {
    std::string representation;
    std::string params;
    std::vector<double> samples_us;  ///< one per measured step
    std::size_t warmup_steps = 0;
    std::size_t events_processed = 0;

    std::size_t steps() const { return samples_us.size(); }

    /// Nearest-rank percentile over the recorded samples.
    double percentile(unsigned pct) const {
        if (samples_us.empty()) return 0.0;
        std::vector<double> sorted = samples_us;
        std::sort(sorted.begin(), sorted.end());
        std::size_t rank = (pct * sorted.size() + 99) / 100;
        return sorted[std::max<std::size_t>(rank, 1) - 1];
    }
    double median() const { return percentile(50); }
    double p95() const { return percentile(95); }
    double mean() const {
        if (samples_us.empty()) return 0.0;
        return std::accumulate(samples_us.begin(), samples_us.end(), 0.0) / static_cast<double>(samples_us.size());
    }

    std::string csv() const {
        std::string out = "representation,params,step,us\n";
        for (std::size_t i = 0; i < samples_us.size(); ++i)
            out += representation + ",\"" + params + "\"," + std::to_string(i) + "," + std::to_string(samples_us[i]) + "\n";
        return out;
    }

    std::string text() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%s [%s]: steps=%zu warmup=%zu events=%zu median=%.3f ms p95=%.3f ms mean=%.3f ms\n",
                      representation.c_str(), params.c_str(), steps(), warmup_steps, events_processed,
                      median() / 1000.0, p95() / 1000.0, mean() / 1000.0);
        return buf;
    }
};

enum class Representation { Taf, Volume, Count, Sae };

inline const char* to_string(Representation r) {
    switch (r) {
    case Representation::Taf: return "taf";
    case Representation::Volume: return "volume";
    case Representation::Count: return "count";
    case Representation::Sae: return "sae";
    }
    return "?";
}

inline std::optional<Representation> parse_representation(const std::string& name) {
    if (name == "taf") return Representation::Taf;
    if (name == "volume") return Representation::Volume;
    if (name == "count") return Representation::Count;
    if (name == "sae") return Representation::Sae;
    return std::nullopt;
}

/// Encodes at detection times n*dt, n = 1..warmup+steps, timing each
/// encode. TAF encodes incrementally (step + render); the others encode from
/// the full in-memory stream. The first `warmup` samples are discarded.
inline BenchReport run_bench(const EventStream& stream, Representation rep, const EncoderParams& p,
                             std::size_t steps, std::size_t warmup = 10) {
    p.validate();
    using clock = std::chrono::steady_clock;
    BenchReport report;
    report.representation = to_string(rep);
    report.warmup_steps = warmup;
    switch (rep) {
    case Representation::Taf: report.params = "K=" + std::to_string(p.queue_depth) + " dt_us=" + std::to_string(p.delta_tau); break;
    case Representation::Volume: report.params = "B=" + std::to_string(p.bins) + " dt_us=" + std::to_string(p.delta_tau); break;
    case Representation::Count: report.params = "N=" + std::to_string(p.recent_events); break;
    case Representation::Sae: report.params = "lambda=" + std::to_string(p.lambda); break;
    }
    report.samples_us.reserve(steps);

    std::optional<TafState> taf;
    if (rep == Representation::Taf) taf.emplace(stream.geometry, p.queue_depth, p.delta_tau);
    volatile float sink = 0.0f;
    for (std::size_t i = 0; i < warmup + steps; ++i) {
        const Micros t_n = static_cast<Micros>(i + 1) * p.delta_tau;
        const Micros t_enc = std::min(t_n, stream.geometry.t_max);
        std::size_t events = 0;
        const auto start = clock::now();
        TensorCHW out;
        switch (rep) {
        case Representation::Taf: {
            WindowView w = slice_window(stream, taf->time(), taf->time() + p.delta_tau);
            events = w.events.size();
            taf_step(*taf, w);
            out = taf_render(*taf, stream.geometry.t_max);
            break;
        }
        case Representation::Volume:
            out = event_volume(stream, t_enc, p.delta_tau, p.bins);
            break;
        case Representation::Count:
            out = event_count_image(stream, t_enc, p.recent_events);
            break;
        case Representation::Sae:
            out = surface_active_events(stream, t_enc, p.lambda);
            break;
        }
        const auto stop = clock::now();
        if (rep == Representation::Volume)
            events = slice_window(stream, t_enc - p.bins * p.delta_tau, t_enc).events.size();
        else if (rep == Representation::Count)
            events = std::min<std::size_t>(events_before(stream, t_enc).size(), static_cast<std::size_t>(p.recent_events));
        else if (rep == Representation::Sae)
            events = events_before(stream, t_enc).size();
        if (out.size() > 0) sink = sink + out.data()[0];
        if (i < warmup) continue;
        report.samples_us.push_back(std::chrono::duration<double, std::micro>(stop - start).count());
        report.events_processed += events;
    }
    return report;
}

}  // namespace evtaf
