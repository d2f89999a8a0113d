#pragma once
/// @file taf.hpp
/// @brief Temporal Active Focus: incremental per-(x, y, p) FIFO state, the
/// logarithmic elapse transform, tensor rendering, and a batch recomputation
/// used as an equivalence oracle.
///
/// At step n (detection time n*dt) every (x, y, p) keeps the K most recent
/// non-empty dt-aligned bins. Each bin contributes its mean elapse from its
/// events to the current detection time. Rendering maps slot k of polarity p
/// to channel 2k + p, slot 0 being the newest bin.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "evtaf/core.hpp"
#include "evtaf/window.hpp"

namespace evtaf {

/// Scale applied to the elapse (in µs) inside the logarithm.
inline constexpr double kElapseLogScale = 1e-4;

/// 1 - ln(1 + dt*1e-4) / ln(1 + T_max*1e-4), clamped to [0, 1].
inline double transform_F(double delta_t, double t_max) {
    if (!(t_max > 0.0)) throw Error(ErrorCode::InvalidParam, "T_max must be > 0");
    if (delta_t < 0.0) throw Error(ErrorCode::InvalidParam, "elapse must be >= 0");
    double v = 1.0 - std::log1p(delta_t * kElapseLogScale) / std::log1p(t_max * kElapseLogScale);
    return std::clamp(v, 0.0, 1.0);
}

namespace detail {

/// ln(y) for finite y >= 1 in single precision (error below 2e-7 * max(1, ln y)).
/// Branch-free so the render loop vectorises; transform_F keeps the library
/// log1p.
inline float log_ge1(float y) {
    constexpr std::int32_t kSqrtHalf = 0x3F3504F3;
    const auto bits = std::bit_cast<std::int32_t>(y);
    const std::int32_t e = (bits - kSqrtHalf) >> 23;
    const float m = std::bit_cast<float>(bits - (e << 23));  // [sqrt(.5), sqrt(2))
    const float z = (m - 1.0f) / (m + 1.0f), z2 = z * z;
    const float series = z * (2.0f + z2 * (2.0f / 3 + z2 * (2.0f / 5 + z2 * (2.0f / 7 + z2 * (2.0f / 9)))));
    return series + static_cast<float>(e) * 0.693147180559945309f;
}

/// max(v, 0) through the sign bit.
inline float clamp_nonnegative(float v) {
    const auto bits = std::bit_cast<std::int32_t>(v);
    return std::bit_cast<float>(bits & ~(bits >> 31));
}

}  // namespace detail

class TafState {
public:
    TafState(FrameGeometry geometry, int queue_depth, Micros delta_tau)
        : geometry_(geometry), depth_(queue_depth), delta_tau_(delta_tau) {
        if (queue_depth < 1) throw Error(ErrorCode::InvalidParam, "K must be >= 1");
        if (queue_depth > 0xFFFF) throw Error(ErrorCode::InvalidParam, "K too large");
        if (delta_tau <= 0) throw Error(ErrorCode::InvalidParam, "delta_tau must be > 0");
        if (geometry.width == 0 || geometry.height == 0)
            throw Error(ErrorCode::InvalidParam, "geometry must be non-empty");
        const std::size_t positions = 2 * geometry.pixels();
        mean_t_.assign(positions * static_cast<std::size_t>(depth_), 0.0);
        count_.assign(positions, 0);
        head_.assign(positions, 0);
        sum_.assign(positions, 0);
        hits_.assign(positions, 0);
    }

    const FrameGeometry& geometry() const { return geometry_; }
    int queue_depth() const { return depth_; }
    Micros delta_tau() const { return delta_tau_; }
    std::int64_t step() const { return step_; }
    /// Detection time of the current step, n*dt.
    Micros time() const { return step_ * delta_tau_; }
    std::size_t positions() const { return count_.size(); }

    std::size_t position_index(std::uint32_t x, std::uint32_t y, std::uint8_t p) const {
        return (std::size_t{p} * geometry_.height + y) * geometry_.width + x;
    }

    std::size_t queue_size(std::uint32_t x, std::uint32_t y, std::uint8_t p) const {
        return count_[position_index(x, y, p)];
    }

    /// Elapse of slot k (0 = newest) in µs at the current step.
    double elapse(std::size_t pos, std::size_t slot) const {
        const std::size_t phys = (head_[pos] + depth_ - slot) % depth_;
        return static_cast<double>(time()) - mean_t_[pos * depth_ + phys];
    }

    /// Queue contents newest-first, as elapses in µs.
    std::vector<double> queue(std::uint32_t x, std::uint32_t y, std::uint8_t p) const {
        const std::size_t pos = position_index(x, y, p);
        std::vector<double> out(count_[pos]);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = elapse(pos, k);
        return out;
    }

    /// Consumes the events of [n*dt, (n+1)*dt) and advances to step n+1.
    ///
    /// Entries hold the mean event timestamp of their bin, so aging every entry
    /// by +dt is implicit in time() and costs nothing; only positions that saw
    /// events are touched.
    void advance(const WindowView& window) {
        if (window.t_lo != time() || window.t_hi != time() + delta_tau_)
            throw Error(ErrorCode::WindowOutOfOrder,
                        "expected window [" + std::to_string(time()) + ", " +
                            std::to_string(time() + delta_tau_) + ")");
        touched_.clear();
        Micros prev = window.t_lo;
        for (const Event& e : window.events) {
            if (e.t < prev || e.t >= window.t_hi)
                throw Error(ErrorCode::WindowOutOfOrder, "event outside window or unsorted");
            if (e.x >= geometry_.width || e.y >= geometry_.height || e.p > 1)
                throw Error(ErrorCode::GeometryMismatch, "event outside frame geometry");
            prev = e.t;
            const std::size_t pos = position_index(e.x, e.y, e.p);
            if (hits_[pos]++ == 0) touched_.push_back(static_cast<std::uint32_t>(pos));
            sum_[pos] += e.t;
        }
        for (std::uint32_t pos : touched_) {
            const double mean_t = static_cast<double>(sum_[pos]) / static_cast<double>(hits_[pos]);
            head_[pos] = static_cast<std::uint16_t>((head_[pos] + 1) % depth_);
            mean_t_[std::size_t{pos} * depth_ + head_[pos]] = mean_t;
            if (count_[pos] < depth_) ++count_[pos];
            sum_[pos] = 0;
            hits_[pos] = 0;
        }
        ++step_;
    }

    /// 2K-channel tensor; empty slots render as 0.
    TensorCHW render(Micros t_max) const {
        if (t_max <= 0) throw Error(ErrorCode::InvalidParam, "T_max must be > 0");
        const std::size_t plane = geometry_.pixels();
        // pass 1 scatters elapses, pass 2 maps them through F. Empty slots hold
        // an elapse far beyond any T_max, which F sends to 0.
        constexpr float kEmpty = 1e30f;
        TensorCHW out(2 * static_cast<std::size_t>(depth_), geometry_.height, geometry_.width, kEmpty);
        float* data = out.data().data();
        const double now = static_cast<double>(time());
        for (std::size_t p = 0; p < 2; ++p)
            for (std::size_t pixel = 0; pixel < plane; ++pixel) {
                const std::size_t pos = p * plane + pixel;
                const std::size_t n = count_[pos];
                const double* ring = &mean_t_[pos * depth_];
                std::size_t phys = head_[pos];
                for (std::size_t k = 0; k < n; ++k) {
                    data[(2 * k + p) * plane + pixel] = static_cast<float>(now - ring[phys]);
                    phys = phys == 0 ? depth_ - 1 : phys - 1;
                }
            }
        const auto inv_denom = static_cast<float>(1.0 / std::log1p(static_cast<double>(t_max) * kElapseLogScale));
        const auto scale = static_cast<float>(kElapseLogScale);
        const std::size_t total = out.size();
        for (std::size_t i = 0; i < total; ++i)
            data[i] = detail::clamp_nonnegative(1.0f - detail::log_ge1(1.0f + data[i] * scale) * inv_denom);
        return out;
    }

private:
    FrameGeometry geometry_;
    int depth_;
    Micros delta_tau_;
    std::int64_t step_ = 0;
    std::vector<double> mean_t_;        // positions x K ring buffers of mean timestamps
    std::vector<std::uint16_t> count_;  // filled slots per position
    std::vector<std::uint16_t> head_;   // ring index of the newest slot
    // per-step scratch
    std::vector<std::int64_t> sum_;
    std::vector<std::uint32_t> hits_;
    std::vector<std::uint32_t> touched_;
};

inline TafState taf_init(const FrameGeometry& geometry, int queue_depth, Micros delta_tau) {
    return TafState(geometry, queue_depth, delta_tau);
}

inline void taf_step(TafState& state, const WindowView& window) { state.advance(window); }

/// Slices the next window out of the stream and steps once.
inline void taf_step(TafState& state, const EventStream& stream) {
    taf_step(state, slice_window(stream, state.time(), state.time() + state.delta_tau()));
}

inline TensorCHW taf_render(const TafState& state, Micros t_max) { return state.render(t_max); }

/// Recomputes the TAF tensor at step n from scratch: bin every event before
/// n*dt per (x, y, p), keep the K most recent non-empty bins, and map each
/// bin's mean elapse through transform_F.
inline TensorCHW taf_batch_oracle(const EventStream& stream, std::int64_t n, Micros delta_tau, int queue_depth,
                                  Micros t_max) {
    if (n < 0 || delta_tau <= 0 || queue_depth < 1 || t_max <= 0)
        throw Error(ErrorCode::InvalidParam, "need n >= 0, delta_tau > 0, K >= 1, T_max > 0");
    const auto& g = stream.geometry;
    const Micros t_n = n * delta_tau;
    struct Bin {
        std::int64_t elapse_sum = 0;
        std::int64_t count = 0;
    };
    // key (p, y, x, bin)
    std::map<std::tuple<int, int, int, std::int64_t>, Bin> bins;
    for (const Event& e : stream.events) {
        if (e.t >= t_n) break;
        Bin& b = bins[{e.p, e.y, e.x, e.t / delta_tau}];
        b.elapse_sum += t_n - e.t;
        ++b.count;
    }
    TensorCHW out(2 * static_cast<std::size_t>(queue_depth), g.height, g.width);
    std::tuple<int, int, int> current{-1, -1, -1};
    int slot = 0;
    for (auto it = bins.rbegin(); it != bins.rend(); ++it) {
        auto [p, y, x, bin] = it->first;
        std::tuple<int, int, int> pos{p, y, x};
        if (pos != current) {
            current = pos;
            slot = 0;
        }
        if (slot >= queue_depth) continue;
        const double mean_elapse = static_cast<double>(it->second.elapse_sum) / static_cast<double>(it->second.count);
        out(2 * static_cast<std::size_t>(slot) + p, y, x) =
            static_cast<float>(transform_F(mean_elapse, static_cast<double>(t_max)));
        ++slot;
    }
    return out;
}

}  // namespace evtaf
