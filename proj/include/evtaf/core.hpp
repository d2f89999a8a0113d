#pragma once
/// @file core.hpp
/// @brief Shared data model: events, streams, dense tensors, boxes, flow
/// fields and encoder parameters.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evtaf {

/// Timestamps are integer microseconds everywhere.
using Micros = std::int64_t;

enum class ErrorCode {
    InvalidParam,
    BadMagic,
    TruncatedRecord,
    TruncatedPlane,
    NonMonotonicTimestamp,
    CoordOutOfBounds,
    ParseError,
    NonPositiveSize,
    DimMismatch,
    UnsupportedDtype,
    GeometryMismatch,
    WindowOutOfOrder,
    DegenerateBox,
    OffsetOutOfRange,
    EmptyInput,
    MissingLevel,
    Io,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::TruncatedPlane: return "TruncatedPlane";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::CoordOutOfBounds: return "CoordOutOfBounds";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonPositiveSize: return "NonPositiveSize";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::WindowOutOfOrder: return "WindowOutOfOrder";
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::OffsetOutOfRange: return "OffsetOutOfRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingLevel: return "MissingLevel";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// All library failures are reported as Error; code() identifies the kind.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct Event {
    Micros t = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::uint8_t p = 0;  ///< polarity in {0, 1}

    friend bool operator==(const Event&, const Event&) = default;
};

struct FrameGeometry {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    Micros t_max = 0;  ///< record duration; every event has t < t_max

    bool valid() const { return width > 0 && height > 0 && t_max > 0; }
    std::size_t pixels() const { return std::size_t{width} * height; }

    friend bool operator==(const FrameGeometry&, const FrameGeometry&) = default;
};

struct EventStream {
    FrameGeometry geometry;
    std::vector<Event> events;

    friend bool operator==(const EventStream&, const EventStream&) = default;
};

struct StreamViolation {
    std::size_t index = 0;
    std::string reason;
};

/// Checks every EventStream invariant. An empty report means the stream is valid.
inline std::vector<StreamViolation> validate_stream(const EventStream& stream) {
    std::vector<StreamViolation> report;
    const auto& g = stream.geometry;
    if (!g.valid())
        report.push_back({0, "invalid geometry"});
    for (std::size_t i = 0; i < stream.events.size(); ++i) {
        const Event& e = stream.events[i];
        if (i > 0 && e.t < stream.events[i - 1].t)
            report.push_back({i, "non-monotonic at index " + std::to_string(i)});
        if (e.t < 0 || e.t >= g.t_max)
            report.push_back({i, "timestamp outside [0, t_max) at index " + std::to_string(i)});
        if (e.x >= g.width || e.y >= g.height)
            report.push_back({i, "coordinate out of bounds at index " + std::to_string(i)});
        if (e.p > 1)
            report.push_back({i, "polarity not in {0,1} at index " + std::to_string(i)});
    }
    return report;
}

/// Dense channel-major float tensor (offset = c*H*W + y*W + x).
class TensorCHW {
public:
    TensorCHW() = default;
    TensorCHW(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
        : c_(channels), h_(height), w_(width), data_(channels * height * width, fill) {}
    TensorCHW(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data)
        : c_(channels), h_(height), w_(width), data_(std::move(data)) {
        if (data_.size() != c_ * h_ * w_)
            throw Error(ErrorCode::DimMismatch, "tensor data length does not equal C*H*W");
    }

    std::size_t channels() const { return c_; }
    std::size_t height() const { return h_; }
    std::size_t width() const { return w_; }
    std::size_t size() const { return data_.size(); }

    std::size_t offset(std::size_t c, std::size_t y, std::size_t x) const {
        return (c * h_ + y) * w_ + x;
    }
    float& operator()(std::size_t c, std::size_t y, std::size_t x) { return data_[offset(c, y, x)]; }
    float operator()(std::size_t c, std::size_t y, std::size_t x) const { return data_[offset(c, y, x)]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    std::vector<float>& storage() { return data_; }

    /// Sum of all elements, accumulated in double.
    double mass() const {
        double total = 0.0;
        for (float v : data_) total += v;
        return total;
    }

    bool all_finite() const {
        for (float v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const TensorCHW&, const TensorCHW&) = default;

private:
    std::size_t c_ = 0, h_ = 0, w_ = 0;
    std::vector<float> data_;
};

/// Axis-aligned box; (x, y) is the upper-left corner in continuous pixels.
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    friend bool operator==(const Box&, const Box&) = default;
};

struct Annotation {
    Micros t = 0;
    Box box;
    int class_id = 0;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Detection {
    Micros t = 0;
    Box box;
    int class_id = 0;
    double score = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Dense optical flow at one timestamp; planes are row-major.
struct FlowField {
    Micros t = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<float> u;
    std::vector<float> v;

    friend bool operator==(const FlowField&, const FlowField&) = default;
};

struct EncoderParams {
    Micros delta_tau = 10'000;  ///< detection / sampling period
    int bins = 5;               ///< Event Volume temporal bins
    int recent_events = 10'000; ///< Event Count Image N
    double lambda = 1e-5;       ///< SAE decay per microsecond
    int queue_depth = 4;        ///< TAF K
    Micros k_upper = 10'000;    ///< kernel support; equals delta_tau for the rect kernel

    void validate() const {
        if (delta_tau <= 0) throw Error(ErrorCode::InvalidParam, "delta_tau must be > 0");
        if (bins < 1) throw Error(ErrorCode::InvalidParam, "B must be >= 1");
        if (recent_events < 1) throw Error(ErrorCode::InvalidParam, "N must be >= 1");
        if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidParam, "lambda must be > 0");
        if (queue_depth < 1) throw Error(ErrorCode::InvalidParam, "K must be >= 1");
        if (k_upper <= 0 || k_upper > delta_tau)
            throw Error(ErrorCode::InvalidParam, "k_upper must lie in (0, delta_tau]");
    }
};

}  // namespace evtaf
