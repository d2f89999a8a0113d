#pragma once
/// @file io.hpp
/// @brief Readers and writers for event streams, boxes, flow fields and
/// encoded tensors.
///
/// Binary layouts (all integers little-endian):
///
///   events  "EVST" | version u32 = 1 | W u16 | H u16 | T_max u64
///           then records of 14 bytes: t u64 | x u16 | y u16 | p u8 | reserved u8
///   tensor  "EVTN" | version u32 = 1 | C u32 | H u32 | W u32 | dtype u8 (0 = f32)
///           then C*H*W f32, channel-major
///   flow    "FLOW" | t u64 | H u32 | W u32 | u-plane H*W f32 | v-plane H*W f32

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "evtaf/core.hpp"

namespace evtaf {

static_assert(std::endian::native == std::endian::little,
              "binary formats are read with little-endian host loads");

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 20;
inline constexpr std::size_t kEventRecordBytes = 14;
inline constexpr std::size_t kTensorHeaderBytes = 21;
inline constexpr std::size_t kFlowHeaderBytes = 20;

using Bytes = std::vector<std::uint8_t>;

namespace detail {

struct ByteWriter {
    Bytes out;

    void raw(std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }
    template <class T>
    void put(T value) {
        std::array<std::uint8_t, sizeof(T)> buf;
        std::memcpy(buf.data(), &value, sizeof(T));
        out.insert(out.end(), buf.begin(), buf.end());
    }
};

struct ByteReader {
    std::span<const std::uint8_t> in;
    std::size_t pos = 0;

    std::size_t remaining() const { return in.size() - pos; }
    bool magic(std::string_view m) {
        if (remaining() < m.size()) return false;
        bool ok = std::memcmp(in.data() + pos, m.data(), m.size()) == 0;
        pos += m.size();
        return ok;
    }
    template <class T>
    T get() {
        T value;
        std::memcpy(&value, in.data() + pos, sizeof(T));
        pos += sizeof(T);
        return value;
    }
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

template <class T>
bool parse_number(std::string_view s, T& value) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

template <class T>
void append_number(std::string& out, T value) {
    std::array<char, 64> buf;
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    out.append(buf.data(), res.ptr);
}

/// Calls fn(line_number, fields) for each non-empty line; skips a leading
/// header line whose first field is not numeric.
template <class Fn>
void for_each_csv_row(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        auto fields = split_csv(line);
        if (line_no == 1) {
            double probe;
            if (!parse_number(fields[0], probe)) continue;
        }
        fn(line_no, fields);
    }
}

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& why) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + why);
}

inline void check_event(const Event& e, const FrameGeometry& g, Micros prev_t, std::size_t index) {
    if (e.x >= g.width || e.y >= g.height || e.t >= g.t_max)
        throw Error(ErrorCode::CoordOutOfBounds, "record " + std::to_string(index) + " outside geometry");
    if (index > 0 && e.t < prev_t)
        throw Error(ErrorCode::NonMonotonicTimestamp, "record " + std::to_string(index));
}

}  // namespace detail

// --- files -----------------------------------------------------------------

inline Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    Bytes b = read_file(path);
    return std::string(b.begin(), b.end());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// --- events ----------------------------------------------------------------

inline Bytes write_events_binary(const EventStream& stream) {
    const auto& g = stream.geometry;
    if (g.width > 0xFFFF || g.height > 0xFFFF)
        throw Error(ErrorCode::InvalidParam, "geometry does not fit u16 header fields");
    detail::ByteWriter w;
    w.out.reserve(kEventHeaderBytes + stream.events.size() * kEventRecordBytes);
    w.raw("EVST");
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(g.width));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(g.height));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(g.t_max));
    for (const Event& e : stream.events) {
        w.put<std::uint64_t>(static_cast<std::uint64_t>(e.t));
        w.put<std::uint16_t>(e.x);
        w.put<std::uint16_t>(e.y);
        w.put<std::uint8_t>(e.p);
        w.put<std::uint8_t>(0);
    }
    return std::move(w.out);
}

inline EventStream read_events_binary(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r{bytes};
    if (!r.magic("EVST")) throw Error(ErrorCode::BadMagic, "expected EVST");
    if (r.remaining() < kEventHeaderBytes - 4) throw Error(ErrorCode::TruncatedRecord, "short header");
    if (r.get<std::uint32_t>() != kFormatVersion) throw Error(ErrorCode::UnsupportedDtype, "unknown event file version");
    EventStream s;
    s.geometry.width = r.get<std::uint16_t>();
    s.geometry.height = r.get<std::uint16_t>();
    std::uint64_t t_max = r.get<std::uint64_t>();
    if (t_max > static_cast<std::uint64_t>(std::numeric_limits<Micros>::max()))
        throw Error(ErrorCode::InvalidParam, "T_max exceeds signed 64-bit range");
    s.geometry.t_max = static_cast<Micros>(t_max);
    if (!s.geometry.valid()) throw Error(ErrorCode::InvalidParam, "header geometry must be positive");
    if (r.remaining() % kEventRecordBytes != 0)
        throw Error(ErrorCode::TruncatedRecord, "record " + std::to_string(r.remaining() / kEventRecordBytes) + " is incomplete");
    s.events.resize(r.remaining() / kEventRecordBytes);
    for (std::size_t i = 0; i < s.events.size(); ++i) {
        Event& e = s.events[i];
        std::uint64_t t = r.get<std::uint64_t>();
        e.x = r.get<std::uint16_t>();
        e.y = r.get<std::uint16_t>();
        e.p = r.get<std::uint8_t>();
        r.get<std::uint8_t>();
        if (t >= static_cast<std::uint64_t>(s.geometry.t_max))
            throw Error(ErrorCode::CoordOutOfBounds, "record " + std::to_string(i) + " timestamp >= T_max");
        e.t = static_cast<Micros>(t);
        if (e.p > 1) throw Error(ErrorCode::ParseError, "record " + std::to_string(i) + " polarity not in {0,1}");
        detail::check_event(e, s.geometry, i > 0 ? s.events[i - 1].t : 0, i);
    }
    return s;
}

inline std::string write_events_csv(const EventStream& stream) {
    std::string out = "t,x,y,p\n";
    out.reserve(out.size() + stream.events.size() * 20);
    for (const Event& e : stream.events) {
        detail::append_number(out, e.t);
        out += ',';
        detail::append_number(out, e.x);
        out += ',';
        detail::append_number(out, e.y);
        out += ',';
        detail::append_number(out, e.p);
        out += '\n';
    }
    return out;
}

/// CSV carries no header geometry, so the caller supplies it.
inline EventStream read_events_csv(std::string_view text, const FrameGeometry& geometry) {
    if (!geometry.valid()) throw Error(ErrorCode::InvalidParam, "geometry must be positive");
    EventStream s{geometry, {}};
    detail::for_each_csv_row(text, [&](std::size_t line, const std::vector<std::string_view>& f) {
        if (f.size() != 4) detail::parse_fail(line, "expected 4 fields t,x,y,p");
        std::int64_t t;
        std::uint32_t x, y, p;
        if (!detail::parse_number(f[0], t) || t < 0) detail::parse_fail(line, "bad timestamp");
        if (!detail::parse_number(f[1], x) || !detail::parse_number(f[2], y)) detail::parse_fail(line, "bad coordinate");
        if (!detail::parse_number(f[3], p) || p > 1) detail::parse_fail(line, "polarity must be 0 or 1");
        if (x > 0xFFFF || y > 0xFFFF)
            throw Error(ErrorCode::CoordOutOfBounds, "line " + std::to_string(line));
        Event e{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), static_cast<std::uint8_t>(p)};
        detail::check_event(e, geometry, s.events.empty() ? 0 : s.events.back().t, s.events.size());
        s.events.push_back(e);
    });
    return s;
}

/// Dispatches on extension: ".csv" is text, anything else the binary format.
inline EventStream load_events(const std::filesystem::path& path, const FrameGeometry& csv_geometry = {}) {
    if (path.extension() == ".csv") return read_events_csv(read_text_file(path), csv_geometry);
    Bytes bytes = read_file(path);
    return read_events_binary(bytes);
}

// --- tensors ---------------------------------------------------------------

inline Bytes encode_tensor(const TensorCHW& t) {
    detail::ByteWriter w;
    w.out.reserve(kTensorHeaderBytes + t.size() * 4);
    w.raw("EVTN");
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.channels()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.height()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.width()));
    w.put<std::uint8_t>(0);
    const auto* raw = reinterpret_cast<const std::uint8_t*>(t.data().data());
    w.out.insert(w.out.end(), raw, raw + t.size() * sizeof(float));
    return std::move(w.out);
}

inline TensorCHW decode_tensor(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r{bytes};
    if (!r.magic("EVTN")) throw Error(ErrorCode::BadMagic, "expected EVTN");
    if (r.remaining() < kTensorHeaderBytes - 4) throw Error(ErrorCode::DimMismatch, "short tensor header");
    if (r.get<std::uint32_t>() != kFormatVersion) throw Error(ErrorCode::UnsupportedDtype, "unknown tensor file version");
    std::uint64_t c = r.get<std::uint32_t>();
    std::uint64_t h = r.get<std::uint32_t>();
    std::uint64_t w = r.get<std::uint32_t>();
    if (r.get<std::uint8_t>() != 0) throw Error(ErrorCode::UnsupportedDtype, "only f32 (dtype 0) is supported");
    std::uint64_t n = c * h * w;
    if (r.remaining() != n * sizeof(float))
        throw Error(ErrorCode::DimMismatch, "payload length does not match C*H*W");
    std::vector<float> data(n);
    std::memcpy(data.data(), bytes.data() + r.pos, n * sizeof(float));
    return TensorCHW(c, h, w, std::move(data));
}

inline void write_tensor(const TensorCHW& t, const std::filesystem::path& path) {
    if (!t.all_finite()) throw Error(ErrorCode::InvalidParam, "tensor contains non-finite values");
    write_file(path, encode_tensor(t));
}

inline TensorCHW read_tensor(const std::filesystem::path& path) {
    Bytes bytes = read_file(path);
    return decode_tensor(bytes);
}

// --- flow ------------------------------------------------------------------

inline Bytes encode_flow(const FlowField& f) {
    std::size_t n = std::size_t{f.height} * f.width;
    if (f.u.size() != n || f.v.size() != n) throw Error(ErrorCode::DimMismatch, "flow planes do not match H*W");
    detail::ByteWriter w;
    w.raw("FLOW");
    w.put<std::uint64_t>(static_cast<std::uint64_t>(f.t));
    w.put<std::uint32_t>(f.height);
    w.put<std::uint32_t>(f.width);
    for (const auto* plane : {&f.u, &f.v}) {
        const auto* raw = reinterpret_cast<const std::uint8_t*>(plane->data());
        w.out.insert(w.out.end(), raw, raw + n * sizeof(float));
    }
    return std::move(w.out);
}

inline FlowField decode_flow(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r{bytes};
    if (!r.magic("FLOW")) throw Error(ErrorCode::BadMagic, "expected FLOW");
    if (r.remaining() < kFlowHeaderBytes - 4) throw Error(ErrorCode::TruncatedPlane, "short flow header");
    FlowField f;
    f.t = static_cast<Micros>(r.get<std::uint64_t>());
    f.height = r.get<std::uint32_t>();
    f.width = r.get<std::uint32_t>();
    std::size_t n = std::size_t{f.height} * f.width;
    for (auto* plane : {&f.u, &f.v}) {
        if (r.remaining() < n * sizeof(float))
            throw Error(ErrorCode::TruncatedPlane, plane == &f.u ? "u-plane" : "v-plane");
        plane->resize(n);
        std::memcpy(plane->data(), bytes.data() + r.pos, n * sizeof(float));
        r.pos += n * sizeof(float);
    }
    if (r.remaining() != 0) throw Error(ErrorCode::DimMismatch, "trailing bytes after v-plane");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(f.u[i]) || !std::isfinite(f.v[i]))
            throw Error(ErrorCode::InvalidParam, "non-finite flow value");
    return f;
}

inline void write_flow(const FlowField& f, const std::filesystem::path& path) { write_file(path, encode_flow(f)); }

inline FlowField read_flow(const std::filesystem::path& path) {
    Bytes bytes = read_file(path);
    return decode_flow(bytes);
}

// --- boxes -----------------------------------------------------------------

namespace detail {

inline Annotation parse_box_row(std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() < 6) parse_fail(line, "expected t,x,y,w,h,class_id");
    Annotation a;
    if (!parse_number(f[0], a.t) || a.t < 0) parse_fail(line, "bad timestamp");
    if (!parse_number(f[1], a.box.x) || !parse_number(f[2], a.box.y) ||
        !parse_number(f[3], a.box.w) || !parse_number(f[4], a.box.h))
        parse_fail(line, "bad box coordinate");
    if (!std::isfinite(a.box.x) || !std::isfinite(a.box.y) || !std::isfinite(a.box.w) || !std::isfinite(a.box.h))
        parse_fail(line, "non-finite box coordinate");
    if (!parse_number(f[5], a.class_id) || a.class_id < 0) parse_fail(line, "bad class id");
    if (!(a.box.w > 0.0) || !(a.box.h > 0.0))
        throw Error(ErrorCode::NonPositiveSize, "line " + std::to_string(line));
    return a;
}

inline void append_box_row(std::string& out, Micros t, const Box& b, int class_id) {
    append_number(out, t);
    for (double v : {b.x, b.y, b.w, b.h}) {
        out += ',';
        append_number(out, v);
    }
    out += ',';
    append_number(out, class_id);
}

}  // namespace detail

/// Columns t,x,y,w,h,class_id; any further columns (e.g. track ids) are ignored.
inline std::vector<Annotation> read_annotations_csv(std::string_view text) {
    std::vector<Annotation> out;
    detail::for_each_csv_row(text, [&](std::size_t line, const std::vector<std::string_view>& f) {
        out.push_back(detail::parse_box_row(line, f));
    });
    return out;
}

inline std::string write_annotations_csv(std::span<const Annotation> boxes) {
    std::string out = "t,x,y,w,h,class_id\n";
    for (const Annotation& a : boxes) {
        detail::append_box_row(out, a.t, a.box, a.class_id);
        out += '\n';
    }
    return out;
}

/// Columns t,x,y,w,h,class_id,score.
inline std::vector<Detection> read_detections_csv(std::string_view text) {
    std::vector<Detection> out;
    detail::for_each_csv_row(text, [&](std::size_t line, const std::vector<std::string_view>& f) {
        Annotation a = detail::parse_box_row(line, f);
        if (f.size() < 7) detail::parse_fail(line, "missing score column");
        double score;
        if (!detail::parse_number(f[6], score) || !(score >= 0.0 && score <= 1.0))
            detail::parse_fail(line, "score must lie in [0,1]");
        out.push_back(Detection{a.t, a.box, a.class_id, score});
    });
    return out;
}

inline std::string write_detections_csv(std::span<const Detection> dets) {
    std::string out = "t,x,y,w,h,class_id,score\n";
    for (const Detection& d : dets) {
        detail::append_box_row(out, d.t, d.box, d.class_id);
        out += ',';
        detail::append_number(out, d.score);
        out += '\n';
    }
    return out;
}

}  // namespace evtaf
