#include <gtest/gtest.h>

#include <bit>
#include <filesystem>

#include "evtaf/io.hpp"
#include "test_support.hpp"

using namespace evtaf;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "evtaf_io_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Io;
}

}  // namespace

TEST(EventsBinary, SingleRecord) {
    EventStream s{FrameGeometry{10, 10, 1000}, {{100, 3, 4, 1}}};
    Bytes b = write_events_binary(s);
    ASSERT_EQ(b.size(), kEventHeaderBytes + kEventRecordBytes);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "EVST");
    EventStream r = read_events_binary(b);
    ASSERT_EQ(r.events.size(), 1u);
    EXPECT_EQ(r.events[0], (Event{100, 3, 4, 1}));
    EXPECT_EQ(r.geometry, s.geometry);
}

TEST(EventsBinary, HeaderLayoutIsLittleEndian) {
    EventStream s{FrameGeometry{0x0102, 0x0304, 0x05060708}, {}};
    Bytes b = write_events_binary(s);
    const Bytes expected{'E', 'V', 'S', 'T', 1, 0, 0, 0, 0x02, 0x01, 0x04, 0x03, 0x08, 0x07, 0x06, 0x05, 0, 0, 0, 0};
    EXPECT_EQ(b, expected);
}

TEST(EventsBinary, Errors) {
    EventStream s{FrameGeometry{10, 10, 1000}, {{100, 3, 4, 1}, {200, 5, 5, 0}}};
    Bytes good = write_events_binary(s);

    Bytes bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_EQ(code_of([&] { read_events_binary(bad_magic); }), ErrorCode::BadMagic);

    Bytes truncated(good.begin(), good.end() - 3);
    EXPECT_EQ(code_of([&] { read_events_binary(truncated); }), ErrorCode::TruncatedRecord);

    EventStream oob = s;
    oob.events[1].x = 10;  // x == W
    EXPECT_EQ(code_of([&] { read_events_binary(write_events_binary(oob)); }), ErrorCode::CoordOutOfBounds);

    EventStream unsorted = s;
    unsorted.events[1].t = 50;
    EXPECT_EQ(code_of([&] { read_events_binary(write_events_binary(unsorted)); }), ErrorCode::NonMonotonicTimestamp);
}

TEST(EventsBinary, RoundTripIsBitExact) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        auto s = gen::random_stream(rng, 304, 240, 5'000'000, 1 + rng() % 2000);
        Bytes b = write_events_binary(s);
        EventStream r = read_events_binary(b);
        EXPECT_EQ(r, s);
        EXPECT_EQ(write_events_binary(r), b);
    }
}

TEST(EventsCsv, ParsesAndRejects) {
    FrameGeometry g{10, 10, 1000};
    auto s = read_events_csv("100,3,4,1\n", g);
    ASSERT_EQ(s.events.size(), 1u);
    EXPECT_EQ(s.events[0], (Event{100, 3, 4, 1}));
    EXPECT_EQ(read_events_csv("t,x,y,p\r\n100,3,4,1\r\n\n", g).events.size(), 1u);
    EXPECT_EQ(code_of([&] { read_events_csv("100,3,4,2\n", g); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { read_events_csv("100,3,4\n", g); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { read_events_csv("100,30,4,1\n", g); }), ErrorCode::CoordOutOfBounds);
    EXPECT_EQ(code_of([&] { read_events_csv("100,3,4,1\n50,3,4,1\n", g); }), ErrorCode::NonMonotonicTimestamp);
    try {
        read_events_csv("1,1,1,1\n2,2,x,1\n", g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(EventsCsv, MatchesBinaryOnRandomStreams) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 20; ++i) {
        auto s = gen::random_stream(rng, 64, 48, 100'000, rng() % 500);
        auto from_csv = read_events_csv(write_events_csv(s), s.geometry);
        auto from_bin = read_events_binary(write_events_binary(s));
        EXPECT_EQ(from_csv, from_bin);
    }
}

TEST(Tensor, HalfEncodesAsIeeeLittleEndian) {
    TensorCHW t(1, 1, 1, std::vector<float>{0.5f});
    Bytes b = encode_tensor(t);
    ASSERT_EQ(b.size(), kTensorHeaderBytes + 4);
    const Bytes payload(b.end() - 4, b.end());
    EXPECT_EQ(payload, (Bytes{0x00, 0x00, 0x00, 0x3F}));
    EXPECT_EQ(b[kTensorHeaderBytes - 1], 0);  // dtype f32
}

TEST(Tensor, FileRoundTripAndErrors) {
    std::mt19937_64 rng(13);
    auto t = gen::random_tensor(rng, 3, 4, 5);
    auto path = temp_path("t.evtn");
    write_tensor(t, path);
    TensorCHW r = read_tensor(path);
    EXPECT_EQ(r, t);

    Bytes b = encode_tensor(t);
    Bytes bad = b;
    bad[1] = 'X';
    EXPECT_EQ(code_of([&] { decode_tensor(bad); }), ErrorCode::BadMagic);
    bad = b;
    bad[kTensorHeaderBytes - 1] = 1;
    EXPECT_EQ(code_of([&] { decode_tensor(bad); }), ErrorCode::UnsupportedDtype);
    bad = b;
    bad.pop_back();
    EXPECT_EQ(code_of([&] { decode_tensor(bad); }), ErrorCode::DimMismatch);

    TensorCHW nan(1, 1, 1, std::numeric_limits<float>::quiet_NaN());
    EXPECT_THROW(write_tensor(nan, temp_path("nan.evtn")), Error);
}

TEST(Annotations, ParseIgnoresExtraColumns) {
    auto a = read_annotations_csv("1000,10,20,30,40,0\n2000,1.5,2.5,3,4,2,77,0.9\n");
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0], (Annotation{1000, Box{10, 20, 30, 40}, 0}));
    EXPECT_EQ(a[1].class_id, 2);
    EXPECT_DOUBLE_EQ(a[1].box.x, 1.5);
}

TEST(Annotations, Errors) {
    EXPECT_EQ(code_of([] { read_annotations_csv("1000,10,20,0,40,0"); }), ErrorCode::NonPositiveSize);
    EXPECT_EQ(code_of([] { read_annotations_csv("1000,10,20,5,-1,0"); }), ErrorCode::NonPositiveSize);
    EXPECT_EQ(code_of([] { read_annotations_csv("1000,10,20,5"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { read_annotations_csv("1000,ten,20,5,5,0"); }), ErrorCode::ParseError);
}

TEST(Detections, ScoreRoundTripsExactly) {
    std::vector<Detection> d{{1000, Box{1, 2, 3, 4}, 1, 0.875}, {2000, Box{0.1, 0.2, 0.3, 0.7}, 0, 0.1}};
    auto r = read_detections_csv(write_detections_csv(d));
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].score, 0.875);
    EXPECT_EQ(r, d);
    EXPECT_THROW(read_detections_csv("1,1,1,1,1,0,1.5\n"), Error);
    EXPECT_THROW(read_detections_csv("1,1,1,1,1,0\n"), Error);
}

TEST(Flow, SingleVectorAndTruncation) {
    FlowField f{123, 1, 1, {3.0f}, {4.0f}};
    auto path = temp_path("f.flow");
    write_flow(f, path);
    FlowField r = read_flow(path);
    EXPECT_EQ(r, f);

    Bytes b = encode_flow(f);
    Bytes truncated(b.begin(), b.end() - 2);
    EXPECT_EQ(code_of([&] { decode_flow(truncated); }), ErrorCode::TruncatedPlane);
    Bytes bad = b;
    bad[0] = 'G';
    EXPECT_EQ(code_of([&] { decode_flow(bad); }), ErrorCode::BadMagic);
}
