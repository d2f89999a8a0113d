#include <gtest/gtest.h>

#include <set>

#include "evtaf/core.hpp"
#include "test_support.hpp"

using namespace evtaf;

TEST(ValidateStream, ReportsNonMonotonicIndex) {
    EventStream s{FrameGeometry{4, 4, 100}, {{5, 0, 0, 0}, {3, 0, 0, 1}}};
    auto report = validate_stream(s);
    ASSERT_EQ(report.size(), 1u);
    EXPECT_EQ(report[0].index, 1u);
    EXPECT_EQ(report[0].reason, "non-monotonic at index 1");
}

TEST(ValidateStream, EmptyStreamIsValid) {
    EXPECT_TRUE(validate_stream(EventStream{FrameGeometry{4, 4, 100}, {}}).empty());
}

TEST(ValidateStream, RandomGeneratedStreamsAreValid) {
    std::mt19937_64 rng(7);
    auto s = gen::random_stream(rng, 304, 240, 1'000'000, 10'000);
    EXPECT_TRUE(validate_stream(s).empty());
}

TEST(ValidateStream, FlagsEachInvariant) {
    EventStream s{FrameGeometry{4, 4, 100}, {{1, 4, 0, 0}, {2, 0, 4, 0}, {3, 0, 0, 2}, {100, 0, 0, 0}}};
    auto report = validate_stream(s);
    ASSERT_EQ(report.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(report[i].index, i);
}

TEST(TensorCHW, IndexMapIsBijective) {
    TensorCHW t(3, 5, 7);
    std::set<std::size_t> seen;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 5; ++y)
            for (std::size_t x = 0; x < 7; ++x) {
                auto off = t.offset(c, y, x);
                EXPECT_EQ(off, c * 35 + y * 7 + x);
                EXPECT_LT(off, t.size());
                seen.insert(off);
            }
    EXPECT_EQ(seen.size(), t.size());
}

TEST(TensorCHW, RejectsWrongDataLength) {
    EXPECT_THROW(TensorCHW(2, 2, 2, std::vector<float>(7)), Error);
}

TEST(EncoderParams, Validation) {
    EncoderParams p;
    EXPECT_NO_THROW(p.validate());
    p.k_upper = p.delta_tau + 1;
    EXPECT_THROW(p.validate(), Error);
    p = EncoderParams{};
    p.queue_depth = 0;
    EXPECT_THROW(p.validate(), Error);
}
