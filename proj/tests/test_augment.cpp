#include <gtest/gtest.h>

#include <set>

#include "evtaf/augment.hpp"
#include "test_support.hpp"

using namespace evtaf;

TEST(FlipH, SwapsColumns) {
    TensorCHW t(1, 1, 2, std::vector<float>{1.0f, 2.0f});
    EXPECT_EQ(flip_h(t), TensorCHW(1, 1, 2, std::vector<float>{2.0f, 1.0f}));
}

TEST(FlipH, InvolutionAndMass) {
    std::mt19937_64 rng(51);
    for (int i = 0; i < 10; ++i) {
        auto t = gen::random_tensor(rng, 1 + rng() % 4, 1 + rng() % 9, 1 + rng() % 9);
        EXPECT_EQ(flip_h(flip_h(t)), t);
        std::multiset<float> a(t.data().begin(), t.data().end());
        auto f = flip_h(t);
        std::multiset<float> b(f.data().begin(), f.data().end());
        EXPECT_EQ(a, b);
    }
}

TEST(ResizeCrop, AlphaOneIsIdentity) {
    std::mt19937_64 rng(52);
    auto t = gen::random_tensor(rng, 2, 5, 6);
    EXPECT_EQ(resize_crop(t, 1.0, 0, 0), t);
    EXPECT_THROW(resize_crop(t, 1.0, 0, 1), Error);
}

TEST(ResizeCrop, IndexArithmetic) {
    // alpha 1.5 on 2x2: rows/cols map to source [0, 0, 1]; crop (0,0) keeps the top-left 2x2
    TensorCHW t(1, 2, 2, std::vector<float>{1, 2, 3, 4});
    EXPECT_EQ(resize_crop(t, 1.5, 0, 0), TensorCHW(1, 2, 2, std::vector<float>{1, 1, 1, 1}));
    EXPECT_EQ(resize_crop(t, 1.5, 1, 1), TensorCHW(1, 2, 2, std::vector<float>{1, 2, 3, 4}));
    EXPECT_EQ(resize_crop(t, 1.5, 0, 1), TensorCHW(1, 2, 2, std::vector<float>{1, 2, 1, 2}));
    try {
        resize_crop(t, 1.5, 2, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OffsetOutOfRange);
    }
}

TEST(ResizeCrop, OutputValuesComeFromInput) {
    std::mt19937_64 rng(53);
    for (int i = 0; i < 20; ++i) {
        auto t = gen::random_tensor(rng, 2, 7, 9);
        const double alpha = 1.0 + (rng() % 100) / 50.0;
        const std::size_t my = scaled_extent(7, alpha) - 7, mx = scaled_extent(9, alpha) - 9;
        auto out = resize_crop(t, alpha, rng() % (my + 1), rng() % (mx + 1));
        std::set<float> values(t.data().begin(), t.data().end());
        for (float v : out.data()) ASSERT_TRUE(values.count(v));
    }
}

TEST(CounterRng, SplitMix64Reference) {
    // first outputs of SplitMix64 seeded with 0
    CounterRng rng(0);
    EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFull);
    EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ull);
    CounterRng jump(0, 1);
    EXPECT_EQ(jump.next(), 0x6E789E6AA1B965F4ull);
}

TEST(Augment, DegenerateConfigIsIdentity) {
    std::mt19937_64 rng(54);
    auto t = gen::random_tensor(rng, 3, 6, 8);
    AugmentConfig cfg{0.0, 0.0, 1.5, 99};
    EXPECT_EQ(augment(t, cfg), t);
}

TEST(Augment, SeededDeterminism) {
    std::mt19937_64 rng(55);
    auto t = gen::random_tensor(rng, 3, 6, 8);
    AugmentConfig cfg{0.5, 0.5, 1.5, 1234};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        cfg.seed = seed;
        EXPECT_EQ(augment(t, cfg), augment(t, cfg));
    }
}

TEST(Augment, FlipFrequency) {
    TensorCHW t(1, 1, 2, std::vector<float>{0.0f, 1.0f});
    AugmentConfig cfg{0.5, 0.0, 1.5, 0};
    CounterRng rng(2024);
    int flips = 0;
    for (int i = 0; i < 10'000; ++i) flips += augment(t, cfg, rng)(0, 0, 0) == 1.0f;
    EXPECT_GE(flips, 4800);
    EXPECT_LE(flips, 5200);
}

TEST(Augment, InvalidConfig) {
    TensorCHW t(1, 2, 2);
    EXPECT_THROW(augment(t, AugmentConfig{1.5, 0.0, 1.5, 0}), Error);
    EXPECT_THROW(augment(t, AugmentConfig{0.5, 0.5, 0.9, 0}), Error);
}
