#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "evtaf/taf.hpp"
#include "test_support.hpp"

using namespace evtaf;

namespace {

constexpr Micros kTmax = 60'000'000;
constexpr Micros kDt = 10'000;

double max_abs_diff(const TensorCHW& a, const TensorCHW& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double{a.data()[i]} - b.data()[i]));
    return m;
}

TafState run_steps(const EventStream& s, int k, std::int64_t steps) {
    TafState st = taf_init(s.geometry, k, kDt);
    for (std::int64_t i = 0; i < steps; ++i) taf_step(st, s);
    return st;
}

}  // namespace

TEST(TransformF, Endpoints) {
    EXPECT_EQ(transform_F(0.0, kTmax), 1.0);
    EXPECT_NEAR(transform_F(static_cast<double>(kTmax), kTmax), 0.0, 1e-12);
    EXPECT_EQ(transform_F(2.0 * kTmax, kTmax), 0.0);
}

TEST(TransformF, ValueAtOneDetectionPeriod) {
    // 1 - ln 2 / ln 6001
    EXPECT_NEAR(transform_F(1e4, kTmax), 0.9203249925358065, 1e-12);
}

TEST(TransformF, StrictlyDecreasing) {
    double prev = transform_F(0.0, kTmax);
    for (int i = 1; i <= 1000; ++i) {
        double v = transform_F(kTmax * (i / 1000.0), kTmax);
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(TransformF, InvalidParams) {
    EXPECT_THROW(transform_F(1.0, 0.0), Error);
    EXPECT_THROW(transform_F(-1.0, 10.0), Error);
}

TEST(TafRender, FastLogTracksLibraryLog) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 7e7);
    double worst = 0.0;
    for (int i = 0; i < 200'000; ++i) {
        const double dt = i < 3 ? std::array{0.0, 1.0, 6e7}[i] : u(rng);
        const auto y = static_cast<float>(1.0 + dt * kElapseLogScale);
        const double ref = std::log(double{y});
        worst = std::max(worst, std::abs(double{detail::log_ge1(y)} - ref) / std::max(ref, 1.0));
    }
    EXPECT_LT(worst, 2e-7);
    EXPECT_EQ(detail::log_ge1(1.0f), 0.0f);
    EXPECT_EQ(detail::clamp_nonnegative(-0.5f), 0.0f);
    EXPECT_EQ(detail::clamp_nonnegative(0.25f), 0.25f);
}

TEST(TafInit, FreshStateIsEmpty) {
    TafState st = taf_init(FrameGeometry{304, 240, kTmax}, 4, kDt);
    EXPECT_EQ(st.positions(), 304u * 240u * 2u);
    EXPECT_EQ(st.step(), 0);
    EXPECT_EQ(st.queue_size(10, 10, 1), 0u);
    TensorCHW t = taf_render(st, kTmax);
    EXPECT_EQ(t.channels(), 8u);
    EXPECT_EQ(t.mass(), 0.0);
}

TEST(TafInit, RejectsZeroDepth) {
    try {
        taf_init(FrameGeometry{4, 4, kTmax}, 0, kDt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidParam);
    }
}

TEST(TafStep, PushesMeanElapse) {
    EventStream s{FrameGeometry{4, 4, kTmax}, {{9'990, 1, 2, 0}, {9'995, 1, 2, 0}}};
    TafState st = run_steps(s, 4, 1);
    EXPECT_EQ(st.time(), 10'000);
    auto q = st.queue(1, 2, 0);
    ASSERT_EQ(q.size(), 1u);
    EXPECT_DOUBLE_EQ(q[0], 7.5);
}

TEST(TafStep, EmptyWindowOnlyAges) {
    EventStream s{FrameGeometry{4, 4, kTmax}, {{9'996, 0, 0, 1}}};
    TafState st = run_steps(s, 4, 1);
    EXPECT_EQ(st.queue(0, 0, 1), std::vector<double>{4.0});
    taf_step(st, s);
    EXPECT_EQ(st.queue(0, 0, 1), std::vector<double>{10'004.0});
}

TEST(TafStep, EvictsOldestWhenFull) {
    // push 4; empty; push 3 with K = 2
    EventStream s{FrameGeometry{4, 4, kTmax}, {{9'996, 3, 3, 0}, {29'997, 3, 3, 0}}};
    TafState st = run_steps(s, 2, 3);
    EXPECT_EQ(st.queue(3, 3, 0), (std::vector<double>{3.0, 20'004.0}));

    EventStream more = s;
    more.events.push_back({39'000, 3, 3, 0});
    taf_step(st, more);
    EXPECT_EQ(st.queue(3, 3, 0), (std::vector<double>{1'000.0, 10'003.0}));
    EXPECT_LT(max_abs_diff(taf_render(st, kTmax), taf_batch_oracle(more, 4, kDt, 2, kTmax)), 1e-6);
}

TEST(TafStep, TraceMatchesOracle) {
    EventStream s{FrameGeometry{4, 4, kTmax}, {{9'996, 3, 3, 0}, {29'997, 3, 3, 0}}};
    TafState st = run_steps(s, 2, 3);
    EXPECT_LT(max_abs_diff(taf_render(st, kTmax), taf_batch_oracle(s, 3, kDt, 2, kTmax)), 1e-6);
}

TEST(TafStep, RejectsWrongWindow) {
    EventStream s{FrameGeometry{4, 4, kTmax}, {}};
    TafState st = taf_init(s.geometry, 2, kDt);
    try {
        taf_step(st, slice_window(s, kDt, 2 * kDt));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::WindowOutOfOrder);
    }
    // event outside the window it claims to cover
    std::vector<Event> stray{{kDt + 5, 0, 0, 0}};
    EXPECT_THROW(taf_step(st, WindowView{stray, 0, kDt, kDt}), Error);
    EXPECT_EQ(st.step(), 0);
}

TEST(TafRender, ChannelMapping) {
    // p = c mod 2, slot = c / 2
    EventStream s{FrameGeometry{2, 1, kTmax}, {{5'000, 0, 0, 0}, {6'000, 0, 0, 1}, {15'000, 0, 0, 0}}};
    TafState st = run_steps(s, 2, 2);
    TensorCHW t = taf_render(st, kTmax);
    EXPECT_FLOAT_EQ(t(0, 0, 0), static_cast<float>(transform_F(5'000, kTmax)));   // p0 slot0
    EXPECT_FLOAT_EQ(t(1, 0, 0), static_cast<float>(transform_F(14'000, kTmax)));  // p1 slot0
    EXPECT_FLOAT_EQ(t(2, 0, 0), static_cast<float>(transform_F(15'000, kTmax)));  // p0 slot1
    EXPECT_EQ(t(3, 0, 0), 0.0f);                                                  // p1 slot1 empty
}

TEST(TafRender, SingleElapseOfOnePeriod) {
    EventStream s{FrameGeometry{3, 3, kTmax}, {{0, 1, 1, 1}}};
    TensorCHW t = taf_render(run_steps(s, 4, 1), kTmax);
    EXPECT_NEAR(t(1, 1, 1), 0.9203249925358065, 1e-7);
    EXPECT_FLOAT_EQ(static_cast<float>(t.mass()), t(1, 1, 1));
}

TEST(TafRender, StaleEntriesRenderZero) {
    FrameGeometry g{1, 1, 30'000};
    EventStream s{g, {{0, 0, 0, 0}}};
    TafState st = run_steps(s, 2, 4);  // elapse 40 000 > T_max
    EXPECT_EQ(st.queue_size(0, 0, 0), 1u);
    EXPECT_EQ(taf_render(st, g.t_max).mass(), 0.0);
}

TEST(TafRender, Idempotent) {
    std::mt19937_64 rng(31);
    auto s = gen::random_stream(rng, 32, 24, 500'000, 5000);
    TafState st = run_steps(s, 4, 30);
    EXPECT_EQ(taf_render(st, kTmax), taf_render(st, kTmax));
}

TEST(TafOracle, EmptyAndSingleEvent) {
    EXPECT_EQ(taf_batch_oracle(EventStream{FrameGeometry{4, 4, kTmax}, {}}, 5, kDt, 4, kTmax).mass(), 0.0);
    EventStream s{FrameGeometry{4, 4, kTmax}, {{4, 2, 1, 0}}};
    TensorCHW t = taf_batch_oracle(s, 1, kDt, 4, kTmax);
    EXPECT_NEAR(t(0, 1, 2), 0.920347984182678, 1e-7);  // elapse 9 996
    EXPECT_FLOAT_EQ(static_cast<float>(t.mass()), t(0, 1, 2));
    EXPECT_THROW(taf_batch_oracle(s, 1, kDt, 0, kTmax), Error);
}

TEST(TafProperties, IncrementalMatchesBatch) {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 10; ++trial) {
        const int k = trial % 2 ? 8 : 4;
        const std::int64_t steps = 1 + static_cast<std::int64_t>(rng() % 60);
        auto s = trial < 5 ? gen::random_stream(rng, 40, 30, steps * kDt, rng() % 20'000)
                           : gen::clustered_stream(rng, 40, 30, steps * kDt, rng() % 20'000, 8);
        TafState st = taf_init(s.geometry, k, kDt);
        for (std::int64_t n = 1; n <= steps; ++n) {
            taf_step(st, s);
            if (n % 10 == 0 || n == steps) {
                ASSERT_LT(max_abs_diff(taf_render(st, kTmax), taf_batch_oracle(s, n, kDt, k, kTmax)), 1e-6)
                    << "trial " << trial << " step " << n;
            }
        }
    }
}

TEST(TafProperties, QueuesStayStrictlyIncreasing) {
    std::mt19937_64 rng(33);
    auto s = gen::clustered_stream(rng, 8, 8, 100 * kDt, 20'000, 5);
    TafState st = taf_init(s.geometry, 4, kDt);
    for (int n = 0; n < 100; ++n) {
        taf_step(st, s);
        for (std::uint32_t y = 0; y < 8; ++y)
            for (std::uint32_t x = 0; x < 8; ++x)
                for (std::uint8_t p = 0; p < 2; ++p) {
                    auto q = st.queue(x, y, p);
                    ASSERT_LE(q.size(), 4u);
                    for (std::size_t i = 0; i < q.size(); ++i) {
                        ASSERT_GT(q[i], 0.0);
                        if (i > 0) {
                            ASSERT_LT(q[i - 1], q[i]);
                        }
                    }
                }
    }
}

TEST(TafProperties, PerPositionIndependence) {
    std::mt19937_64 rng(34);
    auto s = gen::random_stream(rng, 16, 12, 40 * kDt, 4000);
    auto perturbed = s;
    const std::uint16_t x0 = 5, y0 = 7;
    const std::uint8_t p0 = 1;
    // add extra events at (x0, y0, p0) only
    for (Micros t : {12'345, 150'000, 299'999}) perturbed.events.push_back({t, x0, y0, p0});
    std::stable_sort(perturbed.events.begin(), perturbed.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    const int k = 4;
    TensorCHW a = taf_render(run_steps(s, k, 40), kTmax);
    TensorCHW b = taf_render(run_steps(perturbed, k, 40), kTmax);
    bool changed = false;
    for (std::size_t c = 0; c < a.channels(); ++c)
        for (std::size_t y = 0; y < a.height(); ++y)
            for (std::size_t x = 0; x < a.width(); ++x) {
                const bool same = a(c, y, x) == b(c, y, x);
                if (x == x0 && y == y0 && c % 2 == p0) {
                    changed |= !same;
                } else {
                    ASSERT_TRUE(same) << c << "," << y << "," << x;
                }
            }
    EXPECT_TRUE(changed);
}
