#pragma once
/// @file augment.hpp
/// @brief Random horizontal flip and nearest-neighbour resize-crop of
/// representation tensors, driven by a counter-based generator.

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "evtaf/core.hpp"

namespace evtaf {

/// SplitMix64 in counter form: draw i (1-based) is mix(seed + i * gamma).
/// The whole sequence is a function of (seed, counter), so any language can
/// reproduce it.
class CounterRng {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    std::uint64_t next() {
        ++counter_;
        std::uint64_t z = seed_ + counter_ * kGamma;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer on {0, ..., max_inclusive}.
    std::size_t uniform_int(std::size_t max_inclusive) {
        auto v = static_cast<std::size_t>(uniform() * static_cast<double>(max_inclusive + 1));
        return v > max_inclusive ? max_inclusive : v;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

struct AugmentConfig {
    double flip_probability = 0.5;  ///< p1
    double crop_probability = 0.5;  ///< p2
    double alpha = 1.5;             ///< resize factor >= 1
    std::uint64_t seed = 0;

    void validate() const {
        if (!(flip_probability >= 0.0 && flip_probability <= 1.0) || !(crop_probability >= 0.0 && crop_probability <= 1.0))
            throw Error(ErrorCode::InvalidParam, "probabilities must lie in [0, 1]");
        if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidParam, "alpha must be >= 1");
    }
};

/// out(c, y, x) = in(c, y, W - x - 1)
inline TensorCHW flip_h(const TensorCHW& t) {
    TensorCHW out(t.channels(), t.height(), t.width());
    const std::size_t w = t.width();
    for (std::size_t c = 0; c < t.channels(); ++c)
        for (std::size_t y = 0; y < t.height(); ++y)
            for (std::size_t x = 0; x < w; ++x) out(c, y, x) = t(c, y, w - x - 1);
    return out;
}

inline std::size_t scaled_extent(std::size_t n, double alpha) {
    return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
}

/// Nearest-neighbour upsample to floor(alpha*H) x floor(alpha*W) (source index
/// floor(dest / alpha)) followed by an H x W crop at (y0, x0).
inline TensorCHW resize_crop(const TensorCHW& t, double alpha, std::size_t y0, std::size_t x0) {
    if (!(alpha >= 1.0)) throw Error(ErrorCode::InvalidParam, "alpha must be >= 1");
    const std::size_t h = t.height(), w = t.width();
    const std::size_t big_h = scaled_extent(h, alpha), big_w = scaled_extent(w, alpha);
    if (y0 + h > big_h || x0 + w > big_w)
        throw Error(ErrorCode::OffsetOutOfRange, "crop offset outside the resized tensor");
    auto source = [alpha](std::size_t dest, std::size_t limit) {
        auto s = static_cast<std::size_t>(std::floor(static_cast<double>(dest) / alpha));
        return s < limit ? s : limit - 1;
    };
    std::vector<std::size_t> src_x(w);
    for (std::size_t x = 0; x < w; ++x) src_x[x] = source(x0 + x, w);
    TensorCHW out(t.channels(), h, w);
    for (std::size_t c = 0; c < t.channels(); ++c)
        for (std::size_t y = 0; y < h; ++y) {
            const std::size_t sy = source(y0 + y, h);
            for (std::size_t x = 0; x < w; ++x) out(c, y, x) = t(c, sy, src_x[x]);
        }
    return out;
}

/// Draw order per call: flip uniform, crop uniform, then (only when cropping)
/// y offset and x offset. Flip is applied before the crop.
inline TensorCHW augment(const TensorCHW& t, const AugmentConfig& cfg, CounterRng& rng) {
    cfg.validate();
    const bool flip = rng.uniform() < cfg.flip_probability;
    const bool crop = rng.uniform() < cfg.crop_probability;
    TensorCHW out = flip ? flip_h(t) : t;
    if (crop) {
        const std::size_t max_y = scaled_extent(t.height(), cfg.alpha) - t.height();
        const std::size_t max_x = scaled_extent(t.width(), cfg.alpha) - t.width();
        const std::size_t y0 = rng.uniform_int(max_y);
        const std::size_t x0 = rng.uniform_int(max_x);
        out = resize_crop(out, cfg.alpha, y0, x0);
    }
    return out;
}

inline TensorCHW augment(const TensorCHW& t, const AugmentConfig& cfg) {
    CounterRng rng(cfg.seed);
    return augment(t, cfg, rng);
}

}  // namespace evtaf
