#pragma once
/// @file bfm.hpp
/// @brief Forward pass of the Bifurcated Folding Module.
///
/// Applied independently at each pixel of a TAF tensor (channel 2k+p holds
/// slot k of polarity p). Each fold stage halves the temporal slots of each
/// polarity by combining adjacent pairs (weight-normalised, ReLU). After every
/// stage the newest slot of each polarity is sliced off and kept. The kept
/// slices are concatenated and fused by a two-layer perceptron.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "evtaf/core.hpp"
#include "evtaf/io.hpp"

namespace evtaf {

/// One fold stage; parameters are indexed [polarity][output slot].
struct FoldStage {
    std::size_t in_slots = 0;
    std::size_t out_slots = 0;
    std::vector<float> weight;  ///< [2][out_slots][2] pair weights (older partner second)
    std::vector<float> bias;    ///< [2][out_slots]
    std::vector<float> scale;   ///< [2][out_slots] weight-norm gain

    std::size_t index(std::size_t p, std::size_t j) const { return p * out_slots + j; }
};

/// Row-major out x in weights.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<float> weight;
    std::vector<float> bias;
};

struct BfmWeights {
    int queue_depth = 0;
    std::vector<FoldStage> stages;
    DenseLayer hidden;
    DenseLayer output;

    std::size_t input_channels() const { return 2 * static_cast<std::size_t>(queue_depth); }
    std::size_t retained_channels() const { return 2 * stages.size(); }
    std::size_t output_channels() const { return output.out; }

    void validate() const {
        auto fail = [](const std::string& why) { throw Error(ErrorCode::DimMismatch, "bfm weights: " + why); };
        if (queue_depth < 1) fail("queue depth must be >= 1");
        if (stages.empty()) fail("at least one fold stage required");
        std::size_t slots = static_cast<std::size_t>(queue_depth);
        for (const FoldStage& s : stages) {
            if (s.in_slots != slots) fail("stage input slots do not chain");
            if (s.out_slots != (slots + 1) / 2) fail("stage must halve slots (rounding up)");
            if (s.weight.size() != 4 * s.out_slots || s.bias.size() != 2 * s.out_slots ||
                s.scale.size() != 2 * s.out_slots)
                fail("stage parameter sizes");
            slots = s.out_slots;
        }
        if (hidden.in != retained_channels()) fail("hidden layer input must equal retained channels");
        if (output.in != hidden.out) fail("output layer input must equal hidden width");
        for (const DenseLayer* l : {&hidden, &output})
            if (l->weight.size() != l->in * l->out || l->bias.size() != l->out) fail("dense parameter sizes");
        auto finite = [](const std::vector<float>& v) {
            for (float x : v)
                if (!std::isfinite(x)) return false;
            return true;
        };
        for (const FoldStage& s : stages)
            if (!finite(s.weight) || !finite(s.bias) || !finite(s.scale)) fail("non-finite stage parameter");
        if (!finite(hidden.weight) || !finite(hidden.bias) || !finite(output.weight) || !finite(output.bias))
            fail("non-finite dense parameter");
    }
};

/// Default schedule: max(1, ceil(log2 K)) stages, hidden width 2*retained, 2K outputs.
/// All parameters zero except unit weight-norm scales.
inline BfmWeights bfm_default_shape(int queue_depth, std::size_t output_channels = 0) {
    if (queue_depth < 1) throw Error(ErrorCode::InvalidParam, "K must be >= 1");
    BfmWeights w;
    w.queue_depth = queue_depth;
    std::size_t slots = static_cast<std::size_t>(queue_depth);
    do {
        FoldStage s;
        s.in_slots = slots;
        s.out_slots = (slots + 1) / 2;
        s.weight.assign(4 * s.out_slots, 0.0f);
        s.bias.assign(2 * s.out_slots, 0.0f);
        s.scale.assign(2 * s.out_slots, 1.0f);
        slots = s.out_slots;
        w.stages.push_back(std::move(s));
    } while (slots > 1);
    const std::size_t retained = w.retained_channels();
    w.hidden = DenseLayer{retained, 2 * retained, std::vector<float>(2 * retained * retained, 0.0f),
                          std::vector<float>(2 * retained, 0.0f)};
    const std::size_t out = output_channels == 0 ? w.input_channels() : output_channels;
    w.output = DenseLayer{w.hidden.out, out, std::vector<float>(out * w.hidden.out, 0.0f),
                          std::vector<float>(out, 0.0f)};
    return w;
}

/// Default-shaped weights with every parameter drawn from N(0, 1) (scales from U(0.5, 2)).
inline BfmWeights bfm_random_weights(int queue_depth, std::uint64_t seed, std::size_t output_channels = 0) {
    BfmWeights w = bfm_default_shape(queue_depth, output_channels);
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::uniform_real_distribution<float> gain(0.5f, 2.0f);
    auto fill = [&](std::vector<float>& v) {
        for (float& x : v) x = normal(rng);
    };
    for (FoldStage& s : w.stages) {
        fill(s.weight);
        fill(s.bias);
        for (float& g : s.scale) g = gain(rng);
    }
    fill(w.hidden.weight);
    fill(w.hidden.bias);
    fill(w.output.weight);
    fill(w.output.bias);
    return w;
}

/// Runs the fold stages on one pixel's 2K channel vector and writes the
/// retained newest-slot slices (stage-major, polarity-minor) to `retained`.
inline void bfm_fold_pixel(std::span<const double> channels, const BfmWeights& w, std::span<double> retained,
                           std::vector<double>& scratch) {
    const std::size_t k = static_cast<std::size_t>(w.queue_depth);
    // scratch holds [p][slot] for the current stage input
    scratch.resize(2 * k);
    for (std::size_t slot = 0; slot < k; ++slot)
        for (std::size_t p = 0; p < 2; ++p) scratch[p * k + slot] = channels[2 * slot + p];
    std::size_t slots = k;
    std::vector<double> next(2 * k);
    for (std::size_t si = 0; si < w.stages.size(); ++si) {
        const FoldStage& s = w.stages[si];
        for (std::size_t p = 0; p < 2; ++p) {
            for (std::size_t j = 0; j < s.out_slots; ++j) {
                const std::size_t idx = s.index(p, j);
                const double w0 = s.weight[2 * idx];
                const double w1 = s.weight[2 * idx + 1];
                const double norm = std::sqrt(w0 * w0 + w1 * w1);
                const double g = norm > 0.0 ? s.scale[idx] / norm : 0.0;
                const double newer = scratch[p * k + 2 * j];
                const double older = 2 * j + 1 < slots ? scratch[p * k + 2 * j + 1] : 0.0;
                const double v = g * (w0 * newer + w1 * older) + s.bias[idx];
                next[p * k + j] = v > 0.0 ? v : 0.0;
            }
        }
        slots = s.out_slots;
        for (std::size_t p = 0; p < 2; ++p)
            for (std::size_t j = 0; j < slots; ++j) scratch[p * k + j] = next[p * k + j];
        retained[2 * si] = scratch[0];
        retained[2 * si + 1] = scratch[k];
    }
}

inline TensorCHW bfm_forward(const TensorCHW& input, const BfmWeights& w) {
    w.validate();
    if (input.channels() != w.input_channels())
        throw Error(ErrorCode::DimMismatch, "input channels must equal 2K");
    const std::size_t plane = input.height() * input.width();
    const std::size_t cin = input.channels();
    const std::size_t r = w.retained_channels();
    TensorCHW out(w.output_channels(), input.height(), input.width());
    auto in = input.data();
    auto dst = out.data();

    std::vector<double> channels(cin), retained(r), hidden(w.hidden.out), scratch;
    for (std::size_t px = 0; px < plane; ++px) {
        for (std::size_t c = 0; c < cin; ++c) channels[c] = in[c * plane + px];
        bfm_fold_pixel(channels, w, retained, scratch);
        for (std::size_t h = 0; h < w.hidden.out; ++h) {
            double acc = w.hidden.bias[h];
            for (std::size_t i = 0; i < r; ++i) acc += double{w.hidden.weight[h * r + i]} * retained[i];
            hidden[h] = acc > 0.0 ? acc : 0.0;
        }
        for (std::size_t o = 0; o < w.output.out; ++o) {
            double acc = w.output.bias[o];
            for (std::size_t h = 0; h < w.hidden.out; ++h) acc += double{w.output.weight[o * w.hidden.out + h]} * hidden[h];
            dst[o * plane + px] = static_cast<float>(acc);
        }
    }
    return out;
}

// --- weight files ------------------------------------------------------------
//
// A manifest (text, one directive per line, '#' starts a comment) names one
// tensor file per parameter, relative to the manifest's directory:
//
//   evtaf-bfm 1
//   queue_depth <K>
//   stage <index> <in_slots> <out_slots> <weight> <bias> <scale>
//   dense hidden <weight> <bias>
//   dense output <weight> <bias>
//
// Stage lines appear in application order. Tensor shapes:
//   stage weight (2, out_slots, 2), bias and scale (2, out_slots, 1)
//   dense weight (1, out, in), bias (1, 1, out)

inline void save_bfm_weights(const BfmWeights& w, const std::filesystem::path& manifest) {
    w.validate();
    const auto dir = manifest.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    auto save = [&](const std::string& name, std::size_t c, std::size_t h, std::size_t wd,
                    const std::vector<float>& data) {
        write_tensor(TensorCHW(c, h, wd, data), dir / name);
        return name;
    };
    std::ostringstream m;
    m << "evtaf-bfm 1\nqueue_depth " << w.queue_depth << "\n";
    for (std::size_t i = 0; i < w.stages.size(); ++i) {
        const FoldStage& s = w.stages[i];
        const std::string base = "stage" + std::to_string(i);
        m << "stage " << i << ' ' << s.in_slots << ' ' << s.out_slots << ' '
          << save(base + "_weight.evtn", 2, s.out_slots, 2, s.weight) << ' '
          << save(base + "_bias.evtn", 2, s.out_slots, 1, s.bias) << ' '
          << save(base + "_scale.evtn", 2, s.out_slots, 1, s.scale) << "\n";
    }
    for (auto [name, layer] : {std::pair{"hidden", &w.hidden}, std::pair{"output", &w.output}}) {
        m << "dense " << name << ' ' << save(std::string(name) + "_weight.evtn", 1, layer->out, layer->in, layer->weight)
          << ' ' << save(std::string(name) + "_bias.evtn", 1, 1, layer->out, layer->bias) << "\n";
    }
    write_text_file(manifest, m.str());
}

inline BfmWeights load_bfm_weights(const std::filesystem::path& manifest) {
    const auto dir = manifest.parent_path();
    std::istringstream in(read_text_file(manifest));
    auto fail = [](std::size_t line, const std::string& why) -> void {
        throw Error(ErrorCode::ParseError, "bfm manifest line " + std::to_string(line) + ": " + why);
    };
    auto load = [&](const std::string& name, std::size_t c, std::size_t h, std::size_t wd) {
        TensorCHW t = read_tensor(dir / name);
        if (t.channels() != c || t.height() != h || t.width() != wd)
            throw Error(ErrorCode::DimMismatch, "bfm parameter " + name + " has unexpected shape");
        return std::vector<float>(t.data().begin(), t.data().end());
    };
    BfmWeights w;
    bool header = false, have_hidden = false, have_output = false;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
        std::istringstream ls(raw);
        std::string key;
        if (!(ls >> key)) continue;
        if (!header) {
            int version = 0;
            if (key != "evtaf-bfm" || !(ls >> version) || version != 1) fail(line_no, "expected 'evtaf-bfm 1'");
            header = true;
        } else if (key == "queue_depth") {
            if (!(ls >> w.queue_depth) || w.queue_depth < 1) fail(line_no, "bad queue_depth");
        } else if (key == "stage") {
            std::size_t index;
            FoldStage s;
            std::string fw, fb, fs;
            if (!(ls >> index >> s.in_slots >> s.out_slots >> fw >> fb >> fs)) fail(line_no, "bad stage line");
            if (index != w.stages.size()) fail(line_no, "stages must be listed in order");
            s.weight = load(fw, 2, s.out_slots, 2);
            s.bias = load(fb, 2, s.out_slots, 1);
            s.scale = load(fs, 2, s.out_slots, 1);
            w.stages.push_back(std::move(s));
        } else if (key == "dense") {
            std::string which, fw, fb;
            if (!(ls >> which >> fw >> fb)) fail(line_no, "bad dense line");
            TensorCHW weight = read_tensor(dir / fw);
            if (weight.channels() != 1) throw Error(ErrorCode::DimMismatch, "dense weight must have C = 1");
            DenseLayer layer{weight.width(), weight.height(),
                             std::vector<float>(weight.data().begin(), weight.data().end()),
                             load(fb, 1, 1, weight.height())};
            if (which == "hidden") {
                w.hidden = std::move(layer);
                have_hidden = true;
            } else if (which == "output") {
                w.output = std::move(layer);
                have_output = true;
            } else {
                fail(line_no, "dense layer must be 'hidden' or 'output'");
            }
        } else {
            fail(line_no, "unknown directive '" + key + "'");
        }
    }
    if (!header || !have_hidden || !have_output) throw Error(ErrorCode::ParseError, "bfm manifest incomplete");
    w.validate();
    return w;
}

}  // namespace evtaf
