// evtaf: command-line front end for encoding, augmentation, motion levels,
// evaluation and representation-time benchmarks.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "evtaf/evtaf.hpp"

namespace fs = std::filesystem;
using namespace evtaf;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// --config <json>: an object of long-option names (without dashes) to
/// values, applied to the subcommand being run. Command-line flags take
/// precedence.
class JsonConfig : public CLI::Config {
public:
    std::string section;  ///< subcommand the top-level keys belong to

    std::string to_config(const CLI::App*, bool, bool, std::string) const override {
        throw CLI::ConfigError("writing JSON config is not supported");
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            input >> j;
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConfigError(std::string("invalid JSON config: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConfigError("JSON config must be an object");
        std::vector<CLI::ConfigItem> items;
        collect(j, section.empty() ? std::vector<std::string>{} : std::vector<std::string>{section}, items);
        return items;
    }

private:
    static std::string scalar(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    static void collect(const nlohmann::json& obj, const std::vector<std::string>& parents,
                        std::vector<CLI::ConfigItem>& items) {
        for (const auto& [key, value] : obj.items()) {
            if (value.is_object()) {
                auto nested = parents;
                nested.push_back(key);
                collect(value, nested, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            else
                item.inputs.push_back(scalar(value));
            items.push_back(std::move(item));
        }
    }
};

std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Runs fn(i) for i in [0, n) on `jobs` threads; results must not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

struct StreamArgs {
    std::string input;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    Micros t_max = 0;

    void add(CLI::App* app) {
        app->add_option("--input", input, "event file (.csv, otherwise binary EVST)");
        app->add_option("--width", width, "frame width (CSV input only)");
        app->add_option("--height", height, "frame height (CSV input only)");
        app->add_option("--t-max-us", t_max, "record duration in us (CSV input only)");
    }

    EventStream load() const { return load_events(input, FrameGeometry{width, height, t_max}); }
};

struct EncoderArgs {
    std::string rep = "taf";
    EncoderParams params;
    std::string kernel = "rect";

    void add(CLI::App* app) {
        app->add_option("--rep", rep, "representation")
            ->check(CLI::IsMember({"taf", "volume", "count", "sae"}))
            ->capture_default_str();
        app->add_option("--k", params.queue_depth, "TAF queue depth K")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--b", params.bins, "Event Volume bins B")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--n", params.recent_events, "Event Count Image N")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--lambda", params.lambda, "SAE decay per us")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--delta-tau-us", params.delta_tau, "detection period in us")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        app->add_option("--kernel", kernel, "Event Volume kernel")
            ->check(CLI::IsMember({"rect", "triangular"}))
            ->capture_default_str();
    }

    Representation representation() const { return *parse_representation(rep); }
    VolumeKernel volume_kernel() const { return kernel == "rect" ? VolumeKernel::Rect : VolumeKernel::Triangular; }
};

// --- encode ------------------------------------------------------------------

struct EncodeCmd {
    StreamArgs stream;
    EncoderArgs enc;
    std::string at_annotations;
    std::string out_dir = ".";
    std::string stem;
    unsigned jobs = 1;

    int run() const {
        EventStream s = stream.load();
        EncoderParams p = enc.params;
        p.k_upper = p.delta_tau;
        p.validate();
        const std::string file_stem = stem.empty() ? fs::path(stream.input).stem().string() : stem;
        fs::create_directories(out_dir);
        auto out_path = [&](Micros t) { return fs::path(out_dir) / (file_stem + "_" + std::to_string(t) + ".evtn"); };

        std::vector<Micros> times;
        if (!at_annotations.empty()) {
            std::set<Micros> unique;
            for (const Annotation& a : read_annotations_csv(read_text_file(at_annotations))) unique.insert(a.t);
            times.assign(unique.begin(), unique.end());
        } else {
            const std::int64_t steps = (s.geometry.t_max + p.delta_tau - 1) / p.delta_tau;
            for (std::int64_t n = 1; n <= steps; ++n) times.push_back(n * p.delta_tau);
        }

        const Representation rep = enc.representation();
        if (rep == Representation::Taf) {
            // incremental: visit every period up to the last requested time
            std::set<Micros> wanted(times.begin(), times.end());
            for (Micros t : wanted)
                if (t % p.delta_tau != 0)
                    throw Error(ErrorCode::InvalidParam,
                                "TAF encodes at multiples of delta_tau; " + std::to_string(t) + " is not");
            TafState st = taf_init(s.geometry, p.queue_depth, p.delta_tau);
            const Micros last = wanted.empty() ? 0 : *wanted.rbegin();
            while (st.time() < last) {
                taf_step(st, s);
                if (wanted.count(st.time())) write_tensor(taf_render(st, s.geometry.t_max), out_path(st.time()));
            }
        } else {
            parallel_for(times.size(), jobs, [&](std::size_t i) {
                const Micros t = times[i];
                TensorCHW out;
                switch (rep) {
                case Representation::Volume: out = event_volume(s, t, p.delta_tau, p.bins, enc.volume_kernel()); break;
                case Representation::Count: out = event_count_image(s, t, p.recent_events); break;
                case Representation::Sae: out = surface_active_events(s, t, p.lambda); break;
                case Representation::Taf: break;
                }
                write_tensor(out, out_path(t));
            });
        }
        std::cout << "wrote " << times.size() << " tensors to " << out_dir << "\n";
        return 0;
    }
};

// --- bench -------------------------------------------------------------------

struct BenchCmd {
    StreamArgs stream;
    EncoderArgs enc;
    bool synthetic = false;
    std::size_t events_per_window = 100'000;
    std::uint64_t seed = 0;
    std::size_t steps = 100;
    std::size_t warmup = 10;
    std::string csv;

    int run() const {
        EncoderParams p = enc.params;
        p.k_upper = p.delta_tau;
        EventStream s;
        if (synthetic) {
            const std::uint32_t w = stream.width ? stream.width : 304, h = stream.height ? stream.height : 240;
            s = synthetic_stream(w, h, steps + warmup, events_per_window, p.delta_tau, seed);
        } else {
            if (stream.input.empty()) throw CLI::RequiredError("--input or --synthetic");
            s = stream.load();
        }
        BenchReport r = run_bench(s, enc.representation(), p, steps, warmup);
        std::cout << r.text();
        if (!csv.empty()) write_text_file(csv, r.csv());
        return 0;
    }
};

// --- levels ------------------------------------------------------------------

struct LevelsCmd {
    std::string flows;
    std::string annotations;
    std::string out;
    std::string boundaries_out;
    std::string boundaries_in;

    static std::array<double, 4> read_boundaries(const std::string& path) {
        std::array<double, 4> b{};
        std::size_t n = 0;
        std::istringstream in(read_text_file(path));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || !std::isdigit(static_cast<unsigned char>(line[0]))) continue;
            auto comma = line.find(',');
            if (comma == std::string::npos || n >= 4) throw Error(ErrorCode::ParseError, "bad boundaries file");
            b[n++] = std::stod(line.substr(comma + 1));
        }
        if (n != 4) throw Error(ErrorCode::ParseError, "boundaries file needs 4 rows");
        return b;
    }

    int run() const {
        std::map<Micros, fs::path> flow_at;
        for (const auto& entry : fs::directory_iterator(flows)) {
            if (entry.path().extension() != ".flow") continue;
            FlowField f = read_flow(entry.path());
            flow_at[f.t] = entry.path();
        }
        if (flow_at.empty()) throw Error(ErrorCode::EmptyInput, "no .flow files in " + flows);
        const FlowField first = read_flow(flow_at.begin()->second);

        auto boxes = read_annotations_csv(read_text_file(annotations));
        auto kept = sanitize_boxes_indexed(boxes, first.width, first.height);

        std::map<Micros, IntensityPlane> planes;
        std::vector<double> values;
        for (const Annotation& a : kept.boxes) {
            auto it = planes.find(a.t);
            if (it == planes.end()) {
                auto path = flow_at.find(a.t);
                if (path == flow_at.end())
                    throw Error(ErrorCode::EmptyInput, "no flow field at annotation time " + std::to_string(a.t));
                FlowField f = read_flow(path->second);
                if (f.width != first.width || f.height != first.height)
                    throw Error(ErrorCode::DimMismatch, "flow fields differ in size");
                it = planes.emplace(a.t, flow_intensity(f)).first;
            }
            values.push_back(bbofd(it->second, a.box));
        }
        MotionLevels m;
        if (!boundaries_in.empty()) {
            m.boundaries = read_boundaries(boundaries_in);
            for (double v : values) m.levels.push_back(m.level_of(v));
        } else {
            m = motion_levels(values);
        }

        std::string csv = "t,box_index,bbofd,level\n";
        for (std::size_t i = 0; i < values.size(); ++i)
            csv += std::to_string(kept.boxes[i].t) + "," + std::to_string(kept.source_index[i]) + "," +
                   shortest(values[i]) + "," + std::to_string(m.levels[i]) + "\n";
        write_text_file(out, csv);

        std::string sidecar = "quantile,bbofd\n";
        for (std::size_t i = 0; i < m.boundaries.size(); ++i)
            sidecar += std::to_string(20 * (i + 1)) + "," + shortest(m.boundaries[i]) + "\n";
        write_text_file(boundaries_out.empty() ? out + ".boundaries.csv" : boundaries_out, sidecar);

        std::array<int, 5> counts{};
        for (int l : m.levels) ++counts[l - 1];
        std::cout << "boxes " << boxes.size() << " kept " << kept.boxes.size() << "\n";
        for (int l = 0; l < 5; ++l) std::cout << "Lv" << l + 1 << " " << counts[l] << "\n";
        return 0;
    }
};

// --- eval --------------------------------------------------------------------

struct EvalCmd {
    std::string detections;
    std::string annotations;
    std::string levels;
    Micros tolerance = 0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::string out;

    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", v);
        return buf;
    }

    int run() const {
        auto dets = read_detections_csv(read_text_file(detections));
        auto gts = read_annotations_csv(read_text_file(annotations));
        if (width > 0 && height > 0)
            for (Annotation& a : gts) clip_box(a.box, width, height);
        EvalConfig cfg;
        cfg.timestamp_tolerance = tolerance;

        std::string text, csv = "scope,key,map\n";
        auto emit = [&](const std::string& scope, const std::string& key, const MapResult* r) {
            csv += scope + "," + key + "," + (r ? shortest(r->map) : std::string()) + "\n";
        };

        MapResult overall;
        std::optional<LevelMapResult> by_level;
        if (!levels.empty()) {
            // rows t,box_index,bbofd,level; unlisted annotations become ignore regions
            std::vector<int> level_of(gts.size(), 0);
            std::istringstream in(read_text_file(levels));
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty() || !std::isdigit(static_cast<unsigned char>(line[0]))) continue;
                std::vector<std::string> f;
                std::stringstream ls(line);
                for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
                if (f.size() < 4) throw Error(ErrorCode::ParseError, "levels line " + std::to_string(line_no));
                std::size_t idx = std::stoul(f[1]);
                if (idx >= gts.size()) throw Error(ErrorCode::MissingLevel, "box_index out of range");
                level_of[idx] = std::stoi(f[3]);
            }
            std::vector<Annotation> kept, excluded;
            std::vector<int> kept_levels;
            for (std::size_t i = 0; i < gts.size(); ++i) {
                if (level_of[i] == 0) {
                    excluded.push_back(gts[i]);
                } else {
                    kept.push_back(gts[i]);
                    kept_levels.push_back(level_of[i]);
                }
            }
            by_level = map_by_level(dets, kept, kept_levels, cfg, excluded);
            overall = by_level->overall;
        } else {
            overall = map_metric(dets, gts, cfg);
        }

        text += "mAP " + fmt(overall.map) + "\n";
        if (overall.empty) text += "warning: no ground truth to evaluate\n";
        emit("overall", "all", &overall);
        for (const ClassResult& c : overall.per_class) {
            text += "class " + std::to_string(c.class_id) + " mAP " + fmt(c.mean_ap) + "\n";
            MapResult one;
            one.map = c.mean_ap;
            emit("class", std::to_string(c.class_id), &one);
        }
        if (by_level) {
            for (int l = 0; l < 5; ++l) {
                const auto& r = by_level->by_level[l];
                text += "Lv" + std::to_string(l + 1) + " mAP " + (r ? fmt(r->map) : std::string("-")) + " (" +
                        std::to_string(by_level->gt_count[l]) + " boxes)\n";
                emit("level", std::to_string(l + 1), r ? &*r : nullptr);
            }
        }
        std::cout << text;
        if (!out.empty()) write_text_file(out, csv);
        return 0;
    }
};

// --- augment -----------------------------------------------------------------

struct AugmentCmd {
    std::string input;
    std::string output;
    AugmentConfig cfg;

    int run() const {
        write_tensor(augment(read_tensor(input), cfg), output);
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-camera representation toolkit"};
    app.require_subcommand(1);
    auto json = std::make_shared<JsonConfig>();

    app.config_formatter(json);
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "JSON file supplying option values (flags override)");
    auto with_config = [](CLI::App* sub) { sub->fallthrough(); };

    EncodeCmd encode;
    auto* enc = app.add_subcommand("encode", "encode an event file into tensor files");
    encode.stream.add(enc);
    enc->get_option("--input")->required();
    encode.enc.add(enc);
    enc->add_option("--at-annotations", encode.at_annotations, "encode at the timestamps of this annotation CSV");
    enc->add_option("--out-dir", encode.out_dir, "output directory")->capture_default_str();
    enc->add_option("--stem", encode.stem, "output file stem (default: input stem)");
    enc->add_option("--jobs", encode.jobs, "worker threads (non-TAF)")->check(CLI::PositiveNumber);
    with_config(enc);

    BenchCmd bench;
    auto* ben = app.add_subcommand("bench", "time a representation per detection step");
    bench.stream.add(ben);
    bench.enc.add(ben);
    ben->add_flag("--synthetic", bench.synthetic, "generate a uniform synthetic stream instead of --input");
    ben->add_option("--events-per-window", bench.events_per_window, "synthetic events per period")->capture_default_str();
    ben->add_option("--seed", bench.seed, "synthetic stream seed")->capture_default_str();
    ben->add_option("--steps", bench.steps, "measured steps")->capture_default_str();
    ben->add_option("--warmup", bench.warmup, "warm-up steps excluded from stats")->capture_default_str();
    ben->add_option("--csv", bench.csv, "write per-step samples to this CSV");
    with_config(ben);

    LevelsCmd levels;
    auto* lev = app.add_subcommand("levels", "compute BBOFD and motion levels per annotation");
    lev->add_option("--flows", levels.flows, "directory of .flow files")->required();
    lev->add_option("--annotations", levels.annotations, "annotation CSV")->required();
    lev->add_option("--out", levels.out, "output CSV t,box_index,bbofd,level")->required();
    lev->add_option("--boundaries", levels.boundaries_out, "boundary sidecar path (default <out>.boundaries.csv)");
    lev->add_option("--boundaries-in", levels.boundaries_in, "reuse boundaries from an earlier sidecar");
    with_config(lev);

    EvalCmd eval;
    auto* ev = app.add_subcommand("eval", "mAP@[0.5:0.05:0.95] overall, per class and per motion level");
    ev->add_option("--detections", eval.detections, "detection CSV")->required();
    ev->add_option("--annotations", eval.annotations, "annotation CSV")->required();
    ev->add_option("--levels", eval.levels, "levels CSV from `levels`");
    ev->add_option("--tolerance-us", eval.tolerance, "timestamp tolerance in us")->capture_default_str();
    ev->add_option("--width", eval.width, "clip annotations to this frame width");
    ev->add_option("--height", eval.height, "clip annotations to this frame height");
    ev->add_option("--out", eval.out, "write results CSV");
    with_config(ev);

    AugmentCmd aug;
    auto* au = app.add_subcommand("augment", "random flip / resize-crop of a tensor file");
    au->add_option("--input", aug.input, "input tensor")->required();
    au->add_option("--output", aug.output, "output tensor")->required();
    au->add_option("--seed", aug.cfg.seed, "random seed")->capture_default_str();
    au->add_option("--p1", aug.cfg.flip_probability, "flip probability")->capture_default_str();
    au->add_option("--p2", aug.cfg.crop_probability, "crop probability")->capture_default_str();
    au->add_option("--alpha", aug.cfg.alpha, "resize factor")->capture_default_str();
    with_config(au);

    for (int i = 1; i < argc; ++i)
        if (app.get_subcommand_no_throw(argv[i]) != nullptr) {
            json->section = argv[i];
            break;
        }

    try {
        app.parse(argc, argv);
    } catch (const CLI::FileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (enc->parsed()) return encode.run();
        if (ben->parsed()) return bench.run();
        if (lev->parsed()) return levels.run();
        if (ev->parsed()) return eval.run();
        if (au->parsed()) return aug.run();
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
