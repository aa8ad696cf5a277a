#include "kdsynth/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kdsynth/errors.hpp"
#include "kdsynth/feature_synthesis.hpp"
#include "kdsynth/pipeline_synthesis.hpp"
#include "kdsynth/registry.hpp"
#include "kdsynth/report.hpp"

#ifndef KDSYNTH_DEFAULT_DATA_DIR
#define KDSYNTH_DEFAULT_DATA_DIR "."
#endif

namespace kdsynth::cli {

namespace fs = std::filesystem;

fs::path data_dir() {
    if (const char* env = std::getenv("KDSYNTH_DATA_DIR"); env && *env) return env;
    return KDSYNTH_DEFAULT_DATA_DIR;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out{"xor"};
    for (int row = 1; row <= 5; ++row) {
        out.push_back("circles-row" + std::to_string(row));
        out.push_back("circles-row" + std::to_string(row) + "-none");
    }
    return out;
}

std::optional<RunConfig> preset(const std::string& name) {
    const fs::path root = data_dir();
    RunConfig c;
    if (name == "xor") {
        c.pipeline_kb = root / "kb" / "pipeline_xor.toml";
        c.feature_kb = root / "kb" / "features.toml";
        c.generator = "xor";
        c.sequence = root / "sequences" / "xor.seq";
        return c;
    }
    for (int row = 1; row <= 5; ++row) {
        std::string base = "circles-row" + std::to_string(row);
        if (name != base && name != base + "-none") continue;
        c.pipeline_kb = root / "kb" / "pipeline_circles.toml";
        c.feature_kb = root / "kb" / "features.toml";
        c.generator = "circles";
        c.sequence = root / "sequences" / ("circles_row" + std::to_string(row) + ".seq");
        if (name != base) c.disabled.push_back("data");
        return c;
    }
    return std::nullopt;
}

Dataset load_dataset(const RunConfig& config) {
    if (config.dataset) return read_dataset_csv(*config.dataset);
    if (config.generator == "xor") return make_xor_grid();
    if (config.generator == "circles") return make_circles(config.seed);
    throw Error("no dataset: give --data <csv> or --generate xor|circles");
}

namespace {

CategoryToggles toggles_of(const RunConfig& c) {
    CategoryToggles t;
    for (const auto& d : c.disabled) {
        if (!kPreconditionCategories.contains(d)) throw Error("unknown precondition category '" + d + "'");
        t.disabled.insert(d);
    }
    return t;
}

struct Loaded {
    KnowledgeGraph kb;
    std::optional<KnowledgeGraph> feature_kb;
    Dataset data;
};

Loaded load_inputs(const RunConfig& c) {
    Loaded l;
    l.kb = load_kb(c.pipeline_kb, pipeline_catalog());
    if (c.feature_kb) l.feature_kb = load_kb(*c.feature_kb, feature_catalog());
    l.data = load_dataset(c);
    return l;
}

EngineConfig engine_config(const RunConfig& c) {
    EngineConfig e;
    e.toggles = toggles_of(c);
    e.seed = c.seed;
    e.reexecute_full = c.reexecute_full;
    e.compute_feature_values = c.compute_feature_values;
    return e;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

nlohmann::json report_for(const PipelineSpace& space, const std::vector<InputSymbol>& seq, const KnowledgeGraph& kb,
                          const RunConfig& c) {
    ReportConfig rc;
    if (!seq.empty()) {
        rc = report_config(seq, kb, toggles_of(c), c.seed);
    } else {
        rc.seed = c.seed;
        rc.disabled = c.disabled;
    }
    return render_report(summarize(space), rc);
}

std::string summary_line(const nlohmann::json& report) {
    std::ostringstream s;
    s << report["space"]["count"].get<std::size_t>() << " pipelines (theoretical max "
      << report["space"]["theoretical_max"].get<std::uint64_t>() << ")";
    const auto& st = report["stats"];
    if (st.contains("mean_logloss")) s << ", mean logloss " << st["mean_logloss"].get<double>();
    if (st.contains("stddev_logloss")) s << ", stddev " << st["stddev_logloss"].get<double>();
    return s.str();
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const RejectedInput& e) {
        err << "error: " << e.what() << "\n";
        return kRejected;
    } catch (const ValidationError& e) {
        err << "error: invalid knowledge base\n";
        for (const auto& issue : e.issues()) err << "  " << issue << "\n";
        return kInvalidKb;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kInvalidKb;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInternal;
    }
}

std::string describe(const TransitionSummary& s) {
    std::ostringstream o;
    o << s.count << (s.count == 1 ? " pipeline" : " pipelines");
    if (!s.blocked.empty()) {
        o << " (";
        for (std::size_t i = 0; i < s.blocked.size(); ++i) {
            if (i) o << "; ";
            o << s.blocked[i].node << " blocked by " << s.blocked[i].precondition << "=false";
        }
        o << ")";
    }
    return o.str();
}

} // namespace

int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!config.sequence) throw Error("no input sequence given");
        auto seq = read_sequence(*config.sequence);
        check_sequence(seq);
        auto in = load_inputs(config);
        fs::create_directories(config.out);
        std::ofstream trace_file(config.out / "trace.log", std::ios::binary);
        if (!trace_file) throw IoError("cannot write trace in '" + config.out.string() + "'");
        TraceSink sink(&trace_file);
        SynthesisEngine engine(in.kb, in.data, engine_config(config), in.feature_kb ? &*in.feature_kb : nullptr,
                               &sink);
        engine.run(seq);
        sink.close();
        auto report = report_for(engine.space(), seq, in.kb, config);
        write_file(config.out / "report.json", report_text(report));
        out << summary_line(report) << "\n";
        return static_cast<int>(kOk);
    });
}

int cmd_step(const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto inputs = load_inputs(config);
        TraceSink sink;
        SynthesisEngine engine(inputs.kb, inputs.data, engine_config(config),
                               inputs.feature_kb ? &*inputs.feature_kb : nullptr, &sink);
        struct Snapshot {
            PipelineSpace space;
            std::size_t mark;
        };
        std::vector<Snapshot> history;
        out << "state " << to_string(engine.space().state) << ", 1 pipeline; enter a symbol, undo or quit\n";
        std::string line;
        while (std::getline(in, line)) {
            std::istringstream words(line);
            std::string word;
            if (!(words >> word) || word[0] == '#') continue;
            if (word == "quit" || word == "exit") break;
            if (word == "undo") {
                if (history.empty()) {
                    out << "nothing to undo\n";
                    continue;
                }
                engine.restore(history.back().space);
                sink.rewind(history.back().mark);
                history.pop_back();
                out << "undone: " << engine.space().pipelines.size() << " pipelines, state "
                    << to_string(engine.space().state) << "\n";
                continue;
            }
            auto sym = parse_symbol(word);
            if (!sym) {
                out << "unknown symbol '" << word << "'\n";
                continue;
            }
            if (!try_next(engine.space().state, *sym)) {
                out << "rejected: no transition from " << to_string(engine.space().state) << " on " << word
                    << "; state unchanged\n";
                continue;
            }
            history.push_back(Snapshot{engine.space(), sink.size()});
            auto summary = engine.transition(*sym);
            out << describe(summary) << "\n";
            if (!summary.replied.empty()) {
                out << "  replied:";
                for (const auto& r : summary.replied) out << " " << r;
                out << "\n";
            }
        }
        sink.close();
        fs::create_directories(config.out);
        sink.write(config.out / "trace.log");
        auto report = report_for(engine.space(), engine.space().consumed, inputs.kb, config);
        write_file(config.out / "report.json", report_text(report));
        out << summary_line(report) << "\n";
        return static_cast<int>(kOk);
    });
}

int cmd_gendata(const std::string& name, std::uint64_t seed, const fs::path& path, std::ostream& err) {
    return guarded(err, [&] {
        Dataset ds;
        if (name == "xor") ds = make_xor_grid();
        else if (name == "circles") ds = make_circles(seed);
        else throw Error("unknown dataset '" + name + "' (xor, circles)");
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_dataset_csv(ds, path);
        return static_cast<int>(kOk);
    });
}

int cmd_validate(const std::vector<fs::path>& kbs, std::ostream& out, std::ostream& err) {
    ImplCatalog catalog = pipeline_catalog();
    for (const auto& op : feature_catalog().operations) catalog.operations.insert(op);
    int code = kOk;
    for (const auto& path : kbs) {
        int rc = guarded(err, [&] {
            auto g = load_kb(path, catalog);
            out << path.string() << ": ok (" << g.nodes().size() << " nodes, " << g.links().size() << " links)\n";
            return static_cast<int>(kOk);
        });
        if (rc != kOk) code = code == kOk || code == rc ? rc : kInternal;
    }
    return code;
}

int cmd_replay(const RunConfig& config, const fs::path& trace, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!config.sequence) throw Error("no input sequence given");
        auto seq = read_sequence(*config.sequence);
        auto kb = load_kb(config.pipeline_kb, pipeline_catalog());
        std::vector<TraceEvent> events;
        try {
            events = read_trace(trace);
        } catch (const ParseError& e) {
            throw Error(e.what());
        }
        auto report = render_report(replay(events), report_config(seq, kb, toggles_of(config), config.seed));
        out << report_text(report);
        return static_cast<int>(kOk);
    });
}

namespace {

struct Flags {
    std::string preset;
    std::string kb, feature_kb, data, generate, sequence, out;
    std::vector<std::string> disable;
    std::optional<std::uint64_t> seed;
    bool reexecute_full = false;
    bool no_feature_values = false;
};

void add_run_flags(CLI::App* cmd, Flags& f, bool with_sequence) {
    cmd->add_option("--preset", f.preset, "Experiment preset")->check(CLI::IsMember(preset_names()));
    cmd->add_option("--kb", f.kb, "Pipeline knowledge base (TOML)");
    cmd->add_option("--feature-kb", f.feature_kb, "Feature knowledge base (TOML)");
    cmd->add_option("--data", f.data, "Dataset CSV with a label column");
    cmd->add_option("--generate", f.generate, "Built-in dataset")->check(CLI::IsMember({"xor", "circles"}));
    if (with_sequence) cmd->add_option("--sequence", f.sequence, "Input symbol file");
    cmd->add_option("--disable", f.disable, "Disable a precondition category (repeatable)")
        ->check(CLI::IsMember({"data", "input", "structural"}));
    cmd->add_option("--seed", f.seed, "Master seed (default: $KDSYNTH_SEED or 7)");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_flag("--reexecute-full", f.reexecute_full, "Re-run every pipeline prefix from raw data");
    cmd->add_flag("--no-feature-values", f.no_feature_values, "Synthesize feature ASTs without values");
}

RunConfig resolve(const Flags& f) {
    RunConfig c;
    if (!f.preset.empty()) c = *preset(f.preset);
    if (!f.kb.empty()) c.pipeline_kb = f.kb;
    if (!f.feature_kb.empty()) c.feature_kb = fs::path(f.feature_kb);
    if (!f.data.empty()) c.dataset = fs::path(f.data);
    if (!f.generate.empty()) {
        c.generator = f.generate;
        c.dataset.reset();
    }
    if (!f.sequence.empty()) c.sequence = fs::path(f.sequence);
    for (const auto& d : f.disable)
        if (std::find(c.disabled.begin(), c.disabled.end(), d) == c.disabled.end()) c.disabled.push_back(d);
    std::sort(c.disabled.begin(), c.disabled.end());
    if (f.seed) {
        c.seed = *f.seed;
    } else if (const char* env = std::getenv("KDSYNTH_SEED"); env && *env) {
        c.seed = std::stoull(env);
    }
    if (!f.out.empty()) c.out = f.out;
    c.reexecute_full = f.reexecute_full;
    c.compute_feature_values = !f.no_feature_values;
    if (c.pipeline_kb.empty()) throw Error("no pipeline knowledge base: give --kb or --preset");
    return c;
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"Knowledge-driven pipeline and feature synthesis"};
    app.require_subcommand(1);

    Flags synth_flags, step_flags, replay_flags;
    auto* synth = app.add_subcommand("synth", "Expand an input sequence into a pipeline space");
    add_run_flags(synth, synth_flags, true);
    auto* step = app.add_subcommand("step", "Expand interactively, one symbol per line");
    add_run_flags(step, step_flags, false);

    auto* gendata = app.add_subcommand("gendata", "Write a built-in dataset as CSV");
    std::string gen_name, gen_out;
    std::optional<std::uint64_t> gen_seed;
    gendata->add_option("name", gen_name, "xor | circles")->required()->check(CLI::IsMember({"xor", "circles"}));
    gendata->add_option("--seed", gen_seed, "Seed for circles");
    gendata->add_option("--out", gen_out, "Output CSV path")->required();

    auto* validate = app.add_subcommand("validate", "Check knowledge base files");
    std::vector<std::string> kb_paths;
    validate->add_option("kb", kb_paths, "TOML files")->required();

    auto* replay_cmd = app.add_subcommand("replay", "Rebuild a report from a trace");
    add_run_flags(replay_cmd, replay_flags, true);
    std::string trace_path;
    replay_cmd->add_option("--trace", trace_path, "Trace file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // usage errors fall outside the documented codes; report them as 1
        return app.exit(e) == 0 ? kOk : kInternal;
    }

    try {
        if (*synth) return cmd_synth(resolve(synth_flags), std::cout, std::cerr);
        if (*step) return cmd_step(resolve(step_flags), std::cin, std::cout, std::cerr);
        if (*replay_cmd) return cmd_replay(resolve(replay_flags), trace_path, std::cout, std::cerr);
        if (*gendata) {
            std::uint64_t seed = 7;
            if (gen_seed) seed = *gen_seed;
            else if (const char* env = std::getenv("KDSYNTH_SEED"); env && *env) seed = std::stoull(env);
            return cmd_gendata(gen_name, seed, gen_out, std::cerr);
        }
        if (*validate) {
            std::vector<fs::path> paths(kb_paths.begin(), kb_paths.end());
            return cmd_validate(paths, std::cout, std::cerr);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}

} // namespace kdsynth::cli
