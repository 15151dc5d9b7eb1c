#include "eav/cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eav/analysis.hpp"

namespace eav::cli {

namespace {

using nlohmann::json;

bool verbose() {
    const char* v = std::getenv("EAV_VERBOSE");
    return v != nullptr && std::string(v) != "0" && std::string(v) != "";
}

void progress(const std::string& msg) {
    if (verbose()) std::cerr << "[eav] " << msg << "\n";
}

constexpr int kSchemaVersion = 1;

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) ==
            allowed.end()) {
            throw ConfigError("unknown config key \"" + it.key() + "\" in " +
                              where);
        }
    }
}

std::set<std::size_t> parse_layer_list(const json& j, std::size_t depth) {
    std::set<std::size_t> mask;
    if (j.is_string()) {
        if (j.get<std::string>() == "all") {
            for (std::size_t i = 0; i < depth; ++i) mask.insert(i);
            return mask;
        }
        if (j.get<std::string>() == "none") return mask;
        throw ConfigError("enhance.layers must be \"all\", \"none\", or an "
                          "array of indices");
    }
    if (!j.is_array()) {
        throw ConfigError("enhance.layers must be \"all\", \"none\", or an "
                          "array of indices");
    }
    for (const auto& v : j) {
        if (!v.is_number_unsigned()) {
            throw ConfigError("enhance.layers entries must be nonnegative "
                              "integers");
        }
        mask.insert(v.get<std::size_t>());
    }
    return mask;
}

}  // namespace

RunSpec load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config file not found: " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " +
                          e.what());
    }

    require_keys(j,
                 {"schema_version", "seed", "batch", "frames", "channels",
                  "height", "width", "steps", "depth", "d_k", "heads",
                  "layout", "alpha_bar_start", "alpha_bar_end", "enhance"},
                 path.string());

    if (j.value("schema_version", kSchemaVersion) != kSchemaVersion) {
        throw ConfigError("unsupported schema_version in " + path.string());
    }

    RunSpec spec;
    spec.seed = j.value("seed", std::uint64_t{42});
    spec.batch = j.value("batch", std::size_t{1});
    spec.frames = j.value("frames", std::size_t{8});
    spec.channels = j.value("channels", std::size_t{16});
    spec.height = j.value("height", std::size_t{4});
    spec.width = j.value("width", std::size_t{4});
    spec.steps = j.value("steps", std::size_t{10});
    spec.depth = j.value("depth", std::size_t{4});
    spec.d_k = j.value("d_k", std::size_t{8});
    spec.heads = j.value("heads", std::size_t{2});
    spec.alpha_bar_start = j.value("alpha_bar_start", 1.0);
    spec.alpha_bar_end = j.value("alpha_bar_end", 0.01);
    spec.layout = layout_from_string(j.value("layout", std::string("temporal")));

    if (j.contains("enhance")) {
        const json& e = j.at("enhance");
        require_keys(e, {"strategy", "tau", "clip", "layers"},
                     path.string() + " enhance");
        spec.enhance.strategy =
            strategy_from_string(e.value("strategy", std::string("baseline")));
        spec.enhance.tau = e.value("tau", 1.0);
        spec.enhance.clip_enabled = e.value("clip", true);
        spec.enhance.layer_mask = e.contains("layers")
                                      ? parse_layer_list(e.at("layers"), spec.depth)
                                      : parse_layer_list(json("all"), spec.depth);
    } else {
        spec.enhance.layer_mask = parse_layer_list(json("all"), spec.depth);
    }

    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw ConfigError("invalid config " + path.string() + ": " + e.what());
    }
    return spec;
}

namespace {

json spec_to_json(const RunSpec& spec) {
    json e;
    e["strategy"] = strategy_name(spec.enhance.strategy);
    e["tau"] = spec.enhance.tau;
    e["clip"] = spec.enhance.clip_enabled;
    e["layers"] = std::vector<std::size_t>(spec.enhance.layer_mask.begin(),
                                           spec.enhance.layer_mask.end());
    json j;
    j["schema_version"] = kSchemaVersion;
    j["seed"] = spec.seed;
    j["batch"] = spec.batch;
    j["frames"] = spec.frames;
    j["channels"] = spec.channels;
    j["height"] = spec.height;
    j["width"] = spec.width;
    j["steps"] = spec.steps;
    j["depth"] = spec.depth;
    j["d_k"] = spec.d_k;
    j["heads"] = spec.heads;
    j["layout"] = layout_name(spec.layout);
    j["alpha_bar_start"] = spec.alpha_bar_start;
    j["alpha_bar_end"] = spec.alpha_bar_end;
    j["enhance"] = e;
    return j;
}

std::string timestamp_utc() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

void write_manifest(const std::filesystem::path& dir, const RunSpec& spec,
                    const std::string& command,
                    const std::vector<std::string>& outputs) {
    json m;
    m["schema_version"] = kSchemaVersion;
    m["command"] = command;
    m["seed"] = spec.seed;
    m["config_hash"] = config_hash(spec);
    m["config"] = spec_to_json(spec);
    m["timestamp"] = timestamp_utc();
    m["outputs"] = outputs;
    atomic_write_text(dir / "manifest.json", m.dump(2) + "\n");
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> tau;
    std::optional<std::string> strategy;
    std::optional<std::string> layers;
    std::optional<bool> clip;
};

void apply_overrides(RunSpec& spec, const Overrides& o) {
    if (o.seed) spec.seed = *o.seed;
    if (o.tau) spec.enhance.tau = *o.tau;
    if (o.strategy) spec.enhance.strategy = strategy_from_string(*o.strategy);
    if (o.clip) spec.enhance.clip_enabled = *o.clip;
    if (o.layers) {
        json j;
        if (*o.layers == "all" || *o.layers == "none") {
            j = *o.layers;
        } else {
            j = json::array();
            std::istringstream ls(*o.layers);
            std::string item;
            while (std::getline(ls, item, ',')) {
                j.push_back(static_cast<std::size_t>(std::stoul(item)));
            }
        }
        spec.enhance.layer_mask = parse_layer_list(j, spec.depth);
    }
    spec.validate();
}

void write_trajectory(const std::filesystem::path& path,
                      const std::vector<TraceRecord>& trace) {
    std::ostringstream os;
    os << "step,layer,cfi,cfi_enhanced\n";
    std::vector<TraceRecord> sorted = trace;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const TraceRecord& a, const TraceRecord& b) {
                         return a.step < b.step ||
                                (a.step == b.step && a.layer < b.layer);
                     });
    for (const TraceRecord& r : sorted) {
        os << r.step << ',' << r.layer << ',' << format_double(r.cfi) << ','
           << format_double(r.cfi_enhanced) << "\n";
    }
    atomic_write_text(path, os.str());
}

int cmd_run(const RunSpec& spec, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    progress("running " + strategy_name(spec.enhance.strategy) + " pipeline");
    RunResult result = run(spec);
    write_trace(out_dir / "trace.csv", result.trace);
    write_tensor(out_dir / "latent.txt", result.latent.data);
    write_manifest(out_dir, spec, "run", {"trace.csv", "latent.txt"});
    std::cout << "run complete: " << result.trace.size() << " trace records, "
              << "config hash " << config_hash(spec) << "\n";
    return kExitOk;
}

int cmd_compare(const RunSpec& base_spec,
                const std::vector<std::string>& strategy_names,
                const std::filesystem::path& out_dir) {
    if (strategy_names.size() < 2) {
        throw ConfigError("compare needs at least two strategies");
    }
    std::filesystem::create_directories(out_dir);

    std::vector<std::vector<TraceRecord>> traces;
    std::vector<std::string> outputs;
    for (const std::string& name : strategy_names) {
        RunSpec spec = base_spec;
        spec.enhance.strategy = strategy_from_string(name);
        progress("compare: running " + name);
        RunResult result = run(spec);
        write_trace(out_dir / ("trace_" + name + ".csv"), result.trace);
        write_trajectory(out_dir / ("trajectory_" + name + ".csv"),
                         result.trace);
        outputs.push_back("trace_" + name + ".csv");
        outputs.push_back("trajectory_" + name + ".csv");
        traces.push_back(std::move(result.trace));
    }

    std::ostringstream summary;
    summary << "strategy,step,layer,max_abs_diagonal,mean_off_diagonal,"
               "max_abs_entry\n";
    for (std::size_t s = 1; s < strategy_names.size(); ++s) {
        const std::string& name = strategy_names[s];
        std::ostringstream diffs;
        diffs << "step,layer,i,j,delta\n";
        if (traces[s].size() != traces[0].size()) {
            throw PairingError("compare: trace lengths differ for " + name);
        }
        DiffMap last;
        for (std::size_t r = 0; r < traces[s].size(); ++r) {
            DiffMap d = diff_map(traces[0][r], traces[s][r]);
            const std::size_t f = d.values.shape()[0];
            for (std::size_t i = 0; i < f; ++i) {
                for (std::size_t j = 0; j < f; ++j) {
                    diffs << d.step << ',' << d.layer << ',' << i << ',' << j
                          << ',' << format_double(d.values.at({i, j})) << "\n";
                }
            }
            summary << name << ',' << d.step << ',' << d.layer << ','
                    << format_double(d.max_abs_diagonal) << ','
                    << format_double(d.mean_off_diagonal) << ','
                    << format_double(d.max_abs_entry) << "\n";
            last = std::move(d);
        }
        atomic_write_text(out_dir / ("diff_" + name + ".csv"), diffs.str());
        write_map_pgm(out_dir / ("diff_" + name + ".pgm"), last.values);
        outputs.push_back("diff_" + name + ".csv");
        outputs.push_back("diff_" + name + ".pgm");
    }
    atomic_write_text(out_dir / "summary.csv", summary.str());
    outputs.push_back("summary.csv");
    write_manifest(out_dir, base_spec, "compare", outputs);
    std::cout << "compare complete: " << strategy_names.size()
              << " strategies\n";
    return kExitOk;
}

int cmd_sweep(const RunSpec& base_spec, const std::vector<double>& taus,
              const std::filesystem::path& out_dir) {
    if (taus.empty()) throw ConfigError("sweep needs at least one tau value");
    for (double t : taus) {
        if (!std::isfinite(t)) {
            throw ConfigError("sweep: tau values must be finite");
        }
    }
    std::filesystem::create_directories(out_dir);

    std::ostringstream consolidated;
    consolidated << "tau,step,layer,cfi,cfi_enhanced\n";
    std::vector<std::string> outputs;
    for (std::size_t i = 0; i < taus.size(); ++i) {
        RunSpec spec = base_spec;
        spec.enhance.tau = taus[i];
        progress("sweep: tau = " + format_double(taus[i]));
        RunResult result = run(spec);
        const std::string name = "trajectory_tau_" + std::to_string(i) + ".csv";
        write_trajectory(out_dir / name, result.trace);
        outputs.push_back(name);
        for (const TraceRecord& r : result.trace) {
            consolidated << format_double(taus[i]) << ',' << r.step << ','
                         << r.layer << ',' << format_double(r.cfi) << ','
                         << format_double(r.cfi_enhanced) << "\n";
        }
    }
    atomic_write_text(out_dir / "sweep.csv", consolidated.str());
    outputs.push_back("sweep.csv");
    write_manifest(out_dir, base_spec, "sweep", outputs);
    std::cout << "sweep complete: " << taus.size() << " tau values\n";
    return kExitOk;
}

int cmd_bench(const RunSpec& spec, std::size_t repetitions,
              const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    progress("bench: " + std::to_string(repetitions) + " repetitions");
    BenchReport report = overhead_bench(spec, repetitions);

    const std::string strategy = strategy_name(spec.enhance.strategy);
    std::ostringstream csv;
    csv << "strategy,median_seconds\n"
        << "baseline," << format_double(report.median_baseline_s) << "\n"
        << strategy << "," << format_double(report.median_enhanced_s) << "\n";
    atomic_write_text(out_dir / "bench.csv", csv.str());

    std::ostringstream txt;
    txt << "repetitions: " << report.repetitions << "\n"
        << "baseline median: " << format_double(report.median_baseline_s)
        << " s\n"
        << strategy << " median: " << format_double(report.median_enhanced_s)
        << " s\n"
        << "overhead: " << format_double(100.0 * report.overhead_fraction)
        << "%\n";
    atomic_write_text(out_dir / "bench.txt", txt.str());
    write_manifest(out_dir, spec, "bench", {"bench.csv", "bench.txt"});
    std::cout << txt.str();
    return kExitOk;
}

}  // namespace

std::string config_hash(const RunSpec& spec) {
    const std::string canonical = spec_to_json(spec).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

int main(const std::vector<std::string>& args) {
    CLI::App app{"Enhance-A-Video toy diffusion-transformer sandbox"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    Overrides overrides;
    std::vector<std::string> strategies;
    std::vector<double> taus;
    std::size_t repetitions = 5;
    bool clip_on = false;
    bool clip_off = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Config file path")
            ->required();
        cmd->add_option("--out", out_dir, "Output directory");
        cmd->add_option("--seed", overrides.seed, "Override seed");
        cmd->add_option("--tau", overrides.tau, "Override enhance temperature");
        cmd->add_option("--strategy", overrides.strategy, "Override strategy");
        cmd->add_option("--layers", overrides.layers,
                        "Override layer mask: \"all\", \"none\", or i,j,...");
        cmd->add_flag("--clip", clip_on, "Force clipping on");
        cmd->add_flag("--no-clip", clip_off, "Force clipping off");
    };

    CLI::App* c_run = app.add_subcommand("run", "Run one pipeline");
    add_common(c_run);

    CLI::App* c_compare =
        app.add_subcommand("compare", "Run several strategies on one seed");
    add_common(c_compare);
    c_compare->add_option("--strategies", strategies, "Strategy names (>= 2)")
        ->required()
        ->delimiter(',');

    CLI::App* c_sweep = app.add_subcommand("sweep", "Sweep tau values");
    add_common(c_sweep);
    c_sweep->add_option("--tau-values", taus, "Tau values to sweep")
        ->required()
        ->delimiter(',');

    CLI::App* c_bench = app.add_subcommand("bench", "Measure overhead");
    add_common(c_bench);
    c_bench->add_option("--reps", repetitions, "Repetitions (>= 3)");

    std::vector<std::string> argv_storage = args;
    std::vector<const char*> argv;
    argv.push_back("eav");
    for (const std::string& a : argv_storage) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (clip_on && clip_off) {
        std::cerr << "usage error: --clip conflicts with --no-clip\n";
        return kExitUsage;
    }
    if (clip_on) overrides.clip = true;
    if (clip_off) overrides.clip = false;

    try {
        RunSpec spec = load_config(config_path);
        apply_overrides(spec, overrides);

        if (c_run->parsed()) return cmd_run(spec, out_dir);
        if (c_compare->parsed()) return cmd_compare(spec, strategies, out_dir);
        if (c_sweep->parsed()) return cmd_sweep(spec, taus, out_dir);
        if (c_bench->parsed()) return cmd_bench(spec, repetitions, out_dir);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParameterError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace eav::cli
