#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ym2/experiments.hpp"

using namespace ym2;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit { kPass = 0, kCheckFail = 1, kConfigError = 2 };

struct CommonOptions {
    std::string config, group, out = "ym2-out";
    std::vector<std::string> sets;
    long seed = -1, samples = -1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "config file (key = value lines or JSON)");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--samples", o.samples, "replica count n");
    cmd->add_option("--group", o.group, "u1 | su2 | sun:N | un:N");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--set", o.sets, "override KEY=VALUE (repeatable)");
}

ExperimentConfig build_config(const std::string& experiment, const CommonOptions& o) {
    auto cfg = ExperimentConfig::defaults(experiment);
    if (!o.config.empty()) cfg.merge_file(o.config);
    for (const auto& kv : o.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed >= 0) cfg.set("seed", std::to_string(o.seed));
    if (o.samples >= 0) cfg.set("samples", std::to_string(o.samples));
    if (!o.group.empty()) cfg.set("group", o.group);
    cfg.validate();
    return cfg;
}

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void print_table(const std::vector<ResultRecord>& records) {
    std::printf("%-40s %14s %12s %14s %9s  %s\n", "check", "lhs", "stderr", "rhs", "z", "result");
    for (const auto& r : records) {
        std::printf("%-40s %14.6g %12.3g %14.6g %9.3g  %s\n", r.label.c_str(), r.lhs.mean.real(), r.stderr_,
                    r.rhs.mean.real(), r.z, r.pass ? "PASS" : "FAIL");
    }
}

void write_records(const std::filesystem::path& dir, const std::string& stem, const std::vector<ResultRecord>& rs) {
    std::ofstream jl(dir / (stem + ".jsonl"));
    for (const auto& r : rs) jl << record_json(r) << "\n";
    std::ofstream csv(dir / "results.csv");
    csv << csv_header() << "\n";
    for (const auto& r : rs) csv << csv_row(r) << "\n";
}

json manifest_base(const std::string& command, const ExperimentConfig& cfg, const std::string& started) {
    json m;
    m["tool"] = "ym2";
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = cfg.values();
    m["seed_derivation"] =
        "replica k: mix64(master ^ mix64(0x5eed0000 + k + 0x632be59bd9b4e019)), mix64 = SplitMix64 finalizer";
    m["started"] = started;
    return m;
}

void write_manifest(const std::filesystem::path& dir, json m) {
    m["finished"] = utc_now();
    std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
}

int run_command(const std::string& name, const CommonOptions& o) {
    auto cfg = build_config(name, o);
    const std::string started = utc_now();
    auto run = run_experiment(cfg);
    std::filesystem::path dir(o.out);
    std::filesystem::create_directories(dir);
    write_records(dir, name, run.records);
    print_table(run.records);
    const bool pass = run.pass();
    auto m = manifest_base(name, cfg, started);
    json exp;
    exp["name"] = name;
    exp["records"] = run.records.size();
    exp["pass"] = pass;
    exp["wall_time"] = run.wall_time;
    m["experiments"] = json::array({exp});
    m["pass"] = pass;
    m["exit_status"] = pass ? kPass : kCheckFail;
    write_manifest(dir, m);
    std::printf("%s: %s (%.1fs)\n", name.c_str(), pass ? "PASS" : "FAIL", run.wall_time);
    return pass ? kPass : kCheckFail;
}

std::vector<double> parse_values(const std::string& s) {
    auto cfg = ExperimentConfig::defaults("smooth-loop");
    cfg.set("eps", s);
    return cfg.list("eps");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ym2: stochastic and smooth Yang-Mills verification harness"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    const std::vector<std::string> commands{"wilson-decay", "mm-check",   "ibp-check",      "girsanov-check",
                                            "loop-expansion", "smooth-lab", "oracle-vs-field"};
    CommonOptions opts;
    std::string chosen;
    for (const auto& name : commands) {
        auto* cmd = app.add_subcommand(name, "run the " + name + " experiment");
        add_common(cmd, opts);
        cmd->callback([&chosen, name] { chosen = name; });
    }

    std::string target, param, values_text, metric = "gap";
    double min_slope = std::numeric_limits<double>::quiet_NaN(), max_slope = min_slope;
    auto* sweep = app.add_subcommand("sweep", "run an experiment over a monotone parameter list and fit a log-log slope");
    sweep->add_option("experiment", target, "experiment to sweep (any print-config name)")->required();
    sweep->add_option("--param", param, "config key to vary")->required();
    sweep->add_option("--values", values_text, "comma separated, at least 3, monotone")->required();
    sweep->add_option("--metric", metric, "gap | stderr | stderr2 | lhs");
    sweep->add_option("--min-slope", min_slope, "pass requires slope >= this");
    sweep->add_option("--max-slope", max_slope, "pass requires slope <= this");
    add_common(sweep, opts);
    sweep->callback([&chosen] { chosen = "sweep"; });

    std::string print_target;
    auto* pc = app.add_subcommand("print-config", "print every config key with its default");
    pc->add_option("experiment", print_target, "experiment name (default: all)");
    pc->callback([&chosen] { chosen = "print-config"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kConfigError;
    }

    try {
        if (chosen == "print-config") {
            std::vector<std::string> names = print_target.empty() ? experiment_names() : std::vector{print_target};
            for (const auto& n : names) std::cout << ExperimentConfig::defaults(n).to_text() << "\n";
            return kPass;
        }
        if (chosen == "sweep") {
            auto cfg = build_config(target, opts);
            const std::string started = utc_now();
            auto res = run_sweep(cfg, param, parse_values(values_text), metric, min_slope, max_slope);
            std::filesystem::path dir(opts.out);
            std::filesystem::create_directories(dir);
            write_records(dir, target + "-sweep", res.records);
            print_table(res.records);
            auto m = manifest_base("sweep " + target, cfg, started);
            json fit;
            fit["param"] = param;
            fit["metric"] = metric;
            fit["values"] = res.values;
            fit["metrics"] = res.metrics;
            fit["slope"] = res.fit.slope;
            fit["slope_stderr"] = res.fit.slope_stderr;
            fit["band"] = {res.band_lo, res.band_hi};
            m["sweep"] = fit;
            m["pass"] = res.pass;
            m["exit_status"] = res.pass ? kPass : kCheckFail;
            write_manifest(dir, m);
            std::printf("slope %.4f +- %.4f (band [%.4f, %.4f]): %s\n", res.fit.slope, res.fit.slope_stderr,
                        res.band_lo, res.band_hi, res.pass ? "PASS" : "FAIL");
            return res.pass ? kPass : kCheckFail;
        }
        return run_command(chosen, opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const GeometryError& e) {
        std::cerr << "geometry error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return kCheckFail;
    }
}
