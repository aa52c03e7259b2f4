#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ym2/verify.hpp"

namespace ym2 {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat string key/value configuration with per-experiment defaults.
class ExperimentConfig {
public:
    // Every key the experiment understands, at its default value.
    static ExperimentConfig defaults(const std::string& experiment);

    const std::string& experiment() const { return experiment_; }

    void set(const std::string& key, const std::string& value);  // ConfigError on unknown keys
    // "key = value" lines (# comments) or a JSON object
    void merge_text(const std::string& text);
    void merge_file(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::string& get(const std::string& key) const;
    double number(const std::string& key) const;
    long integer(const std::string& key) const;
    std::vector<double> list(const std::string& key) const;  // comma separated, may be empty

    const std::map<std::string, std::string>& values() const { return values_; }
    std::string to_text() const;

    // Checks n >= 100, the group spec and positive thresholds.
    void validate() const;

private:
    std::string experiment_;
    std::map<std::string, std::string> values_;
};

std::vector<std::string> experiment_names();

struct ResultRecord {
    std::string experiment, label, group;
    std::map<std::string, std::string> params;
    MCEstimate lhs, rhs;
    double stderr_ = 0.0;  // of the compared difference
    double z = 0.0;
    double threshold = 0.0;  // sigma threshold for stochastic checks
    double tolerance = 0.0;  // absolute tolerance for deterministic checks
    bool pass = false;
    long n = 0;
    std::uint64_t seed = 0;
};

std::string record_json(const ResultRecord& r);  // one line
std::string csv_header();
std::string csv_row(const ResultRecord& r);

struct ExperimentRun {
    std::vector<ResultRecord> records;
    double wall_time = 0.0;
    bool pass() const;
};

ExperimentRun run_experiment(const ExperimentConfig& cfg);

struct SweepResult {
    std::string param, metric;
    std::vector<double> values, metrics;
    SlopeFit fit;
    double band_lo = 0.0, band_hi = 0.0;  // slope +- 2 stderr
    bool pass = false;
    std::vector<ResultRecord> records;
};

// Runs cfg's experiment once per value of `param` and fits log(metric) against log(value).
// metric: gap (|lhs - rhs| of the last record), stderr, stderr2 or lhs. Pass requires every
// slope bound that is given (NaN = unset) to hold.
SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& param, const std::vector<double>& values,
                      const std::string& metric, double min_slope, double max_slope);

}  // namespace ym2
