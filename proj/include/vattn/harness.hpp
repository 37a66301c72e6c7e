#pragma once

// Run configuration (JSON), report emission (CSV + JSON) and the end-to-end
// run used by the command-line tool.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vattn/core.hpp"
#include "vattn/metrics.hpp"
#include "vattn/synthetic.hpp"

namespace vattn {

struct ApproximatorEntry {
    std::string label;  // CSV "approximator" column; defaults to the family name
    ApproximatorSpec spec;
};

struct RunConfig {
    std::optional<std::string> instance_file;
    std::optional<SyntheticSpec> synthetic;  // exactly one of file / synthetic
    KernelSpec kernel;
    std::vector<ApproximatorEntry> approximators;
    std::vector<std::size_t> r_values;
    std::uint64_t seed = 0;
    std::string output_dir = ".";

    /// Missing per-approximator and synthetic seeds default to `seed`.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
    /// Fully resolved configuration; from_json(to_json()) round-trips.
    nlohmann::json to_json() const;
};

nlohmann::json load_json(const std::filesystem::path& path);

struct RunResult {
    std::vector<ApproximationReport> reports;
    std::vector<std::string> labels;
    std::string csv;
    nlohmann::json json;
};

inline constexpr const char* kCsvHeader =
    "approximator,kernel,r,mean_sq_error,mean_relative_error,skew_entropy_mean,skew_max_mean,n_flags";

AttentionInstance load_instance(const RunConfig& config);

/// Validates every (approximator, r) cell, then computes them.  Module
/// errors are rethrown with the failing cell named.
RunResult run(const RunConfig& config);

/// run() plus writing report.csv and report.json into config.output_dir.
RunResult run_and_write(const RunConfig& config);

}  // namespace vattn
