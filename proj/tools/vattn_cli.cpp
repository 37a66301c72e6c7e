// Command-line front end: gen / run / sweep / inspect.
//
// Exit codes: 0 success, 1 computation failure, 2 usage or configuration
// problems (unknown flags, unreadable or invalid config).

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "vattn/harness.hpp"
#include "vattn/parallel.hpp"
#include "vattn/synthetic.hpp"
#include "vattn/tensor_io.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::size_t threads = 1;
};

void add_common(CLI::App* cmd, CommonFlags& common) {
    cmd->add_option("--seed", common.seed, "Master seed");
    cmd->add_option("--out-dir", common.out_dir, "Directory for reports");
    cmd->add_option("--threads", common.threads, "Worker threads (does not affect results)")
        ->check(CLI::PositiveNumber);
}

std::vector<std::size_t> parse_r_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || item.empty() || item[0] == '-' || v == 0) {
            throw vattn::Error(vattn::ErrorCode::Config, "--r-list entry '" + item + "' is not a positive integer");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw vattn::Error(vattn::ErrorCode::Config, "--r-list is empty");
    return out;
}

vattn::RunConfig load_config(const std::string& path, const CommonFlags& common,
                             const std::optional<std::string>& r_list) {
    nlohmann::json j = vattn::load_json(path);
    if (!j.is_object()) throw vattn::Error(vattn::ErrorCode::Config, "config must be a JSON object");
    if (common.seed) j["seed"] = *common.seed;
    if (common.out_dir) j["output_dir"] = *common.out_dir;
    if (r_list) j["r"] = parse_r_list(*r_list);
    return vattn::RunConfig::from_json(j);
}

void print_tensor_summary(const vattn::NamedTensor& t) {
    std::string shape;
    for (std::size_t i = 0; i < t.dims.size(); ++i) shape += (i ? "x" : "") + std::to_string(t.dims[i]);
    if (t.dims.empty()) shape = "scalar";
    std::printf("%-8s %-12s", t.name.c_str(), shape.c_str());
    if (t.data.empty()) {
        std::printf(" (empty)\n");
        return;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    for (float v : t.data) {
        lo = std::min<double>(lo, v);
        hi = std::max<double>(hi, v);
        sum += v;
    }
    std::printf(" min=%.6g max=%.6g mean=%.6g\n", lo, hi, sum / static_cast<double>(t.data.size()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse attention approximation benchmarks", "vattn"};
    app.require_subcommand(1);

    CommonFlags common;

    vattn::SyntheticSpec gen_spec;
    std::string gen_out;
    std::string qk_mode = "gaussian";
    std::string v_mode = "gaussian";
    auto* gen = app.add_subcommand("gen", "Generate a synthetic instance file");
    add_common(gen, common);
    gen->add_option("--L", gen_spec.length, "Sequence length")->required()->check(CLI::PositiveNumber);
    gen->add_option("--d", gen_spec.dim, "Head dimension")->required()->check(CLI::PositiveNumber);
    gen->add_option("--mode", qk_mode, "Q/K distribution: gaussian or clustered")
        ->check(CLI::IsMember({"gaussian", "clustered"}));
    gen->add_option("--qk-scale", gen_spec.qk_scale, "Gaussian Q/K entry scale");
    gen->add_option("--n-clusters", gen_spec.n_clusters, "Cluster count (clustered mode)");
    gen->add_option("--center-scale", gen_spec.center_scale, "Cluster center scale");
    gen->add_option("--intra-scale", gen_spec.intra_scale, "Spread around a center");
    gen->add_option("--v-mode", v_mode, "Value distribution: gaussian or heavy_tailed")
        ->check(CLI::IsMember({"gaussian", "heavy_tailed"}));
    gen->add_option("--v-scale", gen_spec.value_scale, "Value entry scale");
    gen->add_option("--pareto-shape", gen_spec.pareto_shape, "Pareto shape (heavy_tailed)");
    gen->add_flag("--causal", gen_spec.causal, "Mark the instance causal");
    gen->add_option("--out", gen_out, "Output tensor file")->required();

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run a JSON config and write reports");
    add_common(run, common);
    run->add_option("--config", config_path, "Config JSON")->required();

    std::optional<std::string> r_list;
    auto* sweep = app.add_subcommand("sweep", "Run a config over an explicit r list");
    add_common(sweep, common);
    sweep->add_option("--config", config_path, "Config JSON")->required();
    sweep->add_option("--r-list", r_list, "Comma-separated budgets, e.g. 1,2,4,8")->required();

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "Summarize a tensor file");
    add_common(inspect, common);
    inspect->add_option("file", inspect_path, "Tensor file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    vattn::set_thread_count(common.threads);

    try {
        if (*gen) {
            gen_spec.qk_mode = vattn::qk_mode_from_string(qk_mode);
            gen_spec.value_mode = vattn::value_mode_from_string(v_mode);
            gen_spec.seed = common.seed.value_or(0);
            std::filesystem::path out(gen_out);
            if (common.out_dir && out.is_relative()) {
                std::filesystem::create_directories(*common.out_dir);
                out = std::filesystem::path(*common.out_dir) / out;
            }
            vattn::write_instance(out, vattn::generate_synthetic(gen_spec));
            return 0;
        }
        if (*inspect) {
            for (const auto& t : vattn::read_tensors(inspect_path)) print_tensor_summary(t);
            return 0;
        }

        vattn::RunConfig config;
        try {
            config = load_config(config_path, common, *sweep ? r_list : std::nullopt);
        } catch (const vattn::Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kExitUsage;
        }
        const vattn::RunResult result = vattn::run_and_write(config);
        std::cout << result.csv;
        return 0;
    } catch (const vattn::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}
