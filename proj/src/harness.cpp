#include "vattn/harness.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <type_traits>
#include <sstream>

#include "vattn/attention.hpp"
#include "vattn/tensor_io.hpp"

namespace vattn {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& message) {
    throw Error(ErrorCode::Config, "config: " + message);
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) config_error(where + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
    }
}

bool is_nonnegative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) config_error("missing '" + std::string(key) + "' in " + where);
    const json& v = j.at(key);
    const std::string what = "'" + std::string(key) + "' in " + where;
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) config_error(what + " must be true or false");
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
        if (!is_nonnegative_integer(v)) config_error(what + " must be a nonnegative integer");
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) config_error(what + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) config_error(what + " must be a number");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        config_error("'" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

template <typename T>
T get_or(const json& j, const char* key, const std::string& where, T fallback) {
    return j.contains(key) ? get<T>(j, key, where) : fallback;
}

std::size_t get_count(const json& j, const char* key, const std::string& where) {
    return get<std::size_t>(j, key, where);
}

SyntheticSpec synthetic_from_json(const json& j, std::uint64_t default_seed) {
    const std::string where = "instance.synthetic";
    allow_keys(j, where, {"L", "d", "qk_mode", "qk_scale", "n_clusters", "center_scale",
                          "intra_scale", "v_mode", "v_scale", "pareto_shape", "causal", "seed"});
    SyntheticSpec s;
    if (!j.contains("L") || !j.contains("d")) config_error("instance.synthetic needs L and d");
    s.length = get_count(j, "L", where);
    s.dim = get_count(j, "d", where);
    s.qk_mode = qk_mode_from_string(get_or<std::string>(j, "qk_mode", where, "gaussian"));
    s.qk_scale = get_or(j, "qk_scale", where, s.qk_scale);
    if (j.contains("n_clusters")) s.n_clusters = get_count(j, "n_clusters", where);
    s.center_scale = get_or(j, "center_scale", where, s.center_scale);
    s.intra_scale = get_or(j, "intra_scale", where, s.intra_scale);
    s.value_mode = value_mode_from_string(get_or<std::string>(j, "v_mode", where, "gaussian"));
    s.value_scale = get_or(j, "v_scale", where, s.value_scale);
    s.pareto_shape = get_or(j, "pareto_shape", where, s.pareto_shape);
    s.causal = get_or(j, "causal", where, false);
    s.seed = get_or<std::uint64_t>(j, "seed", where, default_seed);
    s.validate();
    return s;
}

json synthetic_to_json(const SyntheticSpec& s) {
    return json{{"L", s.length},
                {"d", s.dim},
                {"qk_mode", std::string(to_string(s.qk_mode))},
                {"qk_scale", s.qk_scale},
                {"n_clusters", s.n_clusters},
                {"center_scale", s.center_scale},
                {"intra_scale", s.intra_scale},
                {"v_mode", std::string(to_string(s.value_mode))},
                {"v_scale", s.value_scale},
                {"pareto_shape", s.pareto_shape},
                {"causal", s.causal},
                {"seed", s.seed}};
}

KernelSpec kernel_from_json(const json& j) {
    allow_keys(j, "kernel", {"family", "degree", "temperature_scaling"});
    const KernelFamily family = kernel_family_from_string(get<std::string>(j, "family", "kernel"));
    switch (family) {
        case KernelFamily::Exponential:
            if (j.contains("degree")) config_error("kernel.degree only applies to the polynomial family");
            return KernelSpec::exponential(get_or(j, "temperature_scaling", "kernel", false));
        case KernelFamily::Polynomial:
            if (get_or(j, "temperature_scaling", "kernel", false)) {
                config_error("temperature_scaling only applies to the exponential family");
            }
            return KernelSpec::polynomial(get<int>(j, "degree", "kernel"));
        case KernelFamily::Elu:
            if (j.contains("degree") || get_or(j, "temperature_scaling", "kernel", false)) {
                config_error("the elu kernel takes no parameters");
            }
            return KernelSpec::elu();
    }
    config_error("unknown kernel");
}

json kernel_to_json(const KernelSpec& k) {
    json j{{"family", std::string(to_string(k.family))}};
    if (k.degree) j["degree"] = *k.degree;
    if (k.family == KernelFamily::Exponential) j["temperature_scaling"] = k.temperature_scaling;
    return j;
}

ApproximatorEntry approximator_from_json(const json& j, std::size_t index, std::uint64_t default_seed) {
    const std::string where = "approximators[" + std::to_string(index) + "]";
    if (!j.is_object()) config_error(where + " must be an object");
    ApproximatorEntry e;
    e.spec.family = approximator_family_from_string(get<std::string>(j, "name", where));
    e.label = get_or<std::string>(j, "label", where, std::string(to_string(e.spec.family)));
    switch (e.spec.family) {
        case ApproximatorFamily::Lsh:
            allow_keys(j, where, {"name", "label", "rounds", "buckets", "deduplicate", "seed"});
            if (j.contains("rounds")) e.spec.rounds = get_count(j, "rounds", where);
            if (e.spec.rounds == 0) config_error(where + ".rounds must be at least 1");
            if (j.contains("buckets")) e.spec.buckets = get_count(j, "buckets", where);
            e.spec.deduplicate = get_or(j, "deduplicate", where, false);
            e.spec.seed = get_or<std::uint64_t>(j, "seed", where, default_seed);
            break;
        case ApproximatorFamily::Orf:
            allow_keys(j, where, {"name", "label", "mode", "seed"});
            e.spec.orf_mode = orf_mode_from_string(get_or<std::string>(j, "mode", where, "orthogonal_chi"));
            e.spec.seed = get_or<std::uint64_t>(j, "seed", where, default_seed);
            break;
        default:
            allow_keys(j, where, {"name", "label"});
            break;
    }
    return e;
}

json approximator_to_json(const ApproximatorEntry& e) {
    json j{{"name", std::string(to_string(e.spec.family))}, {"label", e.label}};
    if (e.spec.family == ApproximatorFamily::Lsh) {
        j["rounds"] = e.spec.rounds;
        if (e.spec.buckets) j["buckets"] = *e.spec.buckets;
        j["deduplicate"] = e.spec.deduplicate;
        j["seed"] = e.spec.seed;
    } else if (e.spec.family == ApproximatorFamily::Orf) {
        j["mode"] = std::string(to_string(e.spec.orf_mode));
        j["seed"] = e.spec.seed;
    }
    return j;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config file '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Config, "config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

RunConfig RunConfig::from_json(const json& j) {
    allow_keys(j, "config", {"instance", "kernel", "approximators", "r", "seed", "output_dir"});
    RunConfig c;
    try {
        c.seed = get_or<std::uint64_t>(j, "seed", "config", 0);
        c.output_dir = get_or<std::string>(j, "output_dir", "config", ".");

        if (!j.contains("instance")) config_error("missing 'instance'");
        const json& inst = j.at("instance");
        allow_keys(inst, "instance", {"file", "synthetic"});
        if (inst.contains("file") == inst.contains("synthetic")) {
            config_error("instance needs exactly one of 'file' or 'synthetic'");
        }
        if (inst.contains("file")) c.instance_file = get<std::string>(inst, "file", "instance");
        else c.synthetic = synthetic_from_json(inst.at("synthetic"), c.seed);

        if (!j.contains("kernel")) config_error("missing 'kernel'");
        c.kernel = kernel_from_json(j.at("kernel"));

        if (!j.contains("approximators") || !j.at("approximators").is_array() ||
            j.at("approximators").empty()) {
            config_error("'approximators' must be a nonempty array");
        }
        std::size_t index = 0;
        for (const json& a : j.at("approximators")) {
            c.approximators.push_back(approximator_from_json(a, index++, c.seed));
        }

        if (!j.contains("r") || !j.at("r").is_array() || j.at("r").empty()) {
            config_error("'r' must be a nonempty array of positive integers");
        }
        for (const json& r : j.at("r")) {
            if (!is_nonnegative_integer(r) || r.get<std::size_t>() == 0) {
                config_error("'r' must be a nonempty array of positive integers");
            }
            c.r_values.push_back(r.get<std::size_t>());
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        throw Error(ErrorCode::Config, std::string("config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    return from_json(load_json(path));
}

json RunConfig::to_json() const {
    json j;
    if (instance_file) j["instance"] = json{{"file", *instance_file}};
    else j["instance"] = json{{"synthetic", synthetic_to_json(*synthetic)}};
    j["kernel"] = kernel_to_json(kernel);
    j["approximators"] = json::array();
    for (const auto& a : approximators) j["approximators"].push_back(approximator_to_json(a));
    j["r"] = r_values;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    return j;
}

AttentionInstance load_instance(const RunConfig& config) {
    if (config.instance_file) return read_instance(*config.instance_file);
    if (config.synthetic) return generate_synthetic(*config.synthetic);
    throw Error(ErrorCode::Config, "config: no instance source");
}

RunResult run(const RunConfig& config) {
    const AttentionInstance inst = load_instance(config);
    config.kernel.validate();

    auto cell_error = [](const ApproximatorEntry& a, std::size_t r, const Error& e) {
        return Error(e.code(), "approximator '" + a.label + "' at r=" + std::to_string(r) + ": " + e.what());
    };
    for (const auto& a : config.approximators) {
        for (std::size_t r : config.r_values) {
            try {
                a.spec.validate(config.kernel, inst, r);
            } catch (const Error& e) {
                throw cell_error(a, r, e);
            }
        }
    }

    const AttentionOutput exact = exact_attention(config.kernel, inst);
    const SkewStats skew = mean_skew(config.kernel, inst);

    RunResult result;
    std::ostringstream csv;
    csv << kCsvHeader << '\n';
    json rows = json::array();
    for (const auto& a : config.approximators) {
        for (std::size_t r : config.r_values) {
            ApproximationReport report;
            try {
                report = evaluate(a.spec, config.kernel, inst, r, exact, skew);
            } catch (const Error& e) {
                throw cell_error(a, r, e);
            }
            csv << csv_field(a.label) << ',' << csv_field(config.kernel.describe()) << ',' << r << ','
                << format_double(report.errors.mean_sq_error) << ','
                << format_double(report.errors.mean_relative_error) << ','
                << format_double(report.skew_entropy_mean) << ','
                << format_double(report.skew_max_mean) << ',' << report.flags.size() << '\n';

            json flags = json::array();
            for (const QueryFlag& f : report.flags) {
                flags.push_back({{"query", f.query}, {"event", std::string(to_string(f.event))}});
            }
            rows.push_back({{"approximator", approximator_to_json(a)},
                            {"kernel", config.kernel.describe()},
                            {"r", r},
                            {"mean_sq_error", report.errors.mean_sq_error},
                            {"mean_relative_error", report.errors.mean_relative_error},
                            {"skew_entropy_mean", report.skew_entropy_mean},
                            {"skew_max_mean", report.skew_max_mean},
                            {"per_query_sq_error", report.errors.per_query_sq_error},
                            {"per_query_relative_error", report.errors.per_query_relative_error},
                            {"flags", flags}});
            result.labels.push_back(a.label);
            result.reports.push_back(std::move(report));
        }
    }
    result.csv = csv.str();
    result.json = json{{"config", config.to_json()},
                       {"instance", {{"L", inst.length()}, {"d", inst.dim()}, {"causal", inst.causal()}}},
                       {"results", rows}};
    return result;
}

RunResult run_and_write(const RunConfig& config) {
    RunResult result = run(config);
    const std::filesystem::path dir(config.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + dir.string() + "': " + ec.message());
    auto write = [](const std::filesystem::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
        out << text;
        if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
    };
    write(dir / "report.csv", result.csv);
    write(dir / "report.json", result.json.dump(2) + "\n");
    return result;
}

}  // namespace vattn
