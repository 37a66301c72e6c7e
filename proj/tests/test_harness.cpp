#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "vattn/harness.hpp"
#include "vattn/parallel.hpp"
#include "vattn/tensor_io.hpp"

using namespace vattn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base_config() {
    return json::parse(R"({
        "instance": {"synthetic": {"L": 32, "d": 4, "qk_mode": "gaussian", "v_mode": "heavy_tailed"}},
        "kernel": {"family": "exponential", "temperature_scaling": true},
        "approximators": [
            {"name": "optimal_v_oblivious"},
            {"name": "optimal_v_aware"},
            {"name": "sliding_window"},
            {"name": "lsh", "rounds": 2},
            {"name": "orf", "mode": "iid_gaussian", "label": "orf, iid"}
        ],
        "r": [8, 16],
        "seed": 11
    })");
}

ErrorCode config_error(const json& j) {
    try {
        RunConfig::from_json(j);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "config accepted: " << j.dump();
    return ErrorCode::Io;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(RunConfig, ParsesAndFillsDefaults) {
    const RunConfig c = RunConfig::from_json(base_config());
    ASSERT_TRUE(c.synthetic.has_value());
    EXPECT_FALSE(c.instance_file.has_value());
    EXPECT_EQ(c.synthetic->length, 32u);
    EXPECT_EQ(c.synthetic->seed, 11u);
    EXPECT_EQ(c.synthetic->value_mode, ValueMode::HeavyTailed);
    EXPECT_TRUE(c.kernel.temperature_scaling);
    ASSERT_EQ(c.approximators.size(), 5u);
    EXPECT_EQ(c.approximators[0].label, "optimal_v_oblivious");
    EXPECT_EQ(c.approximators[3].spec.rounds, 2u);
    EXPECT_EQ(c.approximators[3].spec.seed, 11u);
    EXPECT_EQ(c.approximators[4].spec.orf_mode, OrfMode::IidGaussian);
    EXPECT_EQ(c.approximators[4].label, "orf, iid");
    EXPECT_EQ(c.r_values, (std::vector<std::size_t>{8, 16}));
    EXPECT_EQ(c.output_dir, ".");
    EXPECT_EQ(RunConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(RunConfig, RejectsBadInput) {
    auto with = [](auto edit) {
        json j = base_config();
        edit(j);
        return j;
    };
    EXPECT_EQ(config_error(with([](json& j) { j["bogus"] = 1; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j.erase("kernel"); })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["r"] = json::array(); })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["r"] = {4, 0}; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["r"] = {-2}; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["instance"]["file"] = "x.vat"; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["kernel"] = {{"family", "polynomial"}}; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["kernel"] = {{"family", "softmax"}}; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["approximators"][0]["rounds"] = 3; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["approximators"][4]["mode"] = "haar"; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["instance"]["synthetic"]["L"] = 0; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["seed"] = "seven"; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["seed"] = -1; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["instance"]["synthetic"]["L"] = 32.5; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["instance"]["synthetic"]["causal"] = 1; })), ErrorCode::Config);
    EXPECT_EQ(config_error(with([](json& j) { j["approximators"][3]["rounds"] = 0; })), ErrorCode::Config);
    try {
        RunConfig::load("definitely/missing.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Io);
        EXPECT_NE(std::string(e.what()).find("missing.json"), std::string::npos);
    }
}

TEST(Run, ValidatesEveryCellBeforeComputing) {
    json j = base_config();
    j["r"] = {8, 7};
    try {
        run(RunConfig::from_json(j));
        FAIL();
    } catch (const Error& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("'sliding_window' at r=7"), std::string::npos) << what;
    }
}

TEST(Run, CsvShapeAndQuoting) {
    const RunResult result = run(RunConfig::from_json(base_config()));
    EXPECT_EQ(count_lines(result.csv), 1u + 5 * 2);
    EXPECT_EQ(result.csv.substr(0, result.csv.find('\n')), kCsvHeader);
    EXPECT_NE(result.csv.find("\"orf, iid\",exponential"), std::string::npos);
    ASSERT_EQ(result.json["results"].size(), 10u);
    EXPECT_EQ(result.json["results"][0]["per_query_sq_error"].size(), 32u);
    EXPECT_EQ(result.json["instance"]["L"], 32);
}

TEST(Run, VAwareAtDPlusOneIsExact) {
    json j = base_config();
    j["instance"]["synthetic"]["L"] = 64;
    j["instance"]["synthetic"]["d"] = 8;
    j["approximators"] = json::array({{{"name", "optimal_v_aware"}}});
    j["r"] = {9};
    const RunResult result = run(RunConfig::from_json(j));
    EXPECT_LE(result.reports.at(0).errors.mean_sq_error, 1e-8);
}

TEST(Run, FullSlidingWindowIsExact) {
    json j = base_config();
    j["approximators"] = json::array({{{"name", "sliding_window"}}});
    j["r"] = {64};
    const RunResult result = run(RunConfig::from_json(j));
    EXPECT_LE(result.reports.at(0).errors.mean_sq_error, 1e-10);
}

TEST(Run, ReadsInstanceFiles) {
    const fs::path dir = fs::temp_directory_path() / "vattn_harness_file";
    fs::create_directories(dir);
    write_instance(dir / "inst.vat", support::random_instance(3, 16, 4));
    json j = base_config();
    j["instance"] = {{"file", (dir / "inst.vat").string()}};
    j["r"] = {4};
    const RunResult result = run(RunConfig::from_json(j));
    EXPECT_EQ(result.reports.size(), 5u);
    fs::remove_all(dir);
}

TEST(Run, DeterministicAcrossRunsAndThreads) {
    const fs::path dir = fs::temp_directory_path() / "vattn_harness_det";
    fs::remove_all(dir);
    json j = base_config();
    j["instance"]["synthetic"]["causal"] = false;
    j["output_dir"] = (dir / "one").string();
    set_thread_count(1);
    run_and_write(RunConfig::from_json(j));
    j["output_dir"] = (dir / "two").string();
    run_and_write(RunConfig::from_json(j));
    j["output_dir"] = (dir / "four").string();
    set_thread_count(4);
    run_and_write(RunConfig::from_json(j));
    set_thread_count(1);
    const std::string csv = slurp(dir / "one" / "report.csv");
    EXPECT_FALSE(csv.empty());
    EXPECT_EQ(csv, slurp(dir / "two" / "report.csv"));
    EXPECT_EQ(csv, slurp(dir / "four" / "report.csv"));

    // The JSON differs only in the echoed output directory.
    auto strip = [](json r) {
        r["config"].erase("output_dir");
        return r.dump();
    };
    EXPECT_EQ(strip(load_json(dir / "one" / "report.json")), strip(load_json(dir / "four" / "report.json")));
    fs::remove_all(dir);
}

TEST(Run, EchoedConfigReproducesCsv) {
    const RunResult first = run(RunConfig::from_json(base_config()));
    const json echoed = json::parse(first.json.dump());
    const RunResult replay = run(RunConfig::from_json(echoed["config"]));
    EXPECT_EQ(first.csv, replay.csv);
}

TEST(Run, ModuleErrorsNameTheCell) {
    json j = base_config();
    j["instance"]["synthetic"]["causal"] = true;
    j["approximators"] = json::array({{{"name", "orf"}}});
    try {
        run(RunConfig::from_json(j));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Unsupported);
        EXPECT_NE(std::string(e.what()).find("approximator 'orf' at r=8"), std::string::npos) << e.what();
    }
}
