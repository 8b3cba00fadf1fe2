#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dtx/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string &args) {
    const std::string cmd = std::string(DTX_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE *p = popen(cmd.c_str(), "r");
    Result r;
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string &name) {
    const auto dir = fs::temp_directory_path() / ("dtx_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// CSV outputs start with a "# {meta}" line
json csv_meta(const std::string &csv) {
    EXPECT_EQ(csv.rfind("# ", 0), 0u);
    return json::parse(csv.substr(2, csv.find('\n') - 2));
}

}  // namespace

TEST(Cli, Version) {
    const auto r = run("--version");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find(dtx::kVersion), std::string::npos);
}

TEST(Cli, MissingOrUnknownCommand) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("no-such-command").code, 2);
    EXPECT_EQ(run("gen-mdp --no-such-flag 1").code, 2);
}

TEST(Cli, GenMdpDefaultsAndDeterminism) {
    const auto a = run("gen-mdp --no-timestamp --seed 7");
    const auto b = run("gen-mdp --no-timestamp --seed 7");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out, run("gen-mdp --no-timestamp --seed 8").out);

    const auto j = json::parse(a.out);
    EXPECT_EQ(j["meta"]["version"], dtx::kVersion);
    EXPECT_EQ(j["meta"]["config"]["num_states"], 10);
    EXPECT_EQ(j["meta"]["config"]["num_actions"], 2);
    EXPECT_DOUBLE_EQ(j["meta"]["config"]["alpha"].get<double>(), 0.01);
    EXPECT_FALSE(j["meta"].contains("timestamp"));
    EXPECT_TRUE(json::parse(run("gen-mdp").out)["meta"].contains("timestamp"));
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("gen-mdp --alpha 0").code, 2);
    EXPECT_EQ(run("gen-mdp --num-states 0").code, 2);
    EXPECT_EQ(run("fig-tradeoff --gamma 0.9 --gamma-prime 0.5").code, 2);
    EXPECT_EQ(run("bounds --gap-denominator sideways").code, 2);
    EXPECT_EQ(run("train --variants '[\"bogus\"]'").code, 2);
    EXPECT_EQ(run("gen-mdp --out /nonexistent-dir/x/m.json").code, 4);
    EXPECT_EQ(run("gen-mdp --config /nonexistent-dir/c.json").code, 2);  // rejected by the parser
}

TEST(Cli, ConfigFileAndOverrides) {
    const auto cfg = scratch("gen.json");
    std::ofstream(cfg) << R"({"seed": 3, "num_states": 4})";
    const auto from_file = json::parse(run("gen-mdp --no-timestamp --config " + cfg.string()).out);
    EXPECT_EQ(from_file["meta"]["config"]["seed"], 3);
    EXPECT_EQ(from_file["meta"]["config"]["num_states"], 4);
    const auto overridden = json::parse(run("gen-mdp --no-timestamp --seed 5 --config " + cfg.string()).out);
    EXPECT_EQ(overridden["meta"]["config"]["seed"], 5);

    const auto bad = scratch("bad.json");
    std::ofstream(bad) << R"({"seed": 3, "colour": "red"})";
    EXPECT_EQ(run("gen-mdp --config " + bad.string()).code, 2);
    const auto not_object = scratch("list.json");
    std::ofstream(not_object) << "[1, 2]";
    EXPECT_EQ(run("gen-mdp --config " + not_object.string()).code, 2);
}

TEST(Cli, WritesOutFile) {
    const auto out = scratch("m.json");
    ASSERT_EQ(run("gen-mdp --no-timestamp --out " + out.string()).code, 0);
    EXPECT_EQ(slurp(out), run("gen-mdp --no-timestamp").out);
}

TEST(Cli, FigTradeoff) {
    const auto r = run("fig-tradeoff --no-timestamp --repetitions 3 --k-max 4");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, run("fig-tradeoff --no-timestamp --repetitions 3 --k-max 4").out);
    EXPECT_EQ(csv_meta(r.out)["config"]["trajectories"], 10);
    std::istringstream in(r.out);
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);  // meta
    std::getline(in, line);  // header
    EXPECT_EQ(line.rfind("K,exact_abs_error", 0), 0u);
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 5u);
}

TEST(Cli, FigOptimalKSingleRepetition) {
    const auto r = run("fig-optimal-k --no-timestamp --repetitions 1 --k-max 6 --sigmas '[0, 1]'");
    ASSERT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
        const double k = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        EXPECT_EQ(k, std::floor(k));  // one repetition: mean is the integer K*
        EXPECT_GE(k, 0.0);
        EXPECT_LE(k, 6.0);
    }
    EXPECT_EQ(rows, 2u);
}

TEST(Cli, GradDemoResiduals) {
    auto j = json::parse(run("grad-demo --no-timestamp").out);
    EXPECT_LT(j["residuals"]["decomposition_max_abs"].get<double>(), 1e-9);
    EXPECT_LT(j["residuals"]["fd_full_max_abs"].get<double>(), 1e-6);
    EXPECT_LT(j["residuals"]["fd_first_max_abs"].get<double>(), 1e-6);
    EXPECT_LT(j["residuals"]["fd_second_max_abs"].get<double>(), 1e-6);
    j = json::parse(run("grad-demo --no-timestamp --gamma-prime 0.2").out);
    EXPECT_EQ(j["norms"]["second"].get<double>(), 0.0);
}

TEST(Cli, Bounds) {
    const auto r = run("bounds --no-timestamp --trials 10 --n 200");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, run("bounds --no-timestamp --trials 10 --n 200").out);
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["bound"].size(), 10u);
    EXPECT_EQ(j["empirical_errors"].size(), 10u);
    EXPECT_EQ(j["meta"]["config"]["gap_denominator"], "gamma_prime");
}

TEST(Cli, TrainRowsPerVariantSeedIteration) {
    const std::string args = "train --no-timestamp --seeds 2 --iterations 3 --horizon 30";
    const auto r = run(args);
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, run(args).out);
    std::size_t rows = 0;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    while (std::getline(in, line)) ++rows;
    // (vanilla + update-weighting at K = 5, 10) x 2 seeds x (3 updates + final)
    EXPECT_EQ(rows, 3u * 2u * 4u);
    EXPECT_NEAR(csv_meta(r.out)["config"]["gamma_prime"].get<double>(), 1.0 - 1.0 / 30.0, 1e-15);
}
