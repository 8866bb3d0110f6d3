/*
 * Copyright (C) 2026 The androsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "androsim/cli.hpp"
#include "test_support.hpp"

using namespace androsim;
using androsim::test::fixture_path;
using androsim::test::slurp;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "androsim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Set ANDROSIM_UPDATE_GOLDEN=1 to rewrite the expected outputs.
void expect_golden(const std::string& name, const std::string& actual) {
    const std::string path = std::string(ANDROSIM_GOLDEN_DIR) + "/" + name;
    if (std::getenv("ANDROSIM_UPDATE_GOLDEN") != nullptr) {
        std::ofstream(path, std::ios::binary) << actual;
        return;
    }
    std::ifstream probe(path);
    ASSERT_TRUE(probe.good()) << "missing golden file " << path;
    EXPECT_EQ(actual, slurp(path)) << name;
}

}  // namespace

TEST(Simulate, LaunchText) {
    const CliResult r = run({"simulate", "launch"});
    EXPECT_EQ(r.code, 0);
    expect_golden("simulate_launch.txt", r.out);
}

TEST(Simulate, LaunchJson) {
    const CliResult r = run({"simulate", "launch", "--json"});
    EXPECT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["report"]["final_process_count"], 4);
    EXPECT_EQ(j["config"]["zygote_socket_perm"]["mode"], "666");
    expect_golden("simulate_launch.json", r.out);
}

TEST(Simulate, MaliciousPatched) {
    const CliResult r = run({"simulate", "malicious", "--patched"});
    EXPECT_EQ(r.code, 0);
    expect_golden("simulate_malicious_patched.txt", r.out);
}

TEST(Simulate, BootLoopExitCode) {
    EXPECT_EQ(run({"simulate", "bootloop"}).code, cli::kBootLoop);
    EXPECT_EQ(run({"simulate", "bootloop", "--patched"}).code, cli::kOk);
}

TEST(Simulate, FloodConfig) {
    const CliResult r = run({"simulate", "flood", "--config", fixture_path("flood_small.json"), "--json"});
    EXPECT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["report"]["reboot_at_attempt"], 91);
    EXPECT_EQ(j["report"]["reboot_count"], 1);
}

TEST(Simulate, Gps) {
    const CliResult r = run({"simulate", "gps", "--json"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out)["report"]["flow"]["events"].size(), 5u);
}

TEST(Simulate, UsageErrors) {
    EXPECT_EQ(run({"simulate", "teleport"}).code, cli::kUsage);
    EXPECT_EQ(run({"simulate"}).code, cli::kUsage);
    EXPECT_EQ(run({}).code, cli::kUsage);
    EXPECT_EQ(run({"bogus"}).code, cli::kUsage);
    EXPECT_EQ(run({"simulate", "flood", "--config", "no/such.json"}).code, cli::kUsage);
    const CliResult help = run({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("simulate"), std::string::npos);
}

TEST(Analyze, ExitCodes) {
    EXPECT_EQ(run({"analyze", fixture_path("events_standard.json")}).code, cli::kOk);
    EXPECT_EQ(run({"analyze", fixture_path("events_malicious.json")}).code, cli::kAnomaly);
    EXPECT_EQ(run({"analyze", fixture_path("events_empty.json")}).code, cli::kOk);
    EXPECT_EQ(run({"analyze", fixture_path("missing.json")}).code, cli::kUsage);
}

TEST(Analyze, MaliciousJson) {
    const CliResult r = run({"analyze", fixture_path("events_malicious.json"), "--json"});
    EXPECT_EQ(r.code, cli::kAnomaly);
    expect_golden("analyze_malicious.json", r.out);
}

TEST(Analyze, CustomTemplates) {
    const CliResult r = run({"analyze", fixture_path("events_standard.json"), "--templates",
                       fixture_path("templates.json"), "--json"});
    EXPECT_TRUE(r.code == cli::kOk || r.code == cli::kAnomaly);
    EXPECT_NO_THROW(nlohmann::json::parse(r.out));
}

TEST(Replay, Text) {
    const CliResult r = run({"replay", fixture_path("syscalls21.log"), "--uid", "10050"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("18/21"), std::string::npos);
    expect_golden("replay_syscalls21.txt", r.out);
}

TEST(Replay, Errors) {
    EXPECT_EQ(run({"replay", fixture_path("syscalls21.log"), "--uid", "0"}).code, cli::kUsage);
    EXPECT_EQ(run({"replay", fixture_path("syscalls21.log")}).code, cli::kUsage);
    EXPECT_EQ(run({"replay", "missing.log", "--uid", "10050"}).code, cli::kUsage);
}

TEST(Profile, Json) {
    const CliResult r = run({"profile", fixture_path("table1_trace.log"), "--json"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out).size(), 11u);
    expect_golden("profile_table1.json", r.out);
}

TEST(Templates, List) {
    const CliResult r = run({"templates", "list"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("app-launch"), std::string::npos);
    EXPECT_NE(r.out.find("gps-query"), std::string::npos);
    const CliResult j = run({"templates", "list", "--json"});
    EXPECT_EQ(nlohmann::json::parse(j.out)["templates"].size(), 2u);
}

TEST(Property, JsonOutputStable) {
    const std::vector<std::vector<std::string>> cases = {
        {"simulate", "launch", "--json"},
        {"simulate", "bootloop", "--json"},
        {"simulate", "malicious", "--json"},
        {"analyze", fixture_path("events_standard.json"), "--json"},
        {"replay", fixture_path("syscalls21.log"), "--uid", "10050", "--json"},
    };
    for (const auto& c : cases) EXPECT_EQ(run(c).out, run(c).out);
}
