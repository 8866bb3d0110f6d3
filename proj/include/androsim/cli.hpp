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

// Command-line front end. Exit codes: 0 nominal, 2 usage or parse error,
// 3 boot-loop, 4 anomalous flow.

#pragma once

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "androsim/flow_analyzer.hpp"
#include "androsim/scenarios.hpp"
#include "androsim/trace_replay.hpp"

namespace androsim::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kBootLoop = 3, kAnomaly = 4 };

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {"launch", "malicious", "flood", "bootloop", "gps"};
    return names;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline nlohmann::json read_json_file(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

// Scenario file: SystemConfig fields plus optional "repetitions" and
// "app_available".
struct ScenarioOptions {
    SystemConfig config;
    std::optional<std::int64_t> repetitions;
    bool app_available = true;
};

inline ScenarioOptions scenario_options_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    ScenarioOptions o;
    o.config = system_config_from_json(j);
    if (j.contains("repetitions")) {
        o.repetitions = j.at("repetitions").get<std::int64_t>();
        if (*o.repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
    }
    o.app_available = j.value("app_available", true);
    return o;
}

inline void write_json(std::ostream& out, const nlohmann::json& j) { out << j.dump(2) << "\n"; }

inline int cmd_simulate(const std::string& name, bool patched, const std::optional<std::string>& config,
                        bool json, std::ostream& out) {
    ScenarioOptions opts = config ? scenario_options_from_json(read_json_file(*config)) : ScenarioOptions{};
    if (patched) opts.config = apply_patch(opts.config);

    Device device(opts.config);
    ScenarioReport report;
    if (name == "launch") {
        const AppRecord& app = device.packages().install_app(demo_app_manifest(), true);
        report = device.launch_app(app, opts.app_available);
    } else if (name == "malicious") {
        const AppRecord& mal = device.packages().install_app(malicious_app_manifest(), true);
        report = device.malicious_fork(mal, static_cast<int>(opts.repetitions.value_or(1)));
    } else if (name == "flood") {
        const AppRecord& mal = device.packages().install_app(malicious_app_manifest(), true);
        report = device.fork_flood(mal, opts.repetitions.value_or(forks_to_exhaust(opts.config)));
    } else if (name == "bootloop") {
        const AppRecord& mal = device.packages().install_app(malicious_app_manifest(), true);
        report = device.boot_attack(mal);
    } else {
        const AppRecord& app = device.packages().install_app(gps_app_manifest(), true);
        report = device.gps_query(app);
    }

    if (json) {
        write_json(out, {{"scenario", name}, {"config", opts.config}, {"report", report}});
    } else {
        out << render_text(name, report);
    }
    return report.boot_looped ? kBootLoop : kOk;
}

inline std::vector<CallEvent> events_from_json(const nlohmann::json& j) {
    const nlohmann::json& list = j.is_object() ? j.at("events") : j;
    if (!list.is_array()) throw Error(ErrorCode::ParseError, "expected an array of events");
    std::vector<CallEvent> events;
    events.reserve(list.size());
    for (const auto& item : list) events.push_back(item.get<CallEvent>());
    return events;
}

inline std::string render_classification(const Classification& c) {
    if (c.matched()) return "Matched " + c.template_name;
    std::string text = "Anomalous";
    for (std::size_t i = 0; i < c.findings.size(); ++i) {
        const Finding& f = c.findings[i];
        text += (i == 0 ? ": " : ", ");
        text += std::string(to_string(f.kind));
        if (f.step_index) text += "@" + std::to_string(*f.step_index);
    }
    return text;
}

inline int cmd_analyze(const std::string& events_path, const std::optional<std::string>& templates,
                       bool json, std::ostream& out) {
    const std::vector<CallEvent> events = events_from_json(read_json_file(events_path));
    const TemplateCatalog catalog =
        templates ? catalog_from_json(read_json_file(*templates)) : builtin_catalog();
    const std::vector<Flow> flows = extract_flows(events);

    bool anomalous = false;
    nlohmann::json results = nlohmann::json::array();
    std::ostringstream text;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const Classification c = match_flow(flows[i], catalog);
        anomalous = anomalous || !c.matched();
        results.push_back({{"root", flows[i].events.front().event_id},
                           {"signature", flow_signature(flows[i])},
                           {"classification", c}});
        text << "flow " << i + 1 << ": " << flow_signature(flows[i]) << "\n"
             << "  " << render_classification(c) << "\n";
    }
    if (json) {
        write_json(out, {{"flows", results}});
    } else {
        out << text.str() << flows.size() << " flow(s), " << (anomalous ? "anomalous" : "all matched")
            << "\n";
    }
    return anomalous ? kAnomaly : kOk;
}

inline std::vector<TraceRecord> load_trace(const std::string& path) {
    return parse_trace(read_file(path));
}

inline int cmd_replay(const std::string& trace, Uid uid, std::optional<Gid> gid, bool json,
                      std::ostream& out) {
    const std::vector<TraceRecord> records = load_trace(trace);
    Credential caller = app_credential(uid);
    if (gid) caller.gid = *gid;
    KernelState state = standard_kernel();
    const ReplayReport report = replay_as(state, caller, records);
    if (json) {
        write_json(out, report);
        return kOk;
    }
    out << "replayed " << report.total << " syscall(s) as uid " << caller.uid << "\n"
        << "succeeded: " << report.succeeded << "/" << report.total << " (" << std::fixed
        << std::setprecision(1) << report.success_ratio() * 100.0 << "%)\n";
    for (const auto& f : report.failed) {
        out << "failed: " << f.syscall << " " << f.code << " (" << f.reason << ")\n";
    }
    return kOk;
}

inline int cmd_profile(const std::string& trace, bool json, std::ostream& out) {
    const ServiceProfile profile = service_syscall_profile(load_trace(trace));
    if (json) {
        write_json(out, profile_to_json(profile));
        return kOk;
    }
    for (const auto& [service, calls] : profile) {
        out << service << ":";
        const char* sep = " ";
        for (const auto& c : calls) {
            out << sep << c;
            sep = ", ";
        }
        out << "\n";
    }
    return kOk;
}

inline int cmd_templates_list(bool json, std::ostream& out) {
    const TemplateCatalog catalog = builtin_catalog();
    if (json) {
        write_json(out, {{"templates", catalog.templates()}});
        return kOk;
    }
    for (const auto& t : catalog.templates()) {
        out << t.name << "\n";
        for (const auto& s : t.steps) {
            out << "  " << s.source.text() << " --" << to_string(s.kind);
            if (s.call_id) out << "(" << *s.call_id << ")";
            out << "--> " << s.target.text() << (s.optional ? "  [optional]" : "") << "\n";
        }
    }
    return kOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulator and analysis toolkit for the Android cross-layer architecture",
                 "androsim"};
    app.require_subcommand(1);

    std::string scenario;
    bool patched = false;
    std::optional<std::string> config_path;
    bool sim_json = false;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario on a simulated device");
    simulate->add_option("scenario", scenario, "launch | malicious | flood | bootloop | gps")
        ->required()
        ->check(CLI::IsMember(scenario_names()));
    simulate->add_flag("--patched", patched, "Apply the Zygote socket patch");
    simulate->add_option("--config", config_path, "Scenario config (JSON)");
    simulate->add_flag("--json", sim_json, "Emit a JSON report");

    std::string events_path;
    std::optional<std::string> templates_path;
    bool an_json = false;
    auto* analyze = app.add_subcommand("analyze", "Classify the flows in an event log");
    analyze->add_option("events", events_path, "Event log (JSON)")->required();
    analyze->add_option("--templates", templates_path, "Template catalog (JSON) replacing the built-ins");
    analyze->add_flag("--json", an_json, "Emit JSON");

    std::string replay_trace;
    Uid uid = 0;
    std::optional<Gid> gid;
    bool re_json = false;
    auto* replay = app.add_subcommand("replay", "Replay a syscall trace as an unprivileged app");
    replay->add_option("trace", replay_trace, "Trace file")->required();
    replay->add_option("--uid", uid, "Caller uid")->required();
    replay->add_option("--gid", gid, "Caller gid (defaults to the uid)");
    replay->add_flag("--json", re_json, "Emit JSON");

    std::string profile_trace;
    bool pr_json = false;
    auto* profile = app.add_subcommand("profile", "Per-service syscall profile of a trace");
    profile->add_option("trace", profile_trace, "Trace file")->required();
    profile->add_flag("--json", pr_json, "Emit JSON");

    bool tl_json = false;
    auto* templates = app.add_subcommand("templates", "Inspect the flow template catalog");
    templates->require_subcommand(1);
    auto* list = templates->add_subcommand("list", "List the built-in templates");
    list->add_flag("--json", tl_json, "Emit JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "androsim: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(scenario, patched, config_path, sim_json, out);
        if (analyze->parsed()) return cmd_analyze(events_path, templates_path, an_json, out);
        if (replay->parsed()) return cmd_replay(replay_trace, uid, gid, re_json, out);
        if (profile->parsed()) return cmd_profile(profile_trace, pr_json, out);
        if (list->parsed()) return cmd_templates_list(tl_json, out);
    } catch (const std::exception& e) {
        err << "androsim: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

}  // namespace androsim::cli
