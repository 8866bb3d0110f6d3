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

// End-to-end flows over an assembled device: application launch, GPS
// query, the malicious Zygote fork, fork flooding and the boot-loop attack.

#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "androsim/asf_policy.hpp"
#include "androsim/core_model.hpp"
#include "androsim/kernel_sim.hpp"
#include "androsim/zygote.hpp"

namespace androsim {

struct SystemConfig {
    bool patched = false;
    std::int64_t memory_capacity = kDefaultMemoryCapacity;
    std::int64_t baseline_memory = kDefaultBaselineMemory;
    std::int64_t process_cost = kDefaultProcessCost;
    int boot_loop_threshold = 3;

    FileMode zygote_socket_perm() const {
        return patched ? patched_zygote_perm() : unpatched_zygote_perm();
    }
    bool operator==(const SystemConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const SystemConfig& c);

inline void validate(const SystemConfig& c) {
    if (c.memory_capacity <= 0) throw Error(ErrorCode::InvalidArgument, "memory_capacity must be > 0");
    if (c.baseline_memory < 3 || c.baseline_memory > c.memory_capacity) {
        throw Error(ErrorCode::InvalidArgument, "baseline_memory must be in [3, memory_capacity]");
    }
    if (c.process_cost <= 0) throw Error(ErrorCode::InvalidArgument, "process_cost must be > 0");
    if (c.boot_loop_threshold < 1) {
        throw Error(ErrorCode::InvalidArgument, "boot_loop_threshold must be >= 1");
    }
}

// Socket group root -> system, mode 666 -> 660.
inline SystemConfig apply_patch(SystemConfig config) {
    config.patched = true;
    return config;
}

// Fork attempts needed to exhaust memory from a clean boot.
inline std::int64_t forks_to_exhaust(const SystemConfig& c) {
    return (c.memory_capacity - c.baseline_memory) / c.process_cost + 1;
}

struct Denial {
    std::size_t step = 0;
    std::string reason;
    bool operator==(const Denial&) const = default;
};

struct ScenarioReport {
    Flow flow;
    std::string signature;
    std::size_t final_process_count = 0;
    int reboot_count = 0;
    bool boot_looped = false;
    std::vector<Denial> denials;
    // Fork attempts made and children created (flood scenarios).
    int attempts = 0;
    int forks = 0;
    // 1-based attempt whose fork exhausted memory.
    std::optional<int> reboot_at_attempt;
};

namespace roles {
inline const ComponentRef kApp{"App", Layer::A};
inline const ComponentRef kMalApp{"MalApp", Layer::A};
}  // namespace roles

inline Manifest demo_app_manifest() { return {"com.example.notes", {}, {}}; }
// Asks for nothing, so it looks harmless at install time.
inline Manifest malicious_app_manifest() { return {"com.example.flashlight", {}, {}}; }
inline Manifest gps_app_manifest() {
    return {"com.example.maps", {}, {permissions::kAccessFineLocation}};
}

// One simulated handset. Owns its kernel state and event id issuance; not
// copyable because boot hooks refer back to it.
class Device {
  public:
    explicit Device(const SystemConfig& config)
        : config_((validate(config), config)),
          kernel_(standard_kernel(config.memory_capacity, config.baseline_memory,
                                  config.zygote_socket_perm())),
          classes_(ClassRegistry::with_defaults()),
          zygote_{pids::kZygote, zygote_credential()} {
        kernel_.boot_loop_threshold = config.boot_loop_threshold;
    }
    Device(const Device&) = delete;
    Device& operator=(const Device&) = delete;

    KernelState& kernel() { return kernel_; }
    const KernelState& kernel() const { return kernel_; }
    PackageManager& packages() { return packages_; }
    // URI grants do not survive a reboot.
    UriGrantTable& uri_grants() {
        if (uri_grants_epoch_ != kernel_.reboot_count()) {
            uri_grants_ = UriGrantTable{};
            uri_grants_epoch_ = kernel_.reboot_count();
        }
        return uri_grants_;
    }
    ClassRegistry& classes() { return classes_; }
    const SystemConfig& config() const { return config_; }

    ScenarioReport launch_app(const AppRecord& app, bool app_available) {
        Flow flow;
        std::vector<Denial> denials;
        CallEvent start = issuer_.make_event(
            components::kLaunchingApp, components::kActivityManager,
            calls::Binder{{{"method", "StartActivity"},
                           {"intent", {{"action", "android.intent.action.MAIN"},
                                       {"package", app.name()}}}}},
            app.cred());
        start.set_outcome(Outcome::allowed());
        const EventId parent = start.event_id;
        flow.events.push_back(std::move(start));

        ForkCmd cmd;
        cmd.uid = app.cred().uid;
        cmd.gid = app.cred().gid;
        cmd.class_name = std::string(kActivityThreadClass);
        zygote_request(flow, denials, components::kActivityManager, system_server_credential(), cmd,
                       parent, app_available, app.name());
        return finish(std::move(flow), std::move(denials));
    }

    // Empty when the socket refused the command.
    std::optional<ForkResult> malicious_fork_once(const AppRecord& mal_app, Flow& flow,
                                                  std::vector<Denial>& denials) {
        ForkCmd cmd;
        cmd.class_name = std::string(kWithFrameworkClass);
        return zygote_request(flow, denials, roles::kMalApp, mal_app.cred(), cmd, std::nullopt,
                              false, std::nullopt);
    }

    ScenarioReport malicious_fork(const AppRecord& mal_app, int repetitions = 1) {
        if (repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
        Flow flow;
        std::vector<Denial> denials;
        int forks = 0;
        for (int i = 0; i < repetitions; ++i) {
            flow = Flow{};
            denials.clear();
            const auto r = malicious_fork_once(mal_app, flow, denials);
            if (r && std::holds_alternative<fork_result::Forked>(*r)) ++forks;
        }
        ScenarioReport report = finish(std::move(flow), std::move(denials));
        report.attempts = repetitions;
        report.forks = forks;
        return report;
    }

    // Repeats the malicious flow until the repetitions run out or a fork
    // exhausts memory; stops at the first reboot.
    ScenarioReport fork_flood(const AppRecord& mal_app, std::int64_t repetitions) {
        if (repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
        Flow flow;
        std::vector<Denial> denials;
        int attempts = 0;
        int forks = 0;
        std::optional<int> reboot_at;
        for (std::int64_t i = 0; i < repetitions; ++i) {
            flow = Flow{};
            denials.clear();
            ++attempts;
            const auto r = malicious_fork_once(mal_app, flow, denials);
            if (r && std::holds_alternative<fork_result::Forked>(*r)) ++forks;
            if (r && std::holds_alternative<fork_result::ForkFailed>(*r)) {
                reboot_at = attempts;
                break;
            }
        }
        ScenarioReport report = finish(std::move(flow), std::move(denials));
        report.attempts = attempts;
        report.forks = forks;
        report.reboot_at_attempt = reboot_at;
        return report;
    }

    // Installs a boot hook that floods the Zygote socket, then boots.
    ScenarioReport boot_attack(const AppRecord& mal_app) {
        std::optional<ScenarioReport> first_flood;
        const std::int64_t reps = forks_to_exhaust(config_);
        kernel_.boot_hooks.push_back([this, &mal_app, &first_flood, reps](KernelState&) {
            ScenarioReport r = fork_flood(mal_app, reps);
            if (!first_flood) first_flood = std::move(r);
        });
        kernel_.boot();
        kernel_.boot_hooks.pop_back();
        ScenarioReport report = std::move(*first_flood);
        report.final_process_count = kernel_.process_count();
        report.reboot_count = kernel_.reboot_count();
        report.boot_looped = looped();
        return report;
    }

    ScenarioReport gps_query(const AppRecord& app) {
        Flow flow;
        std::vector<Denial> denials;
        CallEvent query = issuer_.make_event(
            roles::kApp, components::kLocationManager,
            calls::Binder{{{"method", "getLastKnownLocation"}, {"provider", "gps"}}}, app.cred());
        const PolicyDecision d = check_api_permission(app, permissions::kAccessFineLocation);
        if (!d.allowed()) {
            query.set_outcome(Outcome::denied(d.reason));
            denials.push_back({0, d.reason});
            flow.events.push_back(std::move(query));
            return finish(std::move(flow), std::move(denials));
        }
        query.set_outcome(Outcome::allowed());
        EventId parent = query.event_id;
        flow.events.push_back(std::move(query));

        const Credential service = system_server_credential();
        auto chain = [&](const ComponentRef& src, const ComponentRef& dst, Call call) {
            CallEvent e = issuer_.make_event(src, dst, std::move(call), service, parent);
            e.set_outcome(Outcome::allowed());
            parent = e.event_id;
            flow.events.push_back(std::move(e));
        };
        chain(components::kLocationManager, components::kGpsProviderService,
              calls::Func{"getLocation", {}});
        chain(components::kGpsProviderService, components::kGpsProviderNative,
              calls::Jni{"native_get_position", nullptr});
        chain(components::kGpsProviderNative, components::kGpsLibrary, calls::Dl{"libgps.so"});

        const std::vector<Payload> ioctl_args = {"/dev/gps", "GPS_GET_POSITION"};
        CallEvent sys = issuer_.make_event(components::kGpsLibrary, components::kGpsKernelDriver,
                                           calls::Sys{"ioctl", ioctl_args}, service, parent);
        const SysOutcome out = dispatch_syscall(kernel_, service, "ioctl", ioctl_args);
        if (out.ok()) {
            sys.set_outcome(Outcome::allowed());
        } else {
            sys.set_outcome(Outcome::failed(std::string(to_string(*out.error))));
            denials.push_back({flow.events.size(), std::string(to_string(*out.error))});
        }
        flow.events.push_back(std::move(sys));
        return finish(std::move(flow), std::move(denials));
    }

  private:
    bool looped() const {
        return kernel_.halted() && kernel_.reboot_count() >= config_.boot_loop_threshold;
    }

    ScenarioReport finish(Flow flow, std::vector<Denial> denials) const {
        ScenarioReport r;
        r.signature = flow_signature(flow);
        r.flow = std::move(flow);
        r.denials = std::move(denials);
        r.final_process_count = kernel_.process_count();
        r.reboot_count = kernel_.reboot_count();
        r.boot_looped = looped();
        return r;
    }

    // sender --socket(zygote, cmd)--> ZP_AR, and if the Zygote accepts it,
    // ZP_AR --jni(ForkAndSpecialize)--> ZL_L --sys(fork)--> Kernel_K with
    // an optional Kernel_K --sys(kill, self)--> Kernel_K.
    std::optional<ForkResult> zygote_request(Flow& flow, std::vector<Denial>& denials, const ComponentRef& sender,
                              const Credential& sender_cred, const ForkCmd& cmd,
                              std::optional<EventId> parent, bool app_available,
                              const std::optional<std::string>& app_name) {
        nlohmann::json wire;
        to_json(wire, cmd);
        CallEvent sock = issuer_.make_event(sender, components::kZygoteProcess,
                                            calls::Socket{std::string(kZygoteSocketId), wire},
                                            sender_cred, parent);
        const std::size_t sock_index = flow.events.size();
        const SysOutcome sent = socket_send(kernel_, sender_cred, std::string(kZygoteSocketId), wire);
        if (!sent.ok()) {
            const std::string code(to_string(*sent.error));
            sock.set_outcome(Outcome::denied(code));
            denials.push_back({sock_index, code});
            flow.events.push_back(std::move(sock));
            return std::nullopt;
        }

        // The Zygote reads the command back off its socket.
        SocketNode& zs = *kernel_.find_socket(std::string(kZygoteSocketId));
        QueuedMessage msg = std::move(zs.queue.front());
        zs.queue.pop_front();
        const ForkCmd received = fork_cmd_from_json(msg.message);

        const EventId sock_id = sock.event_id;
        flow.events.push_back(std::move(sock));
        const ForkResult result = handle_command(kernel_, msg.sender, zygote_, received, classes_,
                                                 app_available, app_name, config_.process_cost);

        if (const auto* rejected = std::get_if<fork_result::Rejected>(&result)) {
            const std::string rule(to_string(rejected->rule));
            flow.events[sock_index].set_outcome(Outcome::denied(rule));
            denials.push_back({sock_index, rule});
            return result;
        }
        flow.events[sock_index].set_outcome(Outcome::allowed());

        CallEvent jni = issuer_.make_event(components::kZygoteProcess, components::kZygoteLibrary,
                                           calls::Jni{"ForkAndSpecialize", wire}, zygote_.cred,
                                           sock_id);
        jni.set_outcome(Outcome::allowed());
        const EventId jni_id = jni.event_id;
        flow.events.push_back(std::move(jni));

        CallEvent fork = issuer_.make_event(components::kZygoteLibrary, components::kKernel,
                                            calls::Sys{"fork", {}}, zygote_.cred, jni_id);
        if (const auto* failed = std::get_if<fork_result::ForkFailed>(&result)) {
            const std::string code(to_string(failed->error));
            fork.set_outcome(Outcome::failed(code));
            denials.push_back({flow.events.size(), code});
            flow.events.push_back(std::move(fork));
            return result;
        }
        fork.set_outcome(Outcome::allowed());
        const EventId fork_id = fork.event_id;
        flow.events.push_back(std::move(fork));

        if (std::holds_alternative<fork_result::KilledSelf>(result)) {
            CallEvent kill = issuer_.make_event(components::kKernel, components::kKernel,
                                                calls::Sys{"kill", {"self"}},
                                                child_credential(zygote_.cred, received), fork_id);
            kill.set_outcome(Outcome::allowed());
            flow.events.push_back(std::move(kill));
        }
        return result;
    }

    SystemConfig config_;
    KernelState kernel_;
    PackageManager packages_;
    UriGrantTable uri_grants_;
    int uri_grants_epoch_ = 0;
    ClassRegistry classes_;
    ZygoteProcess zygote_;
    EventIssuer issuer_;
};

// ---------------------------------------------------------------------------
// One-shot scenario runners, each on a freshly booted device.

inline ScenarioReport run_standard_launch(const SystemConfig& config, const AppRecord& app,
                                          bool app_available) {
    Device device(config);
    return device.launch_app(app, app_available);
}

inline ScenarioReport run_malicious_fork(const SystemConfig& config, const AppRecord& mal_app,
                                         int repetitions = 1) {
    Device device(config);
    return device.malicious_fork(mal_app, repetitions);
}

inline ScenarioReport run_fork_flood(const SystemConfig& config, const AppRecord& mal_app,
                                     std::int64_t repetitions) {
    Device device(config);
    return device.fork_flood(mal_app, repetitions);
}

inline ScenarioReport run_boot_attack(const SystemConfig& config) {
    Device device(config);
    const AppRecord& mal = device.packages().install_app(malicious_app_manifest(), true);
    return device.boot_attack(mal);
}

inline ScenarioReport run_gps_query(const SystemConfig& config, const AppRecord& app) {
    Device device(config);
    return device.gps_query(app);
}

// ---------------------------------------------------------------------------
// Reports and configs

inline void to_json(nlohmann::json& j, const Denial& d) { j = {d.step, d.reason}; }

inline void to_json(nlohmann::json& j, const ScenarioReport& r) {
    j = {{"flow", r.flow},
         {"signature", r.signature},
         {"final_process_count", r.final_process_count},
         {"reboot_count", r.reboot_count},
         {"boot_looped", r.boot_looped},
         {"denials", r.denials},
         {"attempts", r.attempts},
         {"forks", r.forks},
         {"reboot_at_attempt",
          r.reboot_at_attempt ? nlohmann::json(*r.reboot_at_attempt) : nlohmann::json(nullptr)}};
}

// Arrow notation, one step per line, with each step's outcome.
inline std::string render_flow(const Flow& flow) {
    std::ostringstream out;
    for (const auto& e : flow.events) {
        out << "  " << render_step(e);
        if (const auto& o = e.outcome()) {
            out << "  [" << to_string(o->kind);
            if (!o->reason.empty()) out << ": " << o->reason;
            out << "]";
        }
        out << "\n";
    }
    return out.str();
}

inline std::string render_text(const std::string& scenario, const ScenarioReport& r) {
    std::ostringstream out;
    out << "scenario: " << scenario << "\n"
        << "flow:\n"
        << render_flow(r.flow) << "signature: " << r.signature << "\n"
        << "processes: " << r.final_process_count << "\n"
        << "reboots: " << r.reboot_count << "\n"
        << "boot-looped: " << (r.boot_looped ? "yes" : "no") << "\n";
    if (r.attempts > 0) out << "attempts: " << r.attempts << ", forks: " << r.forks << "\n";
    if (r.reboot_at_attempt) out << "reboot at attempt: " << *r.reboot_at_attempt << "\n";
    out << "denials:";
    if (r.denials.empty()) out << " none";
    for (const auto& d : r.denials) out << " [step " << d.step << ": " << d.reason << "]";
    out << "\n";
    return out.str();
}

inline SystemConfig system_config_from_json(const nlohmann::json& j) {
    SystemConfig c;
    c.patched = j.value("patched", c.patched);
    c.memory_capacity = j.value("memory_capacity", c.memory_capacity);
    c.baseline_memory = j.value("baseline_memory", c.baseline_memory);
    c.process_cost = j.value("process_cost", c.process_cost);
    c.boot_loop_threshold = j.value("boot_loop_threshold", c.boot_loop_threshold);
    validate(c);
    return c;
}

inline void to_json(nlohmann::json& j, const SystemConfig& c) {
    j = {{"patched", c.patched},
         {"zygote_socket_perm", c.zygote_socket_perm()},
         {"memory_capacity", c.memory_capacity},
         {"baseline_memory", c.baseline_memory},
         {"process_cost", c.process_cost},
         {"boot_loop_threshold", c.boot_loop_threshold}};
}

}  // namespace androsim
