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

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "androsim/core_model.hpp"
#include "androsim/kernel_sim.hpp"

namespace androsim {

inline constexpr std::string_view kActivityThreadClass = "android.app.ActivityThread";
inline constexpr std::string_view kWithFrameworkClass = "com.android.internal.util.WithFramework";

struct ForkCmd {
    std::optional<Uid> uid;
    std::optional<Gid> gid;
    std::set<std::string> caps;
    bool debug = false;
    std::optional<std::vector<std::pair<std::string, std::int64_t>>> rlimits;
    std::string class_name;

    bool operator==(const ForkCmd&) const = default;
};

inline void to_json(nlohmann::json& j, const ForkCmd& cmd);

struct SpecializeClass {
    std::string name;
    bool has_static_main = false;
    bool in_system_package = false;
    bool binds_application = false;
    bool kills_if_unbound = false;
};

// Stands in for what the system class loader would find.
class ClassRegistry {
  public:
    void add(SpecializeClass cls) {
        if (cls.name.empty()) throw Error(ErrorCode::InvalidArgument, "class name is empty");
        std::string key = cls.name;
        classes_.insert_or_assign(std::move(key), std::move(cls));
    }

    const SpecializeClass* find(const std::string& name) const {
        auto it = classes_.find(name);
        return it == classes_.end() ? nullptr : &it->second;
    }

    static ClassRegistry with_defaults() {
        ClassRegistry r;
        r.add({std::string(kActivityThreadClass), true, true, true, true});
        r.add({std::string(kWithFrameworkClass), true, true, false, false});
        return r;
    }

  private:
    std::map<std::string, SpecializeClass> classes_;
};

enum class PolicyRule : std::uint8_t { PolicyA, PolicyB, PolicyC, NoStaticMain, NotSystemPackage };

inline constexpr std::string_view to_string(PolicyRule r) {
    switch (r) {
        case PolicyRule::PolicyA: return "PolicyA";
        case PolicyRule::PolicyB: return "PolicyB";
        case PolicyRule::PolicyC: return "PolicyC";
        case PolicyRule::NoStaticMain: return "NoStaticMain";
        case PolicyRule::NotSystemPackage: return "NotSystemPackage";
    }
    return "?";
}

namespace fork_result {
struct Forked {
    Pid child_pid = 0;
    bool bound = false;
    bool operator==(const Forked&) const = default;
};
struct Rejected {
    PolicyRule rule = PolicyRule::PolicyA;
    bool operator==(const Rejected&) const = default;
};
struct KilledSelf {
    Pid child_pid = 0;
    bool operator==(const KilledSelf&) const = default;
};
// The fork itself failed in the kernel (memory exhausted, device rebooted).
struct ForkFailed {
    SysError error = SysError::NoMemReboot;
    bool operator==(const ForkFailed&) const = default;
};
}  // namespace fork_result

using ForkResult = std::variant<fork_result::Forked, fork_result::Rejected,
                                fork_result::KilledSelf, fork_result::ForkFailed>;

struct ZygoteProcess {
    Pid pid = 0;
    Credential cred;
};

inline void validate(const ForkCmd& cmd) {
    if (cmd.class_name.empty()) throw Error(ErrorCode::InvalidArgument, "fork command has no class");
    for (const auto& cap : cmd.caps) {
        if (!is_capability(cap)) throw Error(ErrorCode::UnknownCapability, cap);
    }
}

// Built-in policy of the Zygote, first violated check wins:
// (a) uid/gid only from root or the Activity Manager (SYSTEM_UID),
// (b) no capability the Zygote itself lacks,
// (c) debug flags and rlimits only from root or in factory test mode,
// then the class must have a static main() and live in the system package.
// The caller's identity is consulted nowhere else.
inline std::optional<PolicyRule> check_fork_policy(const KernelState& state,
                                                   const Credential& caller,
                                                   const Credential& zygote_cred,
                                                   const ForkCmd& cmd,
                                                   const ClassRegistry& registry) {
    validate(cmd);
    if ((cmd.uid || cmd.gid) && caller.uid != kRootUid && caller.uid != kSystemUid) {
        return PolicyRule::PolicyA;
    }
    if (!std::includes(zygote_cred.capabilities.begin(), zygote_cred.capabilities.end(),
                       cmd.caps.begin(), cmd.caps.end())) {
        return PolicyRule::PolicyB;
    }
    if ((cmd.debug || cmd.rlimits) && caller.uid != kRootUid && !state.factory_test_mode) {
        return PolicyRule::PolicyC;
    }
    const SpecializeClass* cls = registry.find(cmd.class_name);
    if (cls == nullptr) throw Error(ErrorCode::UnknownClass, cmd.class_name);
    if (!cls->has_static_main) return PolicyRule::NoStaticMain;
    if (!cls->in_system_package) return PolicyRule::NotSystemPackage;
    return std::nullopt;
}

inline Credential child_credential(const Credential& zygote_cred, const ForkCmd& cmd) {
    Credential child = zygote_cred;
    if (cmd.uid) child.uid = *cmd.uid;
    if (cmd.gid) {
        child.gid = *cmd.gid;
        child.supplementary_groups.clear();
    }
    if (cmd.uid || cmd.gid || !cmd.caps.empty()) child.capabilities = cmd.caps;
    return child;
}

// Runs the specialization class's main() in the child.
inline ForkResult specialize(KernelState& state, Pid child_pid, const SpecializeClass& cls,
                             bool app_available,
                             const std::optional<std::string>& app_name = std::nullopt) {
    ProcessRecord* child = state.find_process(child_pid);
    if (child == nullptr) {
        throw Error(ErrorCode::InvalidArgument, "no live child " + std::to_string(child_pid));
    }
    if (!cls.binds_application) return fork_result::Forked{child_pid, false};
    if (app_available) {
        child->bound_app = app_name.value_or("app");
        child->thread_name = *child->bound_app;
        return fork_result::Forked{child_pid, true};
    }
    if (cls.kills_if_unbound) {
        const Credential self = child->cred;
        sys_kill(state, self, child_pid);
        return fork_result::KilledSelf{child_pid};
    }
    return fork_result::Forked{child_pid, false};
}

// Handles one command already read off the zygote socket.
inline ForkResult handle_command(KernelState& state, const Credential& caller,
                                 const ZygoteProcess& zygote, const ForkCmd& cmd,
                                 const ClassRegistry& registry, bool app_available = false,
                                 const std::optional<std::string>& app_name = std::nullopt,
                                 std::int64_t child_cost = kDefaultProcessCost) {
    if (auto rule = check_fork_policy(state, caller, zygote.cred, cmd, registry)) {
        return fork_result::Rejected{*rule};
    }
    const SpecializeClass& cls = *registry.find(cmd.class_name);
    const SysOutcome forked =
        sys_fork(state, zygote.pid, child_credential(zygote.cred, cmd), child_cost, cmd.class_name);
    if (!forked.ok()) return fork_result::ForkFailed{*forked.error};
    return specialize(state, static_cast<Pid>(forked.value), cls, app_available, app_name);
}

// ---------------------------------------------------------------------------
// JSON: {"class": text, "uid": int?, "gid": int?, "caps": [text], "debug": bool,
//        "rlimits": [[text,int]]?}

inline void to_json(nlohmann::json& j, const ForkCmd& cmd) {
    j = {{"class", cmd.class_name}, {"caps", cmd.caps}, {"debug", cmd.debug}};
    if (cmd.uid) j["uid"] = *cmd.uid;
    if (cmd.gid) j["gid"] = *cmd.gid;
    if (cmd.rlimits) {
        nlohmann::json limits = nlohmann::json::array();
        for (const auto& [name, bound] : *cmd.rlimits) limits.push_back({name, bound});
        j["rlimits"] = limits;
    }
}

inline ForkCmd fork_cmd_from_json(const nlohmann::json& j) {
    ForkCmd cmd;
    cmd.class_name = j.at("class").get<std::string>();
    if (j.contains("uid") && !j["uid"].is_null()) cmd.uid = j["uid"].get<Uid>();
    if (j.contains("gid") && !j["gid"].is_null()) cmd.gid = j["gid"].get<Gid>();
    cmd.caps = j.value("caps", std::set<std::string>{});
    cmd.debug = j.value("debug", false);
    if (j.contains("rlimits") && !j["rlimits"].is_null()) {
        std::vector<std::pair<std::string, std::int64_t>> limits;
        for (const auto& item : j["rlimits"]) {
            limits.emplace_back(item.at(0).get<std::string>(), item.at(1).get<std::int64_t>());
        }
        cmd.rlimits = std::move(limits);
    }
    validate(cmd);
    return cmd;
}

inline nlohmann::json fork_result_json(const ForkResult& result) {
    struct Visitor {
        nlohmann::json operator()(const fork_result::Forked& f) const {
            return {{"verdict", "Forked"}, {"child_pid", f.child_pid}, {"bound", f.bound}};
        }
        nlohmann::json operator()(const fork_result::Rejected& r) const {
            return {{"verdict", "Rejected"}, {"rule", to_string(r.rule)}};
        }
        nlohmann::json operator()(const fork_result::KilledSelf& k) const {
            return {{"verdict", "KilledSelf"}, {"child_pid", k.child_pid}};
        }
        nlohmann::json operator()(const fork_result::ForkFailed& f) const {
            return {{"verdict", "ForkFailed"}, {"error", to_string(f.error)}};
        }
    };
    return std::visit(Visitor{}, result);
}

}  // namespace androsim
