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

// Layers, components, credentials, the six call kinds, call events and
// flows. Everything in here is a plain value type.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "androsim/error.hpp"
#include "androsim/syscalls.hpp"

namespace androsim {

using Payload = nlohmann::json;
using Uid = std::uint32_t;
using Gid = std::uint32_t;
using EventId = std::uint64_t;

// Declared bottom-up so that the built-in ordering gives A > AF > AR > L > K.
enum class Layer : std::uint8_t { K = 0, L = 1, AR = 2, AF = 3, A = 4 };

inline constexpr std::array<Layer, 5> kAllLayers = {Layer::A, Layer::AF, Layer::AR, Layer::L,
                                                    Layer::K};

inline constexpr std::string_view to_string(Layer layer) {
    switch (layer) {
        case Layer::A: return "A";
        case Layer::AF: return "AF";
        case Layer::AR: return "AR";
        case Layer::L: return "L";
        case Layer::K: return "K";
    }
    return "?";
}

inline Layer parse_layer(std::string_view text) {
    for (Layer layer : kAllLayers) {
        if (to_string(layer) == text) return layer;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown layer '" + std::string(text) + "'");
}

struct ComponentRef {
    std::string name;
    Layer layer = Layer::A;

    auto operator<=>(const ComponentRef&) const = default;
    bool operator==(const ComponentRef&) const = default;
};

// X_layer notation, e.g. "AM_AF".
inline std::string render(const ComponentRef& c) {
    return c.name + "_" + std::string(to_string(c.layer));
}

inline ComponentRef make_component(std::string name, Layer layer) {
    if (name.empty()) throw Error(ErrorCode::InvalidArgument, "component name is empty");
    return ComponentRef{std::move(name), layer};
}

namespace components {
inline const ComponentRef kLaunchingApp{"AL", Layer::A};
inline const ComponentRef kActivityManager{"AM", Layer::AF};
inline const ComponentRef kZygoteSocket{"ZS", Layer::K};
inline const ComponentRef kZygoteProcess{"ZP", Layer::AR};
inline const ComponentRef kZygoteLibrary{"ZL", Layer::L};
inline const ComponentRef kKernel{"Kernel", Layer::K};
inline const ComponentRef kLocationManager{"LMS", Layer::AF};
inline const ComponentRef kGpsProviderService{"GLP", Layer::AF};
inline const ComponentRef kGpsProviderNative{"GLP", Layer::L};
inline const ComponentRef kGpsLibrary{"GL", Layer::L};
inline const ComponentRef kGpsKernelDriver{"KD", Layer::K};
}  // namespace components

// The set of components making up one system configuration.
class ComponentRegistry {
  public:
    void add(const ComponentRef& c) {
        if (c.name.empty()) throw Error(ErrorCode::InvalidArgument, "component name is empty");
        if (!components_.insert(c).second) {
            throw Error(ErrorCode::DuplicateComponent, render(c));
        }
    }
    bool contains(const ComponentRef& c) const { return components_.count(c) != 0; }
    std::size_t size() const { return components_.size(); }
    const std::set<ComponentRef>& all() const { return components_; }

    static ComponentRegistry well_known() {
        ComponentRegistry r;
        using namespace components;
        for (const auto& c : {kLaunchingApp, kActivityManager, kZygoteSocket, kZygoteProcess,
                              kZygoteLibrary, kKernel, kLocationManager, kGpsProviderService,
                              kGpsProviderNative, kGpsLibrary, kGpsKernelDriver}) {
            r.add(c);
        }
        return r;
    }

  private:
    std::set<ComponentRef> components_;
};

// ---------------------------------------------------------------------------
// Credentials

inline constexpr Uid kRootUid = 0;
inline constexpr Uid kSystemUid = 1000;
inline constexpr Gid kSystemGid = 1000;
inline constexpr Uid kFirstAppUid = 10000;

inline constexpr std::array<std::string_view, 23> kCapabilityNames = {
    "CHOWN",       "DAC_OVERRIDE", "DAC_READ_SEARCH", "FOWNER",      "FSETID",
    "IPC_LOCK",    "KILL",         "NET_ADMIN",       "NET_BIND_SERVICE", "NET_BROADCAST",
    "NET_RAW",     "SETGID",       "SETPCAP",         "SETUID",      "SYS_ADMIN",
    "SYS_BOOT",    "SYS_CHROOT",   "SYS_MODULE",      "SYS_NICE",    "SYS_PTRACE",
    "SYS_RAWIO",   "SYS_RESOURCE", "SYS_TIME",
};

inline bool is_capability(std::string_view name) {
    return std::find(kCapabilityNames.begin(), kCapabilityNames.end(), name) !=
           kCapabilityNames.end();
}

inline std::set<std::string> all_capabilities() {
    return {kCapabilityNames.begin(), kCapabilityNames.end()};
}

struct Credential {
    Uid uid = 0;
    Gid gid = 0;
    std::set<Gid> supplementary_groups;
    std::set<std::string> capabilities;

    bool is_root() const { return uid == kRootUid; }
    bool in_group(Gid g) const { return gid == g || supplementary_groups.count(g) != 0; }

    bool operator==(const Credential&) const = default;
};

inline void validate(const Credential& cred) {
    for (const auto& cap : cred.capabilities) {
        if (!is_capability(cap)) throw Error(ErrorCode::UnknownCapability, cap);
    }
}

inline Credential root_credential() { return Credential{kRootUid, 0, {}, all_capabilities()}; }

inline Credential system_server_credential() {
    return Credential{kSystemUid, kSystemGid, {kSystemGid}, {}};
}

inline Credential app_credential(Uid uid) { return Credential{uid, uid, {}, {}}; }

// ---------------------------------------------------------------------------
// Policy decisions shared by the framework and kernel checks

enum class Verdict { Allow, Deny };

struct PolicyDecision {
    Verdict verdict = Verdict::Allow;
    std::string reason;

    bool allowed() const { return verdict == Verdict::Allow; }
    bool operator==(const PolicyDecision&) const = default;

    static PolicyDecision allow() { return {Verdict::Allow, {}}; }
    static PolicyDecision deny(std::string reason) {
        if (reason.empty()) throw Error(ErrorCode::InvalidArgument, "deny without reason code");
        return {Verdict::Deny, std::move(reason)};
    }
};

// ---------------------------------------------------------------------------
// Calls

enum class CallKind : std::uint8_t { Binder, Jni, Socket, Sys, Func, Dl };

inline constexpr std::array<CallKind, 6> kAllCallKinds = {
    CallKind::Binder, CallKind::Jni, CallKind::Socket, CallKind::Sys, CallKind::Func, CallKind::Dl};

inline constexpr std::string_view to_string(CallKind kind) {
    switch (kind) {
        case CallKind::Binder: return "binder";
        case CallKind::Jni: return "jni";
        case CallKind::Socket: return "socket";
        case CallKind::Sys: return "sys";
        case CallKind::Func: return "func";
        case CallKind::Dl: return "dl";
    }
    return "?";
}

inline CallKind parse_call_kind(std::string_view text) {
    for (CallKind kind : kAllCallKinds) {
        if (to_string(kind) == text) return kind;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown call kind '" + std::string(text) + "'");
}

namespace calls {
struct Binder {
    Payload obj;
    bool operator==(const Binder&) const = default;
};
struct Jni {
    std::string mtd;
    Payload obj;
    bool operator==(const Jni&) const = default;
};
struct Socket {
    std::string id;
    Payload m;
    bool operator==(const Socket&) const = default;
};
struct Sys {
    std::string id;
    std::vector<Payload> args;
    bool operator==(const Sys&) const = default;
};
struct Func {
    std::string id;
    std::vector<Payload> args;
    bool operator==(const Func&) const = default;
};
struct Dl {
    std::string id;
    bool operator==(const Dl&) const = default;
};
}  // namespace calls

// Variant order matches CallKind.
using Call = std::variant<calls::Binder, calls::Jni, calls::Socket, calls::Sys, calls::Func,
                          calls::Dl>;

inline CallKind kind_of(const Call& call) { return static_cast<CallKind>(call.index()); }

// The identifier shown in arrow notation: the Binder method, the JNI
// method, or the id of the other kinds.
inline std::string call_label(const Call& call) {
    struct Visitor {
        std::string operator()(const calls::Binder& c) const {
            if (c.obj.is_string()) return c.obj.get<std::string>();
            if (c.obj.is_object() && c.obj.contains("method") && c.obj["method"].is_string()) {
                return c.obj["method"].get<std::string>();
            }
            return {};
        }
        std::string operator()(const calls::Jni& c) const { return c.mtd; }
        std::string operator()(const calls::Socket& c) const { return c.id; }
        std::string operator()(const calls::Sys& c) const { return c.id; }
        std::string operator()(const calls::Func& c) const { return c.id; }
        std::string operator()(const calls::Dl& c) const { return c.id; }
    };
    return std::visit(Visitor{}, call);
}

inline void validate(const Call& call) {
    if (const auto* sys = std::get_if<calls::Sys>(&call)) {
        if (!is_modeled_syscall(sys->id)) throw Error(ErrorCode::UnknownSyscall, sys->id);
    }
}

// ---------------------------------------------------------------------------
// Call topology

enum class TopologyClass : std::uint8_t { Documented, Discouraged, Impossible };

inline constexpr std::string_view to_string(TopologyClass c) {
    switch (c) {
        case TopologyClass::Documented: return "Documented";
        case TopologyClass::Discouraged: return "Discouraged";
        case TopologyClass::Impossible: return "Impossible";
    }
    return "?";
}

// Which layers may source a call of each kind and where it lands.
inline constexpr TopologyClass topology_class(CallKind kind, Layer src, Layer dst) {
    using enum Layer;
    using T = TopologyClass;
    switch (kind) {
        case CallKind::Binder:
            // Every layer of the Android stack reaches the Binder driver.
            return (dst == K && src != K) ? T::Documented : T::Impossible;
        case CallKind::Jni:
            return (dst == L && (src == A || src == AF || src == AR)) ? T::Documented
                                                                     : T::Impossible;
        case CallKind::Socket:
            if (dst != K) return T::Impossible;
            if (src == AF || src == L) return T::Documented;
            if (src == A) return T::Discouraged;
            // Assumption: the runtime is not listed as a socket source.
            return T::Impossible;
        case CallKind::Sys:
            if (dst != K) return T::Impossible;
            if (src == AF || src == L) return T::Documented;
            // Assumption for AR: runtime code can trap into the kernel but is
            // not one of the layers expected to do so.
            if (src == A || src == AR) return T::Discouraged;
            return T::Impossible;
        case CallKind::Func:
            return src == dst ? T::Documented : T::Impossible;
        case CallKind::Dl:
            return (dst == L && (src == A || src == AF)) ? T::Documented : T::Impossible;
    }
    return T::Impossible;
}

// Binder, socket and sys calls are served by the kernel no matter which
// component ends up handling the payload (AM_AF for a Binder intent, ZP_AR
// for the Zygote socket), so they are classified against layer K.
inline Layer routed_layer(CallKind kind, const ComponentRef& target) {
    switch (kind) {
        case CallKind::Binder:
        case CallKind::Socket:
        case CallKind::Sys: return Layer::K;
        default: return target.layer;
    }
}

// ---------------------------------------------------------------------------
// Events and flows

enum class OutcomeKind { Allowed, Denied, Failed };

inline constexpr std::string_view to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::Allowed: return "Allowed";
        case OutcomeKind::Denied: return "Denied";
        case OutcomeKind::Failed: return "Failed";
    }
    return "?";
}

struct Outcome {
    OutcomeKind kind = OutcomeKind::Allowed;
    std::string reason;

    static Outcome allowed() { return {OutcomeKind::Allowed, {}}; }
    static Outcome denied(std::string reason) { return {OutcomeKind::Denied, std::move(reason)}; }
    static Outcome failed(std::string reason) { return {OutcomeKind::Failed, std::move(reason)}; }

    bool operator==(const Outcome&) const = default;
};

class CallEvent {
  public:
    EventId event_id = 0;
    std::optional<EventId> parent_id;
    ComponentRef source;
    ComponentRef target;
    Call call;
    Credential caller_cred;

    const std::optional<Outcome>& outcome() const { return outcome_; }
    bool pending() const { return !outcome_.has_value(); }

    void set_outcome(Outcome outcome) {
        if (outcome_) {
            throw Error(ErrorCode::OutcomeAlreadySet, "event " + std::to_string(event_id));
        }
        outcome_ = std::move(outcome);
    }

    bool operator==(const CallEvent&) const = default;

  private:
    std::optional<Outcome> outcome_;
};

// Issues event ids for one simulation context.
class EventIssuer {
  public:
    CallEvent make_event(ComponentRef source, ComponentRef target, Call call, Credential cred,
                         std::optional<EventId> parent = std::nullopt) {
        validate(call);
        CallEvent e;
        e.event_id = next_++;
        e.parent_id = parent;
        e.source = std::move(source);
        e.target = std::move(target);
        e.call = std::move(call);
        e.caller_cred = std::move(cred);
        return e;
    }

    EventId last_issued() const { return next_ - 1; }

  private:
    EventId next_ = 1;
};

struct Flow {
    std::vector<CallEvent> events;

    bool empty() const { return events.empty(); }
    std::size_t size() const { return events.size(); }
    bool operator==(const Flow&) const = default;
};

// True when every event's parent is its predecessor.
inline bool is_chain(const Flow& flow) {
    for (std::size_t i = 1; i < flow.events.size(); ++i) {
        if (flow.events[i].parent_id != flow.events[i - 1].event_id) return false;
    }
    return !flow.events.empty();
}

inline bool traverses_layer(const Flow& flow, Layer layer) {
    return std::any_of(flow.events.begin(), flow.events.end(), [layer](const CallEvent& e) {
        return e.source.layer == layer || e.target.layer == layer;
    });
}

inline std::string render_step(const CallEvent& e) {
    return render(e.source) + " --" + std::string(to_string(kind_of(e.call))) + "(" +
           call_label(e.call) + ")--> " + render(e.target);
}

inline std::string flow_signature(const Flow& flow) {
    if (flow.empty()) throw Error(ErrorCode::EmptyFlow, "cannot sign an empty flow");
    std::string out;
    for (std::size_t i = 0; i < flow.events.size(); ++i) {
        if (i != 0) out += "; ";
        out += render_step(flow.events[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const ComponentRef& c) {
    j = {{"name", c.name}, {"layer", to_string(c.layer)}};
}
inline void from_json(const nlohmann::json& j, ComponentRef& c) {
    c = make_component(j.at("name").get<std::string>(),
                       parse_layer(j.at("layer").get<std::string>()));
}

inline void to_json(nlohmann::json& j, const Credential& c) {
    j = {{"uid", c.uid},
         {"gid", c.gid},
         {"supplementary_groups", c.supplementary_groups},
         {"capabilities", c.capabilities}};
}
inline void from_json(const nlohmann::json& j, Credential& c) {
    c.uid = j.at("uid").get<Uid>();
    c.gid = j.at("gid").get<Gid>();
    c.supplementary_groups = j.value("supplementary_groups", std::set<Gid>{});
    c.capabilities = j.value("capabilities", std::set<std::string>{});
    validate(c);
}

inline void to_json(nlohmann::json& j, const PolicyDecision& d) {
    j = {{"verdict", d.allowed() ? "Allow" : "Deny"}, {"reason", d.reason}};
}

// Call is a std::variant of calls::*, so its serializers must live in that
// namespace to be found by argument-dependent lookup.
namespace calls {

inline void to_json(nlohmann::json& j, const Call& call) {
    struct Visitor {
        nlohmann::json operator()(const calls::Binder& c) const {
            return {{"kind", "binder"}, {"obj", c.obj}};
        }
        nlohmann::json operator()(const calls::Jni& c) const {
            return {{"kind", "jni"}, {"mtd", c.mtd}, {"obj", c.obj}};
        }
        nlohmann::json operator()(const calls::Socket& c) const {
            return {{"kind", "socket"}, {"id", c.id}, {"m", c.m}};
        }
        nlohmann::json operator()(const calls::Sys& c) const {
            return {{"kind", "sys"}, {"id", c.id}, {"args", c.args}};
        }
        nlohmann::json operator()(const calls::Func& c) const {
            return {{"kind", "func"}, {"id", c.id}, {"args", c.args}};
        }
        nlohmann::json operator()(const calls::Dl& c) const {
            return {{"kind", "dl"}, {"id", c.id}};
        }
    };
    j = std::visit(Visitor{}, call);
}

inline void from_json(const nlohmann::json& j, Call& call) {
    auto args = [&j] { return j.value("args", std::vector<Payload>{}); };
    switch (parse_call_kind(j.at("kind").get<std::string>())) {
        case CallKind::Binder: call = calls::Binder{j.value("obj", Payload{})}; break;
        case CallKind::Jni:
            call = calls::Jni{j.at("mtd").get<std::string>(), j.value("obj", Payload{})};
            break;
        case CallKind::Socket:
            call = calls::Socket{j.at("id").get<std::string>(), j.value("m", Payload{})};
            break;
        case CallKind::Sys: call = calls::Sys{j.at("id").get<std::string>(), args()}; break;
        case CallKind::Func: call = calls::Func{j.at("id").get<std::string>(), args()}; break;
        case CallKind::Dl: call = calls::Dl{j.at("id").get<std::string>()}; break;
    }
    validate(call);
}

}  // namespace calls

inline void to_json(nlohmann::json& j, const Outcome& o) {
    j = {{"verdict", to_string(o.kind)}};
    if (o.kind != OutcomeKind::Allowed) j["reason"] = o.reason;
}
inline void from_json(const nlohmann::json& j, Outcome& o) {
    const auto verdict = j.at("verdict").get<std::string>();
    if (verdict == "Allowed") {
        o = Outcome::allowed();
    } else if (verdict == "Denied") {
        o = Outcome::denied(j.value("reason", std::string{}));
    } else if (verdict == "Failed") {
        o = Outcome::failed(j.value("reason", std::string{}));
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown outcome '" + verdict + "'");
    }
}

inline void to_json(nlohmann::json& j, const CallEvent& e) {
    j = {{"event_id", e.event_id},
         {"parent_id", e.parent_id ? nlohmann::json(*e.parent_id) : nlohmann::json(nullptr)},
         {"source", e.source},
         {"target", e.target},
         {"call", e.call},
         {"caller_cred", e.caller_cred},
         {"outcome", e.outcome() ? nlohmann::json(*e.outcome()) : nlohmann::json(nullptr)}};
}
inline void from_json(const nlohmann::json& j, CallEvent& e) {
    e = CallEvent{};
    e.event_id = j.at("event_id").get<EventId>();
    if (j.contains("parent_id") && !j["parent_id"].is_null()) {
        e.parent_id = j["parent_id"].get<EventId>();
    }
    e.source = j.at("source").get<ComponentRef>();
    e.target = j.at("target").get<ComponentRef>();
    e.call = j.at("call").get<Call>();
    e.caller_cred = j.value("caller_cred", Credential{});
    if (j.contains("outcome") && !j["outcome"].is_null()) {
        e.set_outcome(j["outcome"].get<Outcome>());
    }
}

inline void to_json(nlohmann::json& j, const Flow& f) {
    j = {{"events", f.events}};
}

}  // namespace androsim
