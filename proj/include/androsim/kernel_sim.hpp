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

// The Linux layer: process table, fork/kill, DAC-checked socket nodes,
// abstract memory accounting, the reboot safety mechanism and a coarse
// dispatcher for the replayable syscalls.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "androsim/core_model.hpp"

namespace androsim {

using Pid = std::uint32_t;

inline constexpr std::int64_t kDefaultMemoryCapacity = 256;
inline constexpr std::int64_t kDefaultProcessCost = 1;

// ---------------------------------------------------------------------------
// Discretionary access control

enum class Access : std::uint8_t { Read = 4, Write = 2, Execute = 1 };
enum class DacClass : std::uint8_t { Owner, Group, Other };

class FileMode {
  public:
    FileMode() = default;
    // bits is the usual octal triple, e.g. 0666.
    FileMode(Uid owner_uid, Gid group_gid, unsigned bits)
        : owner_uid_(owner_uid), group_gid_(group_gid), bits_(bits) {
        if (bits > 0777) throw Error(ErrorCode::InvalidArgument, "mode digits must be 0..7");
    }

    // Parses three octal digits such as "660".
    static FileMode parse(Uid owner_uid, Gid group_gid, std::string_view digits) {
        if (digits.size() != 3) {
            throw Error(ErrorCode::InvalidArgument, "mode needs three octal digits");
        }
        unsigned bits = 0;
        for (char ch : digits) {
            if (ch < '0' || ch > '7') {
                throw Error(ErrorCode::InvalidArgument, "mode digits must be 0..7");
            }
            bits = bits * 8 + static_cast<unsigned>(ch - '0');
        }
        return FileMode(owner_uid, group_gid, bits);
    }

    Uid owner_uid() const { return owner_uid_; }
    Gid group_gid() const { return group_gid_; }
    unsigned bits() const { return bits_; }

    unsigned digit(DacClass cls) const {
        switch (cls) {
            case DacClass::Owner: return (bits_ >> 6) & 7u;
            case DacClass::Group: return (bits_ >> 3) & 7u;
            case DacClass::Other: return bits_ & 7u;
        }
        return 0;
    }

    std::string digits() const {
        return {static_cast<char>('0' + digit(DacClass::Owner)),
                static_cast<char>('0' + digit(DacClass::Group)),
                static_cast<char>('0' + digit(DacClass::Other))};
    }

    bool operator==(const FileMode&) const = default;

  private:
    Uid owner_uid_ = 0;
    Gid group_gid_ = 0;
    unsigned bits_ = 0;
};

inline DacClass classify(const Credential& caller, const FileMode& perm) {
    if (caller.uid == perm.owner_uid()) return DacClass::Owner;
    if (caller.in_group(perm.group_gid())) return DacClass::Group;
    return DacClass::Other;
}

// Pure permission-bit check. Root is not special here; the override lives
// in the syscall paths.
inline PolicyDecision check_dac(const Credential& caller, const FileMode& perm, Access access) {
    const unsigned digit = perm.digit(classify(caller, perm));
    if ((digit & static_cast<unsigned>(access)) != 0) return PolicyDecision::allow();
    return PolicyDecision::deny("dac-denied");
}

// ---------------------------------------------------------------------------
// Syscall results

enum class SysError : std::uint8_t { Perm, AddrInUse, IsConn, NoEnt, Access, NoMemReboot };

inline constexpr std::string_view to_string(SysError e) {
    switch (e) {
        case SysError::Perm: return "EPERM";
        case SysError::AddrInUse: return "EADDRINUSE";
        case SysError::IsConn: return "EISCONN";
        case SysError::NoEnt: return "ENOENT";
        case SysError::Access: return "EACCES";
        case SysError::NoMemReboot: return "ENOMEM-REBOOT";
    }
    return "?";
}

struct SysOutcome {
    std::int64_t value = 0;
    std::optional<SysError> error;

    bool ok() const { return !error.has_value(); }
    static SysOutcome success(std::int64_t value = 0) { return {value, std::nullopt}; }
    static SysOutcome failure(SysError e) { return {0, e}; }

    bool operator==(const SysOutcome&) const = default;
};

// ---------------------------------------------------------------------------
// Kernel objects

struct QueuedMessage {
    Credential sender;
    Payload message;
    bool operator==(const QueuedMessage&) const = default;
};

struct SocketNode {
    std::string id;
    FileMode perm;
    std::deque<QueuedMessage> queue;
    std::optional<std::string> connected_peer;
};

struct ProcessRecord {
    Pid pid = 0;
    Credential cred;
    std::string thread_name;
    std::optional<std::string> bound_app;
    std::int64_t memory_cost = kDefaultProcessCost;
    std::optional<Pid> parent_pid;
};

class KernelState;
inline void reboot(KernelState& state);

// The mutable world of one simulation context. Memory accounting is kept
// in step with the process table by add_process/remove_process.
class KernelState {
  public:
    using BootHook = std::function<void(KernelState&)>;

    // Nested boots are capped here even when no threshold is configured.
    static constexpr int kMaxNestedBoots = 64;

    explicit KernelState(std::int64_t memory_capacity = kDefaultMemoryCapacity)
        : memory_capacity_(memory_capacity) {
        if (memory_capacity <= 0) throw Error(ErrorCode::InvalidArgument, "capacity must be > 0");
    }

    Pid add_process(Credential cred, std::string thread_name, std::int64_t memory_cost,
                    std::optional<Pid> parent_pid = std::nullopt) {
        if (memory_cost <= 0) throw Error(ErrorCode::InvalidArgument, "memory cost must be > 0");
        validate(cred);
        ProcessRecord p;
        p.pid = next_pid_++;
        p.cred = std::move(cred);
        p.thread_name = std::move(thread_name);
        p.memory_cost = memory_cost;
        p.parent_pid = parent_pid;
        memory_used_ += memory_cost;
        const Pid pid = p.pid;
        processes_.emplace(pid, std::move(p));
        return pid;
    }

    bool remove_process(Pid pid) {
        auto it = processes_.find(pid);
        if (it == processes_.end()) return false;
        memory_used_ -= it->second.memory_cost;
        processes_.erase(it);
        return true;
    }

    void add_socket(SocketNode node) {
        if (node.id.empty()) throw Error(ErrorCode::InvalidArgument, "socket id is empty");
        const std::string id = node.id;
        if (!sockets_.emplace(id, std::move(node)).second) {
            throw Error(ErrorCode::InvalidArgument, "socket '" + id + "' already exists");
        }
    }

    ProcessRecord* find_process(Pid pid) {
        auto it = processes_.find(pid);
        return it == processes_.end() ? nullptr : &it->second;
    }
    const ProcessRecord* find_process(Pid pid) const {
        auto it = processes_.find(pid);
        return it == processes_.end() ? nullptr : &it->second;
    }
    SocketNode* find_socket(const std::string& id) {
        auto it = sockets_.find(id);
        return it == sockets_.end() ? nullptr : &it->second;
    }
    const SocketNode* find_socket(const std::string& id) const {
        auto it = sockets_.find(id);
        return it == sockets_.end() ? nullptr : &it->second;
    }

    const std::map<Pid, ProcessRecord>& processes() const { return processes_; }
    const std::map<std::string, SocketNode>& sockets() const { return sockets_; }
    std::size_t process_count() const { return processes_.size(); }

    std::int64_t memory_capacity() const { return memory_capacity_; }
    std::int64_t memory_used() const { return memory_used_; }

    bool factory_test_mode = false;
    std::vector<BootHook> boot_hooks;
    // Reboots at which the device is declared boot-looped and stops booting.
    std::optional<int> boot_loop_threshold;

    int reboot_count() const { return reboot_count_; }
    bool halted() const { return halted_; }

    // Freezes the current processes and sockets as the state every reboot
    // returns to.
    void mark_baseline() {
        baseline_processes_ = processes_;
        baseline_sockets_ = sockets_;
        for (auto& [id, node] : baseline_sockets_) node.queue.clear();
        baseline_next_pid_ = next_pid_;
        baseline_memory_ = memory_used_;
    }

    std::int64_t baseline_memory() const { return baseline_memory_; }

    // First boot: runs the boot hooks without counting a reboot.
    void boot() { run_boot_hooks(); }

  private:
    friend void reboot(KernelState& state);

    void run_boot_hooks() {
        if (boot_depth_ >= kMaxNestedBoots) {
            halted_ = true;
            return;
        }
        ++boot_depth_;
        const auto hooks = boot_hooks;
        for (const auto& hook : hooks) {
            if (halted_) break;
            hook(*this);
        }
        --boot_depth_;
    }

    std::map<Pid, ProcessRecord> processes_;
    std::map<std::string, SocketNode> sockets_;
    std::int64_t memory_capacity_;
    std::int64_t memory_used_ = 0;
    Pid next_pid_ = 1;
    int reboot_count_ = 0;
    bool halted_ = false;
    int boot_depth_ = 0;

    std::map<Pid, ProcessRecord> baseline_processes_;
    std::map<std::string, SocketNode> baseline_sockets_;
    Pid baseline_next_pid_ = 1;
    std::int64_t baseline_memory_ = 0;
};

// Safety mechanism: back to the baseline image, then boot again. A boot
// hook that re-runs an attack can trigger a nested reboot from inside
// this call; once the threshold is reached the device stays down.
inline void reboot(KernelState& state) {
    state.processes_ = state.baseline_processes_;
    state.sockets_ = state.baseline_sockets_;
    state.next_pid_ = state.baseline_next_pid_;
    state.memory_used_ = state.baseline_memory_;
    ++state.reboot_count_;
    if (state.boot_loop_threshold && state.reboot_count_ >= *state.boot_loop_threshold) {
        state.halted_ = true;
        return;
    }
    state.run_boot_hooks();
}

// ---------------------------------------------------------------------------
// Operations

// child_cred, when set, replaces the inherited credential; whether that is
// legal is for the caller (the Zygote policy) to decide.
inline SysOutcome sys_fork(KernelState& state, Pid parent_pid,
                           const std::optional<Credential>& child_cred,
                           std::int64_t child_cost = kDefaultProcessCost,
                           std::optional<std::string> thread_name = std::nullopt) {
    const ProcessRecord* parent = state.find_process(parent_pid);
    if (parent == nullptr) return SysOutcome::failure(SysError::NoEnt);
    if (state.memory_used() + child_cost > state.memory_capacity()) {
        reboot(state);
        return SysOutcome::failure(SysError::NoMemReboot);
    }
    Credential cred = child_cred.value_or(parent->cred);
    std::string name = thread_name.value_or(parent->thread_name);
    return SysOutcome::success(state.add_process(std::move(cred), std::move(name), child_cost,
                                                 parent_pid));
}

inline SysOutcome sys_kill(KernelState& state, const Credential& caller, Pid target_pid) {
    const ProcessRecord* target = state.find_process(target_pid);
    if (target == nullptr) return SysOutcome::failure(SysError::NoEnt);
    if (!caller.is_root() && caller.uid != target->cred.uid) {
        return SysOutcome::failure(SysError::Perm);
    }
    state.remove_process(target_pid);
    return SysOutcome::success();
}

// Enqueues the message with the sender's credential attached. Nothing
// obliges the reader of the socket to look at that credential.
inline SysOutcome socket_send(KernelState& state, const Credential& caller,
                              const std::string& socket_id, Payload msg) {
    SocketNode* node = state.find_socket(socket_id);
    if (node == nullptr) return SysOutcome::failure(SysError::NoEnt);
    if (!caller.is_root() && !check_dac(caller, node->perm, Access::Write).allowed()) {
        return SysOutcome::failure(SysError::Access);
    }
    node->queue.push_back({caller, std::move(msg)});
    return SysOutcome::success();
}

namespace detail {
inline std::optional<std::string> socket_arg(const std::vector<Payload>& args) {
    if (args.empty()) return std::nullopt;
    const auto& a = args.front();
    if (a.is_string()) return a.get<std::string>();
    if (a.is_object() && a.contains("socket") && a["socket"].is_string()) {
        return a["socket"].get<std::string>();
    }
    return std::nullopt;
}
}  // namespace detail

// Coarse semantics for the replayable syscalls. Only bind, kill and sendto
// touch kernel state; everything else succeeds for any caller.
inline SysOutcome dispatch_syscall(KernelState& state, const Credential& caller,
                                   std::string_view name, const std::vector<Payload>& args) {
    if (!is_replayable_syscall(name)) {
        throw Error(ErrorCode::UnknownSyscall, std::string(name));
    }
    if (name == "bind") {
        const auto id = detail::socket_arg(args);
        if (!id) return SysOutcome::success();  // anonymous bind
        if (state.find_socket(*id) != nullptr) return SysOutcome::failure(SysError::AddrInUse);
        state.add_socket(SocketNode{*id, FileMode(caller.uid, caller.gid, 0660), {}, {}});
        return SysOutcome::success();
    }
    if (name == "kill") {
        if (args.empty() || !args.front().is_number_integer() || args.front().get<std::int64_t>() < 0) {
            return SysOutcome::failure(SysError::NoEnt);
        }
        return sys_kill(state, caller, args.front().get<Pid>());
    }
    if (name == "sendto") {
        const auto id = detail::socket_arg(args);
        if (!id) return SysOutcome::failure(SysError::NoEnt);
        const SocketNode* node = state.find_socket(*id);
        if (node == nullptr) return SysOutcome::failure(SysError::NoEnt);
        if (node->connected_peer) return SysOutcome::failure(SysError::IsConn);
        return socket_send(state, caller, *id, args.size() > 1 ? args[1] : Payload{});
    }
    return SysOutcome::success();
}

// ---------------------------------------------------------------------------
// Standard boot image

inline constexpr std::int64_t kDefaultBaselineMemory = 10;

// Baseline pids of the standard image.
namespace pids {
inline constexpr Pid kInit = 1;
inline constexpr Pid kZygote = 2;
inline constexpr Pid kSystemServer = 3;
}  // namespace pids

inline constexpr std::string_view kZygoteSocketId = "zygote";
inline constexpr std::string_view kVoldSocketId = "vold";

inline FileMode unpatched_zygote_perm() { return FileMode(kRootUid, 0, 0666); }
inline FileMode patched_zygote_perm() { return FileMode(kRootUid, kSystemGid, 0660); }

inline Credential zygote_credential() { return root_credential(); }

// init, zygote and system_server, plus the zygote socket and a vold socket
// that already has a connected peer. init is charged whatever part of
// baseline_memory the other two do not use.
inline KernelState standard_kernel(std::int64_t memory_capacity = kDefaultMemoryCapacity,
                                   std::int64_t baseline_memory = kDefaultBaselineMemory,
                                   FileMode zygote_perm = unpatched_zygote_perm()) {
    if (baseline_memory < 3 || baseline_memory > memory_capacity) {
        throw Error(ErrorCode::InvalidArgument, "baseline memory must be in [3, capacity]");
    }
    KernelState state(memory_capacity);
    state.add_process(root_credential(), "init", baseline_memory - 2);
    state.add_process(zygote_credential(), "zygote", 1, pids::kInit);
    state.add_process(system_server_credential(), "system_server", 1, pids::kZygote);
    state.add_socket(SocketNode{std::string(kZygoteSocketId), zygote_perm, {}, {}});
    state.add_socket(SocketNode{std::string(kVoldSocketId), FileMode(kRootUid, kSystemGid, 0660), {},
                                std::string("VoldConnector")});
    state.mark_baseline();
    return state;
}

// ---------------------------------------------------------------------------
// JSON snapshots

inline void to_json(nlohmann::json& j, const FileMode& m) {
    j = {{"owner", m.owner_uid()}, {"group", m.group_gid()}, {"mode", m.digits()}};
}

inline FileMode file_mode_from_json(const nlohmann::json& j) {
    return FileMode::parse(j.at("owner").get<Uid>(), j.at("group").get<Gid>(),
                           j.at("mode").get<std::string>());
}

inline nlohmann::json snapshot(const KernelState& state) {
    nlohmann::json procs = nlohmann::json::array();
    for (const auto& [pid, p] : state.processes()) {  // std::map: sorted by pid
        procs.push_back({{"pid", p.pid},
                         {"cred", p.cred},
                         {"thread_name", p.thread_name},
                         {"bound_app", p.bound_app ? nlohmann::json(*p.bound_app) : nullptr},
                         {"memory_cost", p.memory_cost},
                         {"parent_pid", p.parent_pid ? nlohmann::json(*p.parent_pid) : nullptr}});
    }
    nlohmann::json socks = nlohmann::json::array();
    for (const auto& [id, s] : state.sockets()) {
        socks.push_back({{"id", s.id},
                         {"perm", s.perm},
                         {"queued", s.queue.size()},
                         {"connected_peer",
                          s.connected_peer ? nlohmann::json(*s.connected_peer) : nullptr}});
    }
    return {{"processes", procs},
            {"sockets", socks},
            {"memory_capacity", state.memory_capacity()},
            {"memory_used", state.memory_used()},
            {"factory_test_mode", state.factory_test_mode},
            {"reboot_count", state.reboot_count()}};
}

}  // namespace androsim
