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

#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "androsim/kernel_sim.hpp"

using namespace androsim;

namespace {

// Written against the raw octal word, not FileMode::digit.
bool dac_oracle(Uid uid, Gid gid, const std::set<Gid>& groups, Uid owner, Gid group, unsigned bits,
                unsigned access_bit) {
    unsigned shift = 0;
    if (uid == owner) {
        shift = 6;
    } else if (gid == group || groups.count(group)) {
        shift = 3;
    }
    return ((bits >> shift) & access_bit) == access_bit;
}

std::int64_t recomputed_memory(const KernelState& s) {
    std::int64_t sum = 0;
    for (const auto& [pid, p] : s.processes()) sum += p.memory_cost;
    return sum;
}

}  // namespace

TEST(Dac, Examples) {
    const Credential app = app_credential(10050);
    EXPECT_TRUE(check_dac(app, FileMode(0, 0, 0666), Access::Write).allowed());
    EXPECT_EQ(check_dac(app, FileMode(0, 1000, 0660), Access::Write).reason, "dac-denied");
    Credential sys = app_credential(10050);
    sys.gid = 1000;
    EXPECT_TRUE(check_dac(sys, FileMode(0, 1000, 0660), Access::Write).allowed());
    EXPECT_FALSE(check_dac(root_credential(), FileMode(0, 0, 0), Access::Read).allowed());
}

TEST(Dac, ExhaustiveGridAgainstOracle) {
    // Callers that land in each class for perm owner 500, group 600.
    Credential owner = app_credential(500);
    Credential group = app_credential(10050);
    group.gid = 600;
    Credential supplementary = app_credential(10051);
    supplementary.supplementary_groups = {42, 600};
    const Credential other = app_credential(10052);
    const std::vector<std::pair<Credential, DacClass>> callers = {
        {owner, DacClass::Owner},
        {group, DacClass::Group},
        {supplementary, DacClass::Group},
        {other, DacClass::Other}};
    int checked = 0;
    for (unsigned o = 0; o < 8; ++o) {
        for (unsigned g = 0; g < 8; ++g) {
            for (unsigned t = 0; t < 8; ++t) {
                const FileMode mode = FileMode::parse(
                    500, 600, std::string{char('0' + o), char('0' + g), char('0' + t)});
                ASSERT_EQ(mode.bits(), o * 64 + g * 8 + t);
                for (const auto& [cred, cls] : callers) {
                    ASSERT_EQ(classify(cred, mode), cls);
                    for (Access a : {Access::Read, Access::Write, Access::Execute}) {
                        const bool expect = dac_oracle(cred.uid, cred.gid, cred.supplementary_groups,
                                                       500, 600, mode.bits(),
                                                       static_cast<unsigned>(a));
                        ASSERT_EQ(check_dac(cred, mode, a).allowed(), expect);
                        ++checked;
                    }
                }
            }
        }
    }
    EXPECT_EQ(checked, 512 * 4 * 3);
}

TEST(Dac, ParseRejectsBadDigits) {
    EXPECT_THROW(FileMode::parse(0, 0, "668"), Error);
    EXPECT_THROW(FileMode::parse(0, 0, "66"), Error);
    EXPECT_THROW(FileMode(0, 0, 01000), Error);
    EXPECT_EQ(FileMode::parse(0, 1000, "660").digits(), "660");
}

TEST(Fork, Accounting) {
    KernelState s(100);
    const Pid init = s.add_process(root_credential(), "init", 10);
    const SysOutcome r = sys_fork(s, init, std::nullopt, 1);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(s.memory_used(), 11);
    const ProcessRecord* child = s.find_process(static_cast<Pid>(r.value));
    ASSERT_NE(child, nullptr);
    EXPECT_EQ(child->cred, root_credential());
    EXPECT_EQ(child->parent_pid, std::optional<Pid>(init));
}

TEST(Fork, Override) {
    KernelState s(100);
    const Pid init = s.add_process(root_credential(), "init", 10);
    const auto r = sys_fork(s, init, app_credential(10050), 1);
    EXPECT_EQ(s.find_process(static_cast<Pid>(r.value))->cred.uid, 10050u);
}

TEST(Fork, NoParent) {
    KernelState s(100);
    EXPECT_EQ(sys_fork(s, 7, std::nullopt).error, SysError::NoEnt);
}

TEST(Fork, CapacityBreachReboots) {
    KernelState s(100);
    const Pid init = s.add_process(root_credential(), "init", 99);
    s.mark_baseline();
    const auto r = sys_fork(s, init, std::nullopt, 2);
    EXPECT_EQ(r.error, SysError::NoMemReboot);
    EXPECT_EQ(s.reboot_count(), 1);
    EXPECT_EQ(s.memory_used(), 99);
    // Exactly filling capacity is fine.
    EXPECT_TRUE(sys_fork(s, init, std::nullopt, 1).ok());
    EXPECT_EQ(s.memory_used(), 100);
}

TEST(Kill, Rules) {
    KernelState s(100);
    const Pid init = s.add_process(root_credential(), "init", 1);
    const Pid mine = s.add_process(app_credential(10050), "a", 1, init);
    const Pid theirs = s.add_process(app_credential(10051), "b", 1, init);
    EXPECT_EQ(sys_kill(s, app_credential(10050), theirs).error, SysError::Perm);
    EXPECT_TRUE(sys_kill(s, app_credential(10050), mine).ok());
    EXPECT_EQ(s.find_process(mine), nullptr);
    EXPECT_TRUE(sys_kill(s, root_credential(), theirs).ok());
    EXPECT_EQ(sys_kill(s, root_credential(), 99).error, SysError::NoEnt);
    EXPECT_EQ(s.memory_used(), 1);
}

TEST(Socket, SendRespectsDac) {
    KernelState s = standard_kernel();
    const Credential mal = app_credential(10050);
    EXPECT_TRUE(socket_send(s, mal, "zygote", "fork").ok());
    EXPECT_EQ(s.find_socket("zygote")->queue.size(), 1u);
    EXPECT_EQ(s.find_socket("zygote")->queue.front().sender, mal);

    KernelState p = standard_kernel(256, 10, patched_zygote_perm());
    EXPECT_EQ(socket_send(p, mal, "zygote", "fork").error, SysError::Access);
    EXPECT_TRUE(p.find_socket("zygote")->queue.empty());
    EXPECT_TRUE(socket_send(p, system_server_credential(), "zygote", "fork").ok());
    EXPECT_TRUE(socket_send(p, root_credential(), "zygote", "fork").ok());
    EXPECT_EQ(socket_send(p, mal, "nope", "x").error, SysError::NoEnt);
}

// Every non-root credential outside group 1000 is refused by the patched
// socket; every credential in group 1000 gets through.
TEST(Socket, PatchCredentialGrid) {
    const std::vector<Uid> uids = {1, 999, 1000, 1001, 2000, 10000, 10050, 99999};
    const std::vector<Gid> gids = {0, 1, 999, 1000, 1001, 10000, 10050};
    for (Uid uid : uids) {
        for (Gid gid : gids) {
            for (bool supp : {false, true}) {
                KernelState s = standard_kernel(256, 10, patched_zygote_perm());
                Credential c{uid, gid, {}, {}};
                if (supp) c.supplementary_groups.insert(1000);
                const bool in_system_group = gid == 1000 || supp;
                const SysOutcome r = socket_send(s, c, "zygote", "x");
                if (in_system_group) {
                    EXPECT_TRUE(r.ok()) << uid << "/" << gid;
                } else {
                    EXPECT_EQ(r.error, SysError::Access) << uid << "/" << gid;
                }
            }
        }
    }
}

TEST(Reboot, RestoresBaseline) {
    KernelState s = standard_kernel();
    const auto before = snapshot(s);
    for (int i = 0; i < 50; ++i) sys_fork(s, pids::kZygote, app_credential(10050));
    socket_send(s, root_credential(), "zygote", "x");
    EXPECT_EQ(s.process_count(), 53u);
    reboot(s);
    EXPECT_EQ(s.process_count(), 3u);
    EXPECT_EQ(s.reboot_count(), 1);
    auto after = snapshot(s);
    after["reboot_count"] = 0;
    EXPECT_EQ(after, before);
}

TEST(Reboot, CleanStateIdempotent) {
    KernelState s = standard_kernel();
    auto a = snapshot(s);
    reboot(s);
    auto b = snapshot(s);
    EXPECT_EQ(b["reboot_count"], 1);
    b["reboot_count"] = a["reboot_count"];
    EXPECT_EQ(a, b);
}

TEST(Reboot, HooksRunAfterReset) {
    KernelState s = standard_kernel();
    std::vector<std::size_t> seen;
    s.boot_hooks.push_back([&](KernelState& k) { seen.push_back(k.process_count()); });
    sys_fork(s, pids::kZygote, std::nullopt);
    reboot(s);
    ASSERT_EQ(seen.size(), 1u);
    EXPECT_EQ(seen[0], 3u);
}

TEST(Reboot, ThresholdHalts) {
    KernelState s(20);
    s.add_process(root_credential(), "init", 10);
    s.mark_baseline();
    s.boot_loop_threshold = 3;
    // Hook that exhausts memory on every boot.
    s.boot_hooks.push_back([](KernelState& k) {
        while (!k.halted() && sys_fork(k, 1, std::nullopt, 5).ok()) {
        }
    });
    s.boot();
    EXPECT_TRUE(s.halted());
    EXPECT_EQ(s.reboot_count(), 3);
}

TEST(Reboot, NestingCappedWithoutThreshold) {
    KernelState s(20);
    s.add_process(root_credential(), "init", 10);
    s.mark_baseline();
    s.boot_hooks.push_back([](KernelState& k) {
        while (!k.halted() && sys_fork(k, 1, std::nullopt, 5).ok()) {
        }
    });
    s.boot();
    EXPECT_TRUE(s.halted());
    EXPECT_EQ(s.reboot_count(), KernelState::kMaxNestedBoots);
}

TEST(Dispatch, Examples) {
    KernelState s = standard_kernel();
    const Credential app = app_credential(10050);
    EXPECT_TRUE(dispatch_syscall(s, app, "getpid", {}).ok());
    EXPECT_EQ(dispatch_syscall(s, app, "bind", {"zygote"}).error, SysError::AddrInUse);
    EXPECT_EQ(dispatch_syscall(s, app, "sendto", {"vold", "x"}).error, SysError::IsConn);
    EXPECT_EQ(dispatch_syscall(s, app, "kill", {3}).error, SysError::Perm);
    EXPECT_EQ(dispatch_syscall(s, app, "kill", {"self"}).error, SysError::NoEnt);
    EXPECT_TRUE(dispatch_syscall(s, app, "bind", {"fresh"}).ok());
    EXPECT_EQ(dispatch_syscall(s, app, "bind", {nlohmann::json{{"socket", "fresh"}}}).error,
              SysError::AddrInUse);
    EXPECT_TRUE(dispatch_syscall(s, app, "sendto", {"fresh", "hi"}).ok());
    try {
        dispatch_syscall(s, app, "ptrace", {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownSyscall);
    }
}

TEST(Dispatch, StatelessCallsAlwaysSucceed) {
    for (const auto& name : kReplayableSyscalls) {
        if (name == "bind" || name == "kill" || name == "sendto") continue;
        KernelState s = standard_kernel();
        const auto before = snapshot(s);
        EXPECT_TRUE(dispatch_syscall(s, app_credential(10050), name, {1, "x"}).ok()) << name;
        EXPECT_EQ(snapshot(s), before) << name;
    }
}

// Random operation sequences keep memory_used equal to the sum of costs.
TEST(Property, MemoryConservation) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        KernelState s = standard_kernel(64, 10);
        for (int step = 0; step < 100; ++step) {
            const auto& procs = s.processes();
            std::vector<Pid> live;
            for (const auto& [pid, p] : procs) live.push_back(pid);
            if (live.empty()) break;
            const Pid pick = live[rng() % live.size()];
            switch (rng() % 4) {
                case 0:
                case 1:
                    sys_fork(s, pick, std::nullopt, 1 + static_cast<std::int64_t>(rng() % 4));
                    break;
                case 2: sys_kill(s, rng() % 2 ? root_credential() : app_credential(10050), pick); break;
                default: dispatch_syscall(s, app_credential(10050), "kill", {pick}); break;
            }
            ASSERT_EQ(s.memory_used(), recomputed_memory(s));
            ASSERT_LE(s.memory_used(), s.memory_capacity());
        }
    }
}

TEST(StandardImage, Layout) {
    const KernelState s = standard_kernel(256, 10);
    EXPECT_EQ(s.process_count(), 3u);
    EXPECT_EQ(s.memory_used(), 10);
    EXPECT_EQ(s.find_process(pids::kZygote)->thread_name, "zygote");
    EXPECT_EQ(s.find_process(pids::kSystemServer)->cred.uid, kSystemUid);
    EXPECT_EQ(s.find_socket("zygote")->perm, FileMode(0, 0, 0666));
    EXPECT_TRUE(s.find_socket("vold")->connected_peer.has_value());
    EXPECT_THROW(standard_kernel(10, 11), Error);
    EXPECT_THROW(standard_kernel(10, 2), Error);
}

TEST(Json, SnapshotSortedAndStable) {
    KernelState s = standard_kernel();
    sys_fork(s, pids::kZygote, app_credential(10050));
    const auto j = snapshot(s);
    Pid last = 0;
    for (const auto& p : j["processes"]) {
        EXPECT_GT(p["pid"].get<Pid>(), last);
        last = p["pid"].get<Pid>();
    }
    EXPECT_EQ(j.dump(), snapshot(s).dump());
    EXPECT_EQ(j["sockets"][1]["perm"]["mode"], "666");
    EXPECT_EQ(file_mode_from_json(j["sockets"][1]["perm"]), FileMode(0, 0, 0666));
}
