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

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "androsim/trace_replay.hpp"
#include "test_support.hpp"

using namespace androsim;
using androsim::test::fixture_path;
using androsim::test::slurp;

namespace {

using Set = std::set<std::string>;

// Syscalls observed per AF service on the instrumented device.
const ServiceProfile& observed_table() {
    static const ServiceProfile table = {
        {"Alarm Manager", Set{"getpid", "ioctl", "open"}},
        {"Activity Manager",
         Set{"close", "getpid", "gettid", "ioctl", "lseek", "mkdir", "open", "prctl", "read", "write"}},
        {"BatteryStats", Set{"close", "exit", "gettid", "open"}},
        {"GpsLocationProvider", Set{"getpid", "ioctl"}},
        {"Location Manager Service", Set{"getpid", "ioctl", "lseek", "open", "read"}},
        {"Package Manager",
         Set{"close", "getpid", "gettid", "ioctl", "lstat64", "open", "sendmsg", "write"}},
        {"Power Manager Service", Set{"getpid", "ioctl", "open", "read", "write"}},
        {"ServerThread", Set{"close", "connect", "getpid", "gettid", "ioctl", "lseek", "lstat64", "open",
                             "prctl", "read", "recvmsg", "sendmsg", "sendto", "socket", "write"}},
        {"ThrottleService", Set{"close", "exit_group", "getpid", "gettid", "ioctl", "open", "prctl", "read",
                                "sendmsg", "write"}},
        {"VoldConnector", Set{"getpid", "gettid", "ioctl", "open", "recvmsg", "write"}},
        {"Window Manager", Set{"close", "getpid", "gettid", "ioctl", "open", "read", "write"}},
    };
    return table;
}

std::size_t parse_error_column(std::string_view text) {
    try {
        parse_trace(text);
    } catch (const ParseError& e) {
        return e.column();
    }
    return 0;
}

}  // namespace

TEST(Parse, Example) {
    const auto r = parse_trace("mkm tname=\"Alarm Manager\" pid=412 call=getpid args=[]\n");
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0], (TraceRecord{"Alarm Manager", 412, "getpid", {}}));
    const auto s = parse_trace("mkm tname=VoldConnector pid=9 call=sendto args=[\"vold\", 3]");
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].thread_name, "VoldConnector");
    EXPECT_EQ(s[0].args, (std::vector<Payload>{"vold", 3}));
}

TEST(Parse, EmptyAndComments) {
    EXPECT_TRUE(parse_trace("").empty());
    EXPECT_TRUE(parse_trace("\n\n# comment\n   \n").empty());
}

TEST(Parse, ErrorsCarryPosition) {
    try {
        parse_trace("mkm tname= pid=x call=a args=[]");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
        EXPECT_EQ(e.column(), 16u);
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
    EXPECT_EQ(parse_error_column("mkm tname=a pid=0 call=a args=[]"), 17u);
    EXPECT_GT(parse_error_column("mkm tname=a pid=1 call= args=[]"), 0u);
    EXPECT_GT(parse_error_column("mkm tname=a pid=1 call=a args=[1"), 0u);
    EXPECT_GT(parse_error_column("mkm tname=a pid=1 call=a args={}"), 0u);
    EXPECT_GT(parse_error_column("xyz tname=a pid=1 call=a args=[]"), 0u);
    try {
        parse_trace("mkm tname=a pid=1 call=a args=[]\nbogus\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Property, RenderParseRoundTrip) {
    std::mt19937 rng(11);
    const std::vector<std::string> names = {"Alarm Manager", "x", "", "a\"b", "tab\there", "ünï"};
    const std::vector<std::string> calls = {"open", "ioctl", "weird_call", "sendto"};
    for (int i = 0; i < 500; ++i) {
        std::vector<TraceRecord> records;
        const int n = static_cast<int>(rng() % 6);
        for (int k = 0; k < n; ++k) {
            TraceRecord r;
            r.thread_name = names[rng() % names.size()];
            r.pid = 1 + rng() % 60000;
            r.syscall = calls[rng() % calls.size()];
            if (rng() % 2) r.args.push_back(static_cast<int>(rng() % 100));
            if (rng() % 2) r.args.push_back("s p\"ace");
            records.push_back(std::move(r));
        }
        ASSERT_EQ(parse_trace(render_trace(records)), records);
    }
}

TEST(Profile, MatchesObservedTable) {
    const auto records = parse_trace(slurp(fixture_path("table1_trace.log")));
    const ServiceProfile profile = service_syscall_profile(records);
    EXPECT_EQ(profile, observed_table());
    EXPECT_EQ(profile.size(), 11u);
    EXPECT_EQ(profile.count("Audio Service"), 0u);
}

TEST(Property, ProfileOrderIndependent) {
    auto records = parse_trace(slurp(fixture_path("table1_trace.log")));
    const ServiceProfile expected = service_syscall_profile(records);
    std::mt19937 rng(3);
    for (int i = 0; i < 50; ++i) {
        std::shuffle(records.begin(), records.end(), rng);
        ASSERT_EQ(service_syscall_profile(records), expected);
    }
    auto doubled = records;
    doubled.insert(doubled.end(), records.begin(), records.end());
    EXPECT_EQ(service_syscall_profile(doubled), expected);
}

TEST(Replay, TwentyOneCalls) {
    const auto records = parse_trace(slurp(fixture_path("syscalls21.log")));
    ASSERT_EQ(records.size(), 21u);
    KernelState state = standard_kernel();
    const ReplayReport r = replay_as(state, app_credential(10050), records);
    EXPECT_EQ(r.total, 21u);
    EXPECT_EQ(r.succeeded, 18u);
    EXPECT_NEAR(r.success_ratio(), 18.0 / 21.0, 1e-12);
    EXPECT_GE(r.success_ratio(), 0.85);
    EXPECT_EQ(r.success_fraction(), "6/7");
    ASSERT_EQ(r.failed.size(), 3u);
    EXPECT_EQ(r.failed[0], (ReplayFailure{"bind", "EADDRINUSE", "targeted socket is already bound"}));
    EXPECT_EQ(r.failed[1], (ReplayFailure{"kill", "EPERM", "cannot kill another user's process"}));
    EXPECT_EQ(r.failed[2], (ReplayFailure{"sendto", "EISCONN", "another endpoint is already connected"}));
}

TEST(Replay, FiftyRepetitions) {
    const auto records = parse_trace(slurp(fixture_path("getpid50.log")));
    KernelState state = standard_kernel();
    const ReplayReport r = replay_as(state, app_credential(10050), records);
    EXPECT_EQ(r.total, 50u);
    EXPECT_EQ(r.succeeded, 50u);
}

TEST(Replay, RepeatedRunsStable) {
    const auto records = parse_trace(slurp(fixture_path("syscalls21.log")));
    KernelState state = standard_kernel();
    for (int i = 0; i < 50; ++i) {
        const ReplayReport r = replay_as(state, app_credential(10050), records);
        ASSERT_EQ(r.succeeded, 18u);
    }
}

TEST(Replay, EmptyIsFullSuccess) {
    KernelState state = standard_kernel();
    const ReplayReport r = replay_as(state, app_credential(10050), {});
    EXPECT_EQ(r.total, 0u);
    EXPECT_EQ(r.success_ratio(), 1.0);
}

TEST(Replay, PrivilegedCallerRejected) {
    KernelState state = standard_kernel();
    for (const Credential& c : {root_credential(), system_server_credential()}) {
        try {
            replay_as(state, c, {});
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
        }
    }
}

TEST(Replay, UnsupportedIsReported) {
    KernelState state = standard_kernel();
    const ReplayReport r = replay_as(state, app_credential(10050), {{"t", 5, "ptrace", {}}});
    EXPECT_EQ(r.succeeded, 0u);
    ASSERT_EQ(r.failed.size(), 1u);
    EXPECT_EQ(r.failed[0].code, "ENOSYS");
    EXPECT_EQ(r.failed[0].reason, "unsupported");
}

TEST(Json, ReportShape) {
    const auto records = parse_trace(slurp(fixture_path("syscalls21.log")));
    KernelState state = standard_kernel();
    const nlohmann::json j = replay_as(state, app_credential(10050), records);
    EXPECT_EQ(j["total"], 21);
    EXPECT_EQ(j["succeeded"], 18);
    EXPECT_EQ(j["failed"].size(), 3u);
    const nlohmann::json p = profile_to_json(observed_table());
    EXPECT_EQ(p["Alarm Manager"], (nlohmann::json{"getpid", "ioctl", "open"}));
}
