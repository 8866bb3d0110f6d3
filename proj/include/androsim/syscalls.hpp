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
#include <array>
#include <string_view>

namespace androsim {

// The syscalls intercepted from Application Framework services and
// replayable through the kernel dispatcher. Sorted.
inline constexpr std::array<std::string_view, 21> kReplayableSyscalls = {
    "bind",  "close",  "connect", "exit",     "exit_group", "getpid",   "gettid",
    "ioctl", "kill",   "lseek",   "lstat64",  "mkdir",      "open",     "prctl",
    "read",  "recvfrom", "recvmsg", "sendmsg", "sendto",    "socket",   "write",
};

inline bool is_replayable_syscall(std::string_view name) {
    return std::binary_search(kReplayableSyscalls.begin(), kReplayableSyscalls.end(), name);
}

// Names accepted in a sys() call: the replayable set plus fork, which only
// the Zygote library issues and which is routed through sys_fork.
inline bool is_modeled_syscall(std::string_view name) {
    return name == "fork" || is_replayable_syscall(name);
}

}  // namespace androsim
