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

// Syscall trace ingestion and replay.
//
// Trace grammar, one record per line:
//
//   mkm tname=<token> pid=<uint> call=<token> args=<JSON array>
//
// A token is either a run of non-blank characters or a JSON string literal
// (needed for thread names with spaces, e.g. tname="Alarm Manager"). Blank
// lines and lines starting with '#' are ignored.

#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "androsim/core_model.hpp"
#include "androsim/kernel_sim.hpp"

namespace androsim {

struct TraceRecord {
    std::string thread_name;
    Pid pid = 0;
    std::string syscall;
    std::vector<Payload> args;

    // Unknown names are kept so replay can report them.
    bool supported() const { return is_replayable_syscall(syscall); }
    bool operator==(const TraceRecord&) const = default;
};

namespace detail {

class LineCursor {
  public:
    LineCursor(std::string_view text, std::size_t line) : text_(text), line_(line) {}

    std::size_t column() const { return pos_ + 1; }
    bool at_end() const { return pos_ >= text_.size(); }

    [[noreturn]] void fail(std::string expected) const {
        throw ParseError(line_, column(), std::move(expected));
    }

    void skip_blanks() {
        while (!at_end() && is_blank(text_[pos_])) ++pos_;
    }

    void require_blanks(const char* before) {
        if (at_end() || !is_blank(text_[pos_])) fail(std::string("whitespace before ") + before);
        skip_blanks();
    }

    void expect(std::string_view literal) {
        if (text_.substr(pos_, literal.size()) != literal) fail("'" + std::string(literal) + "'");
        pos_ += literal.size();
    }

    std::string token(bool allow_empty, const char* what) {
        if (!at_end() && text_[pos_] == '"') return quoted(what);
        const std::size_t start = pos_;
        while (!at_end() && !is_blank(text_[pos_])) ++pos_;
        if (pos_ == start && !allow_empty) fail(what);
        return std::string(text_.substr(start, pos_ - start));
    }

    std::uint64_t unsigned_number(const char* what) {
        const std::size_t start = pos_;
        std::uint64_t value = 0;
        while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            value = value * 10 + static_cast<std::uint64_t>(text_[pos_] - '0');
            if (value > 0xffffffffULL) {
                pos_ = start;
                fail(what);
            }
            ++pos_;
        }
        if (pos_ == start || (!at_end() && !is_blank(text_[pos_]))) {
            pos_ = start;
            fail(what);
        }
        return value;
    }

    nlohmann::json json_array_rest() {
        const std::size_t start = pos_;
        nlohmann::json value =
            nlohmann::json::parse(text_.substr(pos_), nullptr, /*allow_exceptions=*/false);
        if (value.is_discarded() || !value.is_array()) {
            pos_ = start;
            fail("JSON array of args");
        }
        pos_ = text_.size();
        return value;
    }

  private:
    static bool is_blank(char ch) { return ch == ' ' || ch == '\t'; }

    std::string quoted(const char* what) {
        const std::size_t start = pos_;
        std::size_t i = pos_ + 1;
        while (i < text_.size() && text_[i] != '"') i += (text_[i] == '\\') ? 2 : 1;
        if (i >= text_.size()) fail(std::string("closing quote for ") + what);
        const auto value =
            nlohmann::json::parse(text_.substr(start, i + 1 - start), nullptr, false);
        if (value.is_discarded() || !value.is_string()) fail(what);
        pos_ = i + 1;
        return value.get<std::string>();
    }

    std::string_view text_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

inline bool needs_quoting(std::string_view token) {
    if (token.empty() || token.front() == '"') return true;
    return std::any_of(token.begin(), token.end(), [](char ch) {
        return std::isspace(static_cast<unsigned char>(ch)) || std::iscntrl(static_cast<unsigned char>(ch));
    });
}

inline std::string render_token(const std::string& token) {
    return needs_quoting(token) ? nlohmann::json(token).dump() : token;
}

}  // namespace detail

inline TraceRecord parse_trace_line(std::string_view text, std::size_t line) {
    detail::LineCursor cur(text, line);
    cur.skip_blanks();
    cur.expect("mkm");
    cur.require_blanks("tname");
    TraceRecord rec;
    cur.expect("tname=");
    rec.thread_name = cur.token(true, "thread name");
    cur.require_blanks("pid");
    cur.expect("pid=");
    const std::size_t pid_column = cur.column();
    const auto pid = cur.unsigned_number("unsigned integer pid");
    if (pid == 0) throw ParseError(line, pid_column, "positive pid");
    rec.pid = static_cast<Pid>(pid);
    cur.require_blanks("call");
    cur.expect("call=");
    rec.syscall = cur.token(false, "syscall name");
    cur.require_blanks("args");
    cur.expect("args=");
    rec.args = cur.json_array_rest().get<std::vector<Payload>>();
    return rec;
}

inline std::vector<TraceRecord> parse_trace(std::string_view text) {
    std::vector<TraceRecord> records;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string_view::npos && line[first] != '#') {
            records.push_back(parse_trace_line(line, line_no));
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return records;
}

inline std::vector<TraceRecord> parse_trace(std::istream& in) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str());
}

// Inverse of parse_trace.
inline std::string render_trace(const std::vector<TraceRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += "mkm tname=" + detail::render_token(r.thread_name) + " pid=" + std::to_string(r.pid) +
               " call=" + detail::render_token(r.syscall) + " args=" + nlohmann::json(r.args).dump() +
               "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Profiles

// Thread (service) name to the distinct syscalls it issued.
using ServiceProfile = std::map<std::string, std::set<std::string>>;

inline ServiceProfile service_syscall_profile(const std::vector<TraceRecord>& records) {
    ServiceProfile profile;
    for (const auto& r : records) profile[r.thread_name].insert(r.syscall);
    return profile;
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayFailure {
    std::string syscall;
    std::string code;
    std::string reason;
    bool operator==(const ReplayFailure&) const = default;
};

struct ReplayReport {
    std::size_t total = 0;
    std::size_t succeeded = 0;
    std::vector<ReplayFailure> failed;

    // An empty replay counts as fully successful.
    double success_ratio() const {
        return total == 0 ? 1.0 : static_cast<double>(succeeded) / static_cast<double>(total);
    }
    std::string success_fraction() const {
        if (total == 0) return "1/1";
        const auto g = std::gcd(succeeded, total);
        return std::to_string(succeeded / g) + "/" + std::to_string(total / g);
    }
};

inline std::string failure_reason(std::string_view syscall, SysError error) {
    switch (error) {
        case SysError::AddrInUse: return "targeted socket is already bound";
        case SysError::Perm:
            return syscall == "kill" ? "cannot kill another user's process" : "operation not permitted";
        case SysError::IsConn: return "another endpoint is already connected";
        case SysError::NoEnt: return "no such process or socket";
        case SysError::Access: return "permission denied";
        case SysError::NoMemReboot: return "memory exhausted, device rebooted";
    }
    return "?";
}

inline constexpr std::string_view kUnsupportedCode = "ENOSYS";
inline constexpr std::string_view kUnsupportedReason = "unsupported";

// Re-issues every recorded syscall under an unprivileged application
// credential, the way a tester app would from layer A.
inline ReplayReport replay_as(KernelState& state, const Credential& caller,
                              const std::vector<TraceRecord>& records) {
    if (caller.uid == kRootUid || caller.uid == kSystemUid) {
        throw Error(ErrorCode::InvalidArgument, "replay needs a non-root, non-system credential");
    }
    ReplayReport report;
    for (const auto& r : records) {
        ++report.total;
        if (!r.supported()) {
            report.failed.push_back(
                {r.syscall, std::string(kUnsupportedCode), std::string(kUnsupportedReason)});
            continue;
        }
        const SysOutcome outcome = dispatch_syscall(state, caller, r.syscall, r.args);
        if (outcome.ok()) {
            ++report.succeeded;
        } else {
            report.failed.push_back({r.syscall, std::string(to_string(*outcome.error)),
                                     failure_reason(r.syscall, *outcome.error)});
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const TraceRecord& r) {
    j = {{"thread_name", r.thread_name}, {"pid", r.pid}, {"syscall", r.syscall}, {"args", r.args}};
}

inline nlohmann::json profile_to_json(const ServiceProfile& profile) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [service, calls] : profile) j[service] = calls;
    return j;
}

inline void to_json(nlohmann::json& j, const ReplayFailure& f) {
    j = {{"syscall", f.syscall}, {"code", f.code}, {"reason", f.reason}};
}

inline void to_json(nlohmann::json& j, const ReplayReport& r) {
    j = {{"total", r.total},
         {"succeeded", r.succeeded},
         {"failed", r.failed},
         {"success_ratio", r.success_ratio()},
         {"success_fraction", r.success_fraction()}};
}

}  // namespace androsim
