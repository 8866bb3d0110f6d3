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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace androsim {

enum class ErrorCode {
    EmptyFlow,
    DanglingParent,
    DuplicateTemplate,
    DuplicateApp,
    DuplicateComponent,
    InstallAborted,
    UnknownSyscall,
    UnknownClass,
    UnknownCapability,
    OutcomeAlreadySet,
    ParseError,
    InvalidArgument,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyFlow: return "EmptyFlow";
        case ErrorCode::DanglingParent: return "DanglingParent";
        case ErrorCode::DuplicateTemplate: return "DuplicateTemplate";
        case ErrorCode::DuplicateApp: return "DuplicateApp";
        case ErrorCode::DuplicateComponent: return "DuplicateComponent";
        case ErrorCode::InstallAborted: return "InstallAborted";
        case ErrorCode::UnknownSyscall: return "UnknownSyscall";
        case ErrorCode::UnknownClass: return "UnknownClass";
        case ErrorCode::UnknownCapability: return "UnknownCapability";
        case ErrorCode::OutcomeAlreadySet: return "OutcomeAlreadySet";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "?";
}

// Base of every exception thrown by the library. Expected simulation
// outcomes (denials, syscall errors) are values, not exceptions.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

class ParseError : public Error {
  public:
    ParseError(std::size_t line, std::size_t column, std::string expected)
        : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " +
                                           std::to_string(column) + ": expected " + expected),
          line_(line),
          column_(column),
          expected_(std::move(expected)) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& expected() const noexcept { return expected_; }

  private:
    std::size_t line_;
    std::size_t column_;
    std::string expected_;
};

}  // namespace androsim
