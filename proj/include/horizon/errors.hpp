// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace horizon {

enum class Errc {
    // document / model errors
    SyntaxError,
    SchemaError,
    SemanticError,
    InvalidSubscription,
    // expression errors
    TypeError,
    UnknownAttribute,
    MissingAttribute,
    RegexError,
    ExpressionError,
    // store errors
    NotFound,
    DanglingReference,
    CycleError,
    DependencyViolation,
    ConsistencyError,
    RevisionMismatch,
    IoError,
    // compiler / watcher errors
    SchemaConflict,
    ConflictError,
    WatchError,
    // evaluation errors
    UnknownFeature,
    // service errors
    BindError,
    ConfigError,
    SignatureInvalid,
    TokenExpired,
    Unauthorized,
    // scorecard errors
    IncompleteAssessment,
    ProbeFailure,
};

// SCREAMING_SNAKE code used in API error bodies and CLI diagnostics.
constexpr std::string_view errc_name(Errc c) {
    switch (c) {
    case Errc::SyntaxError: return "SYNTAX_ERROR";
    case Errc::SchemaError: return "SCHEMA_ERROR";
    case Errc::SemanticError: return "SEMANTIC_ERROR";
    case Errc::InvalidSubscription: return "INVALID_SUBSCRIPTION";
    case Errc::TypeError: return "TYPE_ERROR";
    case Errc::UnknownAttribute: return "UNKNOWN_ATTRIBUTE";
    case Errc::MissingAttribute: return "MISSING_ATTRIBUTE";
    case Errc::RegexError: return "REGEX_ERROR";
    case Errc::ExpressionError: return "EXPRESSION_ERROR";
    case Errc::NotFound: return "NOT_FOUND";
    case Errc::DanglingReference: return "DANGLING_REFERENCE";
    case Errc::CycleError: return "CYCLE_ERROR";
    case Errc::DependencyViolation: return "DEPENDENCY_VIOLATION";
    case Errc::ConsistencyError: return "CONSISTENCY_ERROR";
    case Errc::RevisionMismatch: return "REVISION_MISMATCH";
    case Errc::IoError: return "IO_ERROR";
    case Errc::SchemaConflict: return "SCHEMA_CONFLICT";
    case Errc::ConflictError: return "CONFLICT_ERROR";
    case Errc::WatchError: return "WATCH_ERROR";
    case Errc::UnknownFeature: return "UNKNOWN_FEATURE";
    case Errc::BindError: return "BIND_ERROR";
    case Errc::ConfigError: return "CONFIG_ERROR";
    case Errc::SignatureInvalid: return "SIGNATURE_INVALID";
    case Errc::TokenExpired: return "TOKEN_EXPIRED";
    case Errc::Unauthorized: return "UNAUTHORIZED";
    case Errc::IncompleteAssessment: return "INCOMPLETE_ASSESSMENT";
    case Errc::ProbeFailure: return "PROBE_FAILURE";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message, std::string detail = {})
        : std::runtime_error(std::string(errc_name(code)) + ": " + message),
          code_(code), message_(std::move(message)), detail_(std::move(detail)) {}

    Errc code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string message_;
    std::string detail_;
};

} // namespace horizon
