// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <charconv>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "horizon/errors.hpp"

namespace horizon {

/// Runtime value of a rule operand or a context attribute.
/// Null only arises from missing optional lookups, never from literals.
class Value {
public:
    using List = std::vector<std::string>;
    using Map = std::map<std::string, Value>;
    using Storage = std::variant<std::monostate, bool, double, std::string, List, Map>;

    Value() = default;
    Value(bool b) : v_(b) {}
    Value(double d) : v_(d) {}
    Value(int d) : v_(static_cast<double>(d)) {}
    Value(const char* s) : v_(std::string(s)) {}
    Value(std::string s) : v_(std::move(s)) {}
    Value(List l) : v_(std::move(l)) {}
    Value(Map m) : v_(std::move(m)) {}

    bool is_null() const { return std::holds_alternative<std::monostate>(v_); }
    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_number() const { return std::holds_alternative<double>(v_); }
    bool is_string() const { return std::holds_alternative<std::string>(v_); }
    bool is_list() const { return std::holds_alternative<List>(v_); }
    bool is_map() const { return std::holds_alternative<Map>(v_); }

    bool as_bool() const { return std::get<bool>(v_); }
    double as_number() const { return std::get<double>(v_); }
    const std::string& as_string() const { return std::get<std::string>(v_); }
    const List& as_list() const { return std::get<List>(v_); }
    const Map& as_map() const { return std::get<Map>(v_); }

    const Storage& storage() const { return v_; }

    friend bool operator==(const Value& a, const Value& b) { return a.v_ == b.v_; }
    friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

    const char* type_name() const {
        switch (v_.index()) {
        case 0: return "null";
        case 1: return "boolean";
        case 2: return "number";
        case 3: return "string";
        case 4: return "list<string>";
        case 5: return "map";
        }
        return "?";
    }

    nlohmann::json to_json() const {
        switch (v_.index()) {
        case 0: return nullptr;
        case 1: return as_bool();
        case 2: return as_number();
        case 3: return as_string();
        case 4: return as_list();
        case 5: {
            nlohmann::json o = nlohmann::json::object();
            for (const auto& [k, val] : as_map()) o[k] = val.to_json();
            return o;
        }
        }
        return nullptr;
    }

private:
    Storage v_;
};

/// Renders a number the way the DSL writes literals: integers without a
/// fractional part, everything else in shortest round-trip form.
inline std::string format_number(double d) {
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 1e15) {
        char buf[32];
        auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), static_cast<long long>(d));
        return std::string(buf, p);
    }
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    return std::string(buf, p);
}

} // namespace horizon
