// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0
//
// Pricing data model: plans, add-ons, features, usage limits. Parses the
// YAML pricing document (strict: unknown keys are errors), computes the
// configuration space, and resolves subscriptions into entitlement maps.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "horizon/errors.hpp"
#include "horizon/expression.hpp"

namespace horizon {

enum class FeatureKind { functional, extraFunctional };

struct FeatureDef {
    std::string name;
    FeatureKind kind = FeatureKind::functional;
    std::string description;
    friend bool operator==(const FeatureDef&, const FeatureDef&) = default;
};

struct UsageLimitDef {
    std::string name;
    std::string feature;          // the feature this limit caps
    std::string unit;             // e.g. "assistants", "minutes"
    std::string contextAttribute; // runtime attribute compared against the limit
    friend bool operator==(const UsageLimitDef&, const UsageLimitDef&) = default;
};

struct Plan {
    std::string name;
    std::optional<double> price;
    std::map<std::string, bool> featureValues;
    std::map<std::string, double> usageLimitValues;
    friend bool operator==(const Plan&, const Plan&) = default;
};

struct AddOn {
    std::string name;
    std::optional<double> price;
    std::set<std::string> availableFor;
    std::map<std::string, bool> featureValues;
    std::map<std::string, double> usageLimitExtensions;
    friend bool operator==(const AddOn&, const AddOn&) = default;
};

struct PricingModel {
    std::string name;
    std::string version;
    std::vector<Plan> plans;
    std::vector<AddOn> addOns;
    std::vector<FeatureDef> features;
    std::vector<UsageLimitDef> usageLimits;

    friend bool operator==(const PricingModel&, const PricingModel&) = default;

    const Plan* find_plan(const std::string& n) const {
        for (const auto& p : plans)
            if (p.name == n) return &p;
        return nullptr;
    }
    const AddOn* find_add_on(const std::string& n) const {
        for (const auto& a : addOns)
            if (a.name == n) return &a;
        return nullptr;
    }
    const FeatureDef* find_feature(const std::string& n) const {
        for (const auto& f : features)
            if (f.name == n) return &f;
        return nullptr;
    }
};

struct Subscription {
    std::string plan;
    std::set<std::string> addOns;
    friend bool operator==(const Subscription&, const Subscription&) = default;
};

struct EntitlementMap {
    std::map<std::string, bool> features;
    std::map<std::string, double> limits;
    std::string pricingVersion;
    friend bool operator==(const EntitlementMap&, const EntitlementMap&) = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
inline void check_unique_names(const std::vector<T>& items, const char* what) {
    std::set<std::string> seen;
    for (const auto& it : items)
        if (!seen.insert(it.name).second)
            throw Error(Errc::SemanticError,
                        std::string("duplicate ") + what + " name '" + it.name + "'");
}

} // namespace detail

/// Enforces every PricingModel invariant; throws Error{SemanticError} naming
/// the offending entity.
inline void validate_pricing(const PricingModel& m) {
    detail::check_unique_names(m.plans, "plan");
    detail::check_unique_names(m.addOns, "add-on");
    detail::check_unique_names(m.features, "feature");
    detail::check_unique_names(m.usageLimits, "usage limit");

    if (m.plans.empty())
        throw Error(Errc::SemanticError, "pricing '" + m.name + "' declares no plans");

    auto check_price = [](const std::optional<double>& p, const std::string& owner) {
        if (p && (!(std::isfinite(*p)) || *p < 0))
            throw Error(Errc::SemanticError, "price of '" + owner + "' must be non-negative");
    };
    auto check_limit_value = [](double v, const std::string& owner, const std::string& limit) {
        if (!std::isfinite(v) || v < 0)
            throw Error(Errc::SemanticError, "usage limit '" + limit + "' in '" + owner +
                                                 "' must be non-negative");
    };

    std::set<std::string> governed;
    for (const auto& p : m.plans) {
        check_price(p.price, p.name);
        for (const auto& [f, v] : p.featureValues) {
            if (!m.find_feature(f))
                throw Error(Errc::SemanticError,
                            "plan '" + p.name + "' references unknown feature '" + f + "'");
            governed.insert(f);
            (void)v;
        }
        for (const auto& [l, v] : p.usageLimitValues) {
            bool known = false;
            for (const auto& ul : m.usageLimits) known |= ul.name == l;
            if (!known)
                throw Error(Errc::SemanticError,
                            "plan '" + p.name + "' references unknown usage limit '" + l + "'");
            check_limit_value(v, p.name, l);
        }
    }
    for (const auto& a : m.addOns) {
        check_price(a.price, a.name);
        if (a.availableFor.empty())
            throw Error(Errc::SemanticError,
                        "add-on '" + a.name + "' must be available for at least one plan");
        for (const auto& pn : a.availableFor)
            if (!m.find_plan(pn))
                throw Error(Errc::SemanticError, "add-on '" + a.name +
                                                     "' lists unknown plan '" + pn +
                                                     "' in availableFor");
        for (const auto& [f, v] : a.featureValues) {
            if (!m.find_feature(f))
                throw Error(Errc::SemanticError,
                            "add-on '" + a.name + "' references unknown feature '" + f + "'");
            governed.insert(f);
            (void)v;
        }
        for (const auto& [l, v] : a.usageLimitExtensions) {
            bool known = false;
            for (const auto& ul : m.usageLimits) known |= ul.name == l;
            if (!known)
                throw Error(Errc::SemanticError,
                            "add-on '" + a.name + "' references unknown usage limit '" + l + "'");
            check_limit_value(v, a.name, l);
        }
    }
    for (const auto& f : m.features)
        if (!governed.count(f.name))
            throw Error(Errc::SemanticError, "feature '" + f.name +
                                                 "' is not governed by any plan or add-on");
    for (const auto& ul : m.usageLimits) {
        if (!m.find_feature(ul.feature))
            throw Error(Errc::SemanticError, "usage limit '" + ul.name +
                                                 "' references unknown feature '" + ul.feature + "'");
        if (!is_attribute_path(ul.contextAttribute))
            throw Error(Errc::SemanticError, "usage limit '" + ul.name +
                                                 "' has invalid contextAttribute '" +
                                                 ul.contextAttribute + "'");
    }
}

// ---------------------------------------------------------------------------
// YAML parsing (strict) and serialization
// ---------------------------------------------------------------------------

namespace detail {

inline void require_keys(const YAML::Node& node, const std::set<std::string>& required,
                         const std::set<std::string>& optional, const std::string& where) {
    if (!node.IsMap())
        throw Error(Errc::SchemaError, where + " must be a mapping");
    for (const auto& kv : node) {
        std::string key = kv.first.as<std::string>();
        if (!required.count(key) && !optional.count(key))
            throw Error(Errc::SchemaError, "unknown key '" + key + "' in " + where);
    }
    for (const auto& key : required)
        if (!node[key])
            throw Error(Errc::SchemaError, "missing key '" + key + "' in " + where);
}

template <typename T>
inline T scalar_as(const YAML::Node& node, const std::string& where) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw Error(Errc::SchemaError, "invalid value for " + where);
    }
}

inline std::map<std::string, bool> bool_map(const YAML::Node& node, const std::string& where) {
    std::map<std::string, bool> out;
    if (!node) return out;
    if (!node.IsMap()) throw Error(Errc::SchemaError, where + " must be a mapping");
    for (const auto& kv : node)
        out[kv.first.as<std::string>()] =
            scalar_as<bool>(kv.second, where + "." + kv.first.as<std::string>());
    return out;
}

inline std::map<std::string, double> number_map(const YAML::Node& node, const std::string& where) {
    std::map<std::string, double> out;
    if (!node) return out;
    if (!node.IsMap()) throw Error(Errc::SchemaError, where + " must be a mapping");
    for (const auto& kv : node)
        out[kv.first.as<std::string>()] =
            scalar_as<double>(kv.second, where + "." + kv.first.as<std::string>());
    return out;
}

} // namespace detail

/// Parses a pricing document. Throws SyntaxError (with line:column),
/// SchemaError (unknown/missing keys), or SemanticError (violated invariant).
inline PricingModel parse_pricing(const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(source);
    } catch (const YAML::ParserException& e) {
        throw Error(Errc::SyntaxError, std::to_string(e.mark.line + 1) + ":" +
                                           std::to_string(e.mark.column + 1) + ": " + e.msg);
    }
    using detail::require_keys;
    using detail::scalar_as;

    require_keys(root, {"saasName", "version", "plans"},
                 {"features", "usageLimits", "addOns"}, "pricing document");

    PricingModel m;
    m.name = scalar_as<std::string>(root["saasName"], "saasName");
    m.version = scalar_as<std::string>(root["version"], "version");

    if (root["features"]) {
        if (!root["features"].IsSequence())
            throw Error(Errc::SchemaError, "'features' must be a list");
        for (const auto& n : root["features"]) {
            require_keys(n, {"name", "kind"}, {"description"}, "feature entry");
            FeatureDef f;
            f.name = scalar_as<std::string>(n["name"], "feature.name");
            std::string kind = scalar_as<std::string>(n["kind"], "feature.kind");
            if (kind == "functional") f.kind = FeatureKind::functional;
            else if (kind == "extraFunctional") f.kind = FeatureKind::extraFunctional;
            else
                throw Error(Errc::SchemaError, "feature '" + f.name + "' has unknown kind '" +
                                                   kind + "' (functional|extraFunctional)");
            if (n["description"])
                f.description = scalar_as<std::string>(n["description"], "feature.description");
            m.features.push_back(std::move(f));
        }
    }

    if (root["usageLimits"]) {
        if (!root["usageLimits"].IsSequence())
            throw Error(Errc::SchemaError, "'usageLimits' must be a list");
        for (const auto& n : root["usageLimits"]) {
            require_keys(n, {"name", "feature", "unit", "contextAttribute"}, {}, "usage limit entry");
            UsageLimitDef ul;
            ul.name = scalar_as<std::string>(n["name"], "usageLimit.name");
            ul.feature = scalar_as<std::string>(n["feature"], "usageLimit.feature");
            ul.unit = scalar_as<std::string>(n["unit"], "usageLimit.unit");
            ul.contextAttribute =
                scalar_as<std::string>(n["contextAttribute"], "usageLimit.contextAttribute");
            m.usageLimits.push_back(std::move(ul));
        }
    }

    if (!root["plans"].IsSequence())
        throw Error(Errc::SchemaError, "'plans' must be a list");
    for (const auto& n : root["plans"]) {
        require_keys(n, {"name"}, {"price", "features", "usageLimits"}, "plan entry");
        Plan p;
        p.name = scalar_as<std::string>(n["name"], "plan.name");
        if (n["price"]) p.price = scalar_as<double>(n["price"], "plan '" + p.name + "' price");
        p.featureValues = detail::bool_map(n["features"], "plan '" + p.name + "' features");
        p.usageLimitValues =
            detail::number_map(n["usageLimits"], "plan '" + p.name + "' usageLimits");
        m.plans.push_back(std::move(p));
    }

    if (root["addOns"]) {
        if (!root["addOns"].IsSequence())
            throw Error(Errc::SchemaError, "'addOns' must be a list");
        for (const auto& n : root["addOns"]) {
            require_keys(n, {"name", "availableFor"},
                         {"price", "features", "usageLimitExtensions"}, "add-on entry");
            AddOn a;
            a.name = scalar_as<std::string>(n["name"], "addOn.name");
            if (n["price"]) a.price = scalar_as<double>(n["price"], "addOn '" + a.name + "' price");
            if (!n["availableFor"].IsSequence())
                throw Error(Errc::SchemaError,
                            "add-on '" + a.name + "' availableFor must be a list");
            for (const auto& pn : n["availableFor"])
                a.availableFor.insert(pn.as<std::string>());
            a.featureValues = detail::bool_map(n["features"], "addOn '" + a.name + "' features");
            a.usageLimitExtensions = detail::number_map(
                n["usageLimitExtensions"], "addOn '" + a.name + "' usageLimitExtensions");
            m.addOns.push_back(std::move(a));
        }
    }

    validate_pricing(m);
    return m;
}

inline PricingModel load_pricing_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::IoError, "cannot read pricing file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_pricing(ss.str());
}

/// Canonical YAML form; parse_pricing(serialize_pricing(m)) == m.
inline std::string serialize_pricing(const PricingModel& m) {
    YAML::Emitter out;
    out.SetIndent(2);
    auto number = [](double d) { return YAML::Node(format_number(d)); };

    YAML::Node root;
    root["saasName"] = m.name;
    root["version"] = m.version;
    if (!m.features.empty()) {
        for (const auto& f : m.features) {
            YAML::Node n;
            n["name"] = f.name;
            n["kind"] = f.kind == FeatureKind::functional ? "functional" : "extraFunctional";
            if (!f.description.empty()) n["description"] = f.description;
            root["features"].push_back(n);
        }
    }
    if (!m.usageLimits.empty()) {
        for (const auto& ul : m.usageLimits) {
            YAML::Node n;
            n["name"] = ul.name;
            n["feature"] = ul.feature;
            n["unit"] = ul.unit;
            n["contextAttribute"] = ul.contextAttribute;
            root["usageLimits"].push_back(n);
        }
    }
    for (const auto& p : m.plans) {
        YAML::Node n;
        n["name"] = p.name;
        if (p.price) n["price"] = number(*p.price);
        YAML::Node fv;
        for (const auto& [k, v] : p.featureValues) fv[k] = v;
        if (!p.featureValues.empty()) n["features"] = fv;
        YAML::Node lv;
        for (const auto& [k, v] : p.usageLimitValues) lv[k] = number(v);
        if (!p.usageLimitValues.empty()) n["usageLimits"] = lv;
        root["plans"].push_back(n);
    }
    if (!m.addOns.empty()) {
        for (const auto& a : m.addOns) {
            YAML::Node n;
            n["name"] = a.name;
            if (a.price) n["price"] = number(*a.price);
            for (const auto& pn : a.availableFor) n["availableFor"].push_back(pn);
            YAML::Node fv;
            for (const auto& [k, v] : a.featureValues) fv[k] = v;
            if (!a.featureValues.empty()) n["features"] = fv;
            YAML::Node lv;
            for (const auto& [k, v] : a.usageLimitExtensions) lv[k] = number(v);
            if (!a.usageLimitExtensions.empty()) n["usageLimitExtensions"] = lv;
            root["addOns"].push_back(n);
        }
    }
    out << root;
    return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Configuration space and entitlement resolution
// ---------------------------------------------------------------------------

/// Number of distinct valid subscriptions: sum over plans p of
/// 2^(add-ons available for p).
inline std::uint64_t configuration_space(const PricingModel& m) {
    std::uint64_t total = 0;
    for (const auto& p : m.plans) {
        int available = 0;
        for (const auto& a : m.addOns)
            if (a.availableFor.count(p.name)) ++available;
        total += std::uint64_t(1) << available;
    }
    return total;
}

/// Validates a subscription against the pricing; the three failure modes are
/// distinguished in the error detail.
inline void validate_subscription(const PricingModel& m, const Subscription& s) {
    const Plan* plan = m.find_plan(s.plan);
    if (!plan)
        throw Error(Errc::InvalidSubscription, "unknown plan '" + s.plan + "'", "unknown-plan");
    for (const auto& an : s.addOns) {
        const AddOn* a = m.find_add_on(an);
        if (!a)
            throw Error(Errc::InvalidSubscription, "unknown add-on '" + an + "'", "unknown-add-on");
        if (!a->availableFor.count(s.plan))
            throw Error(Errc::InvalidSubscription,
                        "add-on '" + an + "' is not available for plan '" + s.plan + "'",
                        "add-on-not-available");
    }
}

/// Flattens a subscription: feature = plan value OR any contracted add-on;
/// limit = max(plan value, contracted extensions). Missing keys default to
/// false / 0. Keys cover exactly the declared features and limits.
inline EntitlementMap resolve_entitlements(const PricingModel& m, const Subscription& s) {
    validate_subscription(m, s);
    const Plan& plan = *m.find_plan(s.plan);

    EntitlementMap out;
    out.pricingVersion = m.version;
    for (const auto& f : m.features) {
        auto it = plan.featureValues.find(f.name);
        bool v = it != plan.featureValues.end() && it->second;
        for (const auto& an : s.addOns) {
            const AddOn& a = *m.find_add_on(an);
            auto ait = a.featureValues.find(f.name);
            v = v || (ait != a.featureValues.end() && ait->second);
        }
        out.features[f.name] = v;
    }
    for (const auto& ul : m.usageLimits) {
        auto it = plan.usageLimitValues.find(ul.name);
        double v = it != plan.usageLimitValues.end() ? it->second : 0.0;
        for (const auto& an : s.addOns) {
            const AddOn& a = *m.find_add_on(an);
            auto ait = a.usageLimitExtensions.find(ul.name);
            if (ait != a.usageLimitExtensions.end()) v = std::max(v, ait->second);
        }
        out.limits[ul.name] = v;
    }
    return out;
}

/// Entitlements in evaluation-context form: user.subscription.features and
/// user.subscription.limits, ready to merge into a context document.
inline nlohmann::json entitlements_to_context(const EntitlementMap& e) {
    nlohmann::json features = nlohmann::json::object();
    for (const auto& [k, v] : e.features) features[k] = v;
    nlohmann::json limits = nlohmann::json::object();
    for (const auto& [k, v] : e.limits) limits[k] = v;
    return nlohmann::json{{"user", {{"subscription", {{"features", features}, {"limits", limits}}}}}};
}

/// When the raw context document names a subscription (user.plan plus an
/// optional user.addOns list), resolves it against `pricing` and injects
/// user.subscription.features/limits. This is what keeps evaluations in sync
/// with the live pricing: the caller sends the subscription, the engine
/// resolves it at request time. Throws Error{InvalidSubscription}.
inline nlohmann::json enrich_context_with_subscription(nlohmann::json ctx,
                                                       const PricingModel& pricing) {
    if (!ctx.is_object()) return ctx;
    const nlohmann::json* plan_node = nullptr;
    const nlohmann::json* addons_node = nullptr;
    if (ctx.contains("user") && ctx["user"].is_object()) {
        const auto& u = ctx["user"];
        if (u.contains("plan")) plan_node = &u["plan"];
        if (u.contains("addOns")) addons_node = &u["addOns"];
    }
    if (!plan_node && ctx.contains("user.plan")) plan_node = &ctx["user.plan"];
    if (!addons_node && ctx.contains("user.addOns")) addons_node = &ctx["user.addOns"];
    if (!plan_node) return ctx;
    if (!plan_node->is_string())
        throw Error(Errc::InvalidSubscription, "user.plan must be a string");

    Subscription sub;
    sub.plan = plan_node->get<std::string>();
    if (addons_node) {
        if (!addons_node->is_array())
            throw Error(Errc::InvalidSubscription, "user.addOns must be a list of add-on names");
        for (const auto& a : *addons_node) sub.addOns.insert(a.get<std::string>());
    }
    EntitlementMap ents = resolve_entitlements(pricing, sub);
    nlohmann::json merged = entitlements_to_context(ents);
    ctx["user"]["subscription"] = merged["user"]["subscription"];
    return ctx;
}

} // namespace horizon
