// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0
//
// Feature evaluation over a store snapshot: single toggle, bulk bootstrap
// payloads, dependency gating, default fallback, and partial re-evaluation.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "horizon/digest.hpp"
#include "horizon/errors.hpp"
#include "horizon/expression.hpp"
#include "horizon/store.hpp"

namespace horizon {

enum class Reason { ruleMatched, ruleFailed, parentDisabled, defaultUsed, environmentExcluded };

constexpr std::string_view reason_name(Reason r) {
    switch (r) {
    case Reason::ruleMatched: return "ruleMatched";
    case Reason::ruleFailed: return "ruleFailed";
    case Reason::parentDisabled: return "parentDisabled";
    case Reason::defaultUsed: return "defaultUsed";
    case Reason::environmentExcluded: return "environmentExcluded";
    }
    return "?";
}

inline Reason reason_from_name(const std::string& s) {
    if (s == "ruleMatched") return Reason::ruleMatched;
    if (s == "ruleFailed") return Reason::ruleFailed;
    if (s == "parentDisabled") return Reason::parentDisabled;
    if (s == "defaultUsed") return Reason::defaultUsed;
    if (s == "environmentExcluded") return Reason::environmentExcluded;
    throw Error(Errc::SchemaError, "unknown evaluation reason '" + s + "'");
}

struct EvaluationResult {
    std::string featureId;
    bool value = false;
    Reason reason = Reason::ruleMatched;
    std::optional<std::string> ruleId;
    std::optional<std::string> diagnostics;
    std::uint64_t snapshotRevision = 0;

    friend bool operator==(const EvaluationResult&, const EvaluationResult&) = default;

    nlohmann::json to_json() const {
        nlohmann::json j{{"featureId", featureId},
                         {"value", value},
                         {"reason", std::string(reason_name(reason))},
                         {"snapshotRevision", snapshotRevision}};
        if (ruleId) j["ruleId"] = *ruleId;
        if (diagnostics) j["diagnostics"] = *diagnostics;
        return j;
    }

    static EvaluationResult from_json(const nlohmann::json& j) {
        EvaluationResult r;
        r.featureId = j.at("featureId").get<std::string>();
        r.value = j.at("value").get<bool>();
        r.reason = reason_from_name(j.at("reason").get<std::string>());
        r.snapshotRevision = j.at("snapshotRevision").get<std::uint64_t>();
        if (j.contains("ruleId")) r.ruleId = j["ruleId"].get<std::string>();
        if (j.contains("diagnostics")) r.diagnostics = j["diagnostics"].get<std::string>();
        return r;
    }
};

/// Pre-evaluated results for every toggle visible in one environment;
/// what a client caches at startup.
struct BootstrapPayload {
    std::map<std::string, EvaluationResult> results;
    std::string contextDigest;
    std::string pricingVersion;
    std::int64_t issuedAt = 0;

    nlohmann::json to_json() const {
        nlohmann::json rs = nlohmann::json::object();
        for (const auto& [id, r] : results) rs[id] = r.to_json();
        return {{"results", rs},
                {"contextDigest", contextDigest},
                {"pricingVersion", pricingVersion},
                {"issuedAt", issuedAt}};
    }

    static BootstrapPayload from_json(const nlohmann::json& j) {
        BootstrapPayload p;
        for (const auto& [id, r] : j.at("results").items())
            p.results[id] = EvaluationResult::from_json(r);
        p.contextDigest = j.at("contextDigest").get<std::string>();
        p.pricingVersion = j.at("pricingVersion").get<std::string>();
        p.issuedAt = j.at("issuedAt").get<std::int64_t>();
        return p;
    }
};

/// Test/diagnostic instrumentation: invoked right before each rule execution.
struct EvalHooks {
    std::function<void(const std::string& ruleId, const std::string& featureId)> onRuleEvaluated;
};

inline std::string context_digest(const EvaluationContext& ctx) {
    return sha256_hex(ctx.to_json().dump());
}

namespace detail {

struct Evaluator {
    const StoreSnapshot& snap;
    const EvaluationContext& ctx;
    const std::string& environment;
    const EvalHooks* hooks;
    std::map<std::string, EvaluationResult>& memo;

    const EvaluationResult& eval(const std::string& id) {
        auto it = memo.find(id);
        if (it != memo.end()) return it->second;
        const FeatureToggle* t = snap.find_toggle(id);
        if (!t) throw Error(Errc::UnknownFeature, "unknown feature toggle '" + id + "'");
        return memo.emplace(id, eval_toggle(*t)).first->second;
    }

    EvaluationResult eval_toggle(const FeatureToggle& t) {
        EvaluationResult r;
        r.featureId = t.id;
        r.snapshotRevision = snap.revision;

        if (!t.environments.count(environment)) {
            r.value = false;
            r.reason = Reason::environmentExcluded;
            return r;
        }
        if (t.dependsOn) {
            const EvaluationResult& parent = eval(*t.dependsOn);
            if (!parent.value) {
                r.value = false;
                r.reason = Reason::parentDisabled;
                r.diagnostics = "parent '" + *t.dependsOn + "' is disabled";
                return r;
            }
        }
        for (const auto& rid : t.ruleIds) {
            if (hooks && hooks->onRuleEvaluated) hooks->onRuleEvaluated(rid, t.id);
            try {
                if (!evaluate(snap.compiledRules.at(rid), ctx)) {
                    r.value = false;
                    r.reason = Reason::ruleFailed;
                    r.ruleId = rid;
                    return r;
                }
            } catch (const Error& e) {
                if (e.code() == Errc::MissingAttribute || e.code() == Errc::RegexError) {
                    r.value = t.defaultValue;
                    r.reason = Reason::defaultUsed;
                    r.ruleId = rid;
                    r.diagnostics = e.message();
                    return r;
                }
                throw;
            }
        }
        // all rules passed; a toggle with zero rules is unconditionally on
        r.value = true;
        r.reason = Reason::ruleMatched;
        return r;
    }
};

} // namespace detail

/// Evaluates one toggle. Environment exclusion and a disabled parent short out
/// before any rule runs; MissingAttribute/RegexError fall back to the
/// toggle's defaultValue. Throws Error{UnknownFeature} for an unknown id —
/// deliberately not masked by defaults.
inline EvaluationResult evaluate_feature(const StoreSnapshot& snap, const std::string& featureId,
                                         const EvaluationContext& ctx,
                                         const std::string& environment = "default",
                                         const EvalHooks* hooks = nullptr) {
    std::map<std::string, EvaluationResult> memo;
    detail::Evaluator ev{snap, ctx, environment, hooks, memo};
    return ev.eval(featureId);
}

/// Evaluates every toggle visible in `environment`, each exactly once
/// (parents are memoized). Per-feature failures become defaultUsed entries.
inline BootstrapPayload evaluate_all(const StoreSnapshot& snap, const EvaluationContext& ctx,
                                     const std::string& environment = "default",
                                     const EvalHooks* hooks = nullptr) {
    std::map<std::string, EvaluationResult> memo;
    detail::Evaluator ev{snap, ctx, environment, hooks, memo};
    BootstrapPayload p;
    for (const auto& [id, t] : snap.toggles)
        if (t.environments.count(environment)) p.results[id] = ev.eval(id);
    p.contextDigest = context_digest(ctx);
    p.pricingVersion = snap.pricingVersion;
    p.issuedAt = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count();
    return p;
}

namespace detail {

/// Declared attribute paths referenced by a toggle's own rules plus every
/// ancestor's (a disabled parent gates the child, so its inputs matter too).
inline void collect_refs(const StoreSnapshot& snap, const std::string& id,
                         std::set<std::string>& out, std::set<std::string>& seen) {
    if (!seen.insert(id).second) return;
    const FeatureToggle* t = snap.find_toggle(id);
    if (!t) return;
    for (const auto& rid : t->ruleIds) {
        auto it = snap.compiledRules.find(rid);
        if (it != snap.compiledRules.end())
            out.insert(it->second.referenced_attrs.begin(), it->second.referenced_attrs.end());
    }
    if (t->dependsOn) collect_refs(snap, *t->dependsOn, out, seen);
}

} // namespace detail

/// Recomputes only the toggles whose rules (or an ancestor's) reference a
/// changed attribute; every other entry is carried over from `previous`.
/// `previous` must come from the same snapshot revision and environment.
inline BootstrapPayload reevaluate_subset(const StoreSnapshot& snap, const EvaluationContext& ctx,
                                          const std::set<std::string>& changedAttributes,
                                          const BootstrapPayload& previous,
                                          const std::string& environment = "default",
                                          const EvalHooks* hooks = nullptr) {
    for (const auto& [id, r] : previous.results)
        if (r.snapshotRevision != snap.revision)
            throw Error(Errc::RevisionMismatch,
                        "payload entry '" + id + "' is from revision " +
                            std::to_string(r.snapshotRevision) + ", store is at " +
                            std::to_string(snap.revision));

    std::map<std::string, EvaluationResult> memo;
    detail::Evaluator ev{snap, ctx, environment, hooks, memo};

    std::set<std::string> affected;
    for (const auto& [id, t] : snap.toggles) {
        std::set<std::string> refs, seen;
        detail::collect_refs(snap, id, refs, seen);
        for (const auto& a : refs)
            if (changedAttributes.count(a)) {
                affected.insert(id);
                break;
            }
    }
    // Seed unaffected entries so carried results are reused verbatim and
    // affected children see their parents' (unchanged) values.
    for (const auto& [id, r] : previous.results)
        if (!affected.count(id)) memo[id] = r;

    BootstrapPayload p;
    for (const auto& [id, t] : snap.toggles)
        if (t.environments.count(environment)) p.results[id] = ev.eval(id);
    p.contextDigest = context_digest(ctx);
    p.pricingVersion = snap.pricingVersion;
    p.issuedAt = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count();
    return p;
}

} // namespace horizon
