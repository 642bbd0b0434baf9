// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0
//
// Pricing-to-toggle compilation: deterministic generation of toggles, rules,
// and schema attributes from a pricing model; idempotent store
// reconciliation; and a polling watcher that hot-swaps snapshots when the
// pricing file changes.
//
// Generated identifiers are stable: the toggle id is the feature name and
// rule ids are "pricing:<feature>:entitlement" / "pricing:<feature>:limit:<limit>".
// Everything outside that namespace belongs to the operator and is never
// touched by a sync.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "horizon/digest.hpp"
#include "horizon/errors.hpp"
#include "horizon/pricing.hpp"
#include "horizon/store.hpp"

namespace horizon {

inline std::string generated_rule_prefix(const std::string& feature) {
    return "pricing:" + feature + ":";
}
inline std::string entitlement_rule_id(const std::string& feature) {
    return generated_rule_prefix(feature) + "entitlement";
}
inline std::string limit_rule_id(const std::string& feature, const std::string& limit) {
    return generated_rule_prefix(feature) + "limit:" + limit;
}

struct Compilation {
    std::vector<FeatureToggle> toggles;
    std::vector<Rule> rules;
    ContextSchema schemaFragment;
    std::string sourceVersion;
};

/// Compiles a pricing into its toggle/rule/schema form. Deterministic:
/// identical pricing gives identical output. Per feature an entitlement gate
/// on user.subscription.features; per usage limit an additional rule
/// comparing the limit's contextAttribute against user.subscription.limits.
inline Compilation compile_pricing(const PricingModel& m) {
    Compilation out;
    out.sourceVersion = m.version;

    try {
        out.schemaFragment.declare("user.subscription.features",
                                   AttrType::map_of(AttrType::Scalar::Boolean));
        out.schemaFragment.declare("user.subscription.limits",
                                   AttrType::map_of(AttrType::Scalar::Number));
        for (const auto& ul : m.usageLimits)
            out.schemaFragment.declare(ul.contextAttribute, AttrType::number());
    } catch (const Error& e) {
        throw Error(Errc::SchemaConflict, e.message());
    }

    for (const auto& f : m.features) {
        FeatureToggle t;
        t.id = f.name;
        t.description = f.description;
        t.environments = {"default"};
        t.defaultValue = false; // entitlement checks fail closed
        t.origin = Origin::pricingGenerated;

        Rule gate;
        gate.id = entitlement_rule_id(f.name);
        gate.expressionSource =
            "user.subscription.features[" + detail::escape_string(f.name) + "] == true";
        gate.attachedFeatures = {f.name};
        t.ruleIds.push_back(gate.id);
        out.rules.push_back(std::move(gate));

        for (const auto& ul : m.usageLimits) {
            if (ul.feature != f.name) continue;
            Rule lim;
            lim.id = limit_rule_id(f.name, ul.name);
            lim.expressionSource = ul.contextAttribute + " <= user.subscription.limits[" +
                                   detail::escape_string(ul.name) + "]";
            lim.attachedFeatures = {f.name};
            t.ruleIds.push_back(lim.id);
            out.rules.push_back(std::move(lim));
        }
        out.toggles.push_back(std::move(t));
    }
    return out;
}

struct CompilationPlan {
    std::vector<FeatureToggle> togglesToCreate;
    std::vector<FeatureToggle> togglesToUpdate;
    std::vector<std::string> togglesToDelete;
    std::vector<Rule> rulesToCreate;
    std::vector<Rule> rulesToUpdate;
    std::vector<std::string> rulesToDelete;
    ContextSchema schemaAdditions;
    std::string sourceVersion;

    bool empty() const {
        return togglesToCreate.empty() && togglesToUpdate.empty() && togglesToDelete.empty() &&
               rulesToCreate.empty() && rulesToUpdate.empty() && rulesToDelete.empty() &&
               schemaAdditions.empty();
    }

    nlohmann::json to_json() const {
        auto ids = [](const std::vector<FeatureToggle>& ts) {
            std::vector<std::string> out;
            for (const auto& t : ts) out.push_back(t.id);
            return out;
        };
        auto rids = [](const std::vector<Rule>& rs) {
            std::vector<std::string> out;
            for (const auto& r : rs) out.push_back(r.id);
            return out;
        };
        std::vector<std::string> attrs;
        for (const auto& [p, t] : schemaAdditions.attributes()) attrs.push_back(p);
        return {{"togglesToCreate", ids(togglesToCreate)},
                {"togglesToUpdate", ids(togglesToUpdate)},
                {"togglesToDelete", togglesToDelete},
                {"rulesToCreate", rids(rulesToCreate)},
                {"rulesToUpdate", rids(rulesToUpdate)},
                {"rulesToDelete", rulesToDelete},
                {"schemaAdditions", attrs},
                {"sourceVersion", sourceVersion},
                {"empty", empty()}};
    }
};

/// Pure reconciliation diff between a store snapshot and a pricing. Manual
/// toggles are untouched; a manual toggle squatting on a generated id is a
/// ConflictError; schema merging is additive and type clashes are
/// SchemaConflict.
inline CompilationPlan plan_sync(const StoreSnapshot& snap, const PricingModel& pricing) {
    Compilation target = compile_pricing(pricing);
    CompilationPlan plan;
    plan.sourceVersion = target.sourceVersion;

    // schema additions
    ContextSchema merged = *snap.contextSchema;
    for (const auto& [path, type] : target.schemaFragment.attributes()) {
        if (const AttrType* existing = snap.contextSchema->find(path)) {
            if (!(*existing == type))
                throw Error(Errc::SchemaConflict,
                            "attribute '" + path + "' is declared as " + existing->to_string() +
                                " but the pricing needs " + type.to_string());
            continue;
        }
        try {
            merged.declare(path, type);
        } catch (const Error& e) {
            throw Error(Errc::SchemaConflict, e.message());
        }
        plan.schemaAdditions.declare(path, type);
    }

    std::set<std::string> target_toggle_ids;
    for (const auto& t : target.toggles) target_toggle_ids.insert(t.id);
    std::set<std::string> target_rule_ids;
    for (const auto& r : target.rules) target_rule_ids.insert(r.id);

    // toggles: create, or reconcile the generated rule set of existing ones
    for (const auto& t : target.toggles) {
        const FeatureToggle* cur = snap.find_toggle(t.id);
        if (!cur) {
            plan.togglesToCreate.push_back(t);
            continue;
        }
        if (cur->origin == Origin::manual)
            throw Error(Errc::ConflictError,
                        "manual toggle '" + t.id + "' occupies a pricing-generated id", t.id);
        std::vector<std::string> desired = t.ruleIds;
        std::string prefix = generated_rule_prefix(t.id);
        for (const auto& rid : cur->ruleIds)
            if (rid.compare(0, prefix.size(), prefix) != 0) desired.push_back(rid);
        if (desired != cur->ruleIds) {
            FeatureToggle updated = *cur;
            updated.ruleIds = std::move(desired);
            plan.togglesToUpdate.push_back(std::move(updated));
        }
    }
    for (const auto& [id, t] : snap.toggles)
        if (t.origin == Origin::pricingGenerated && !target_toggle_ids.count(id))
            plan.togglesToDelete.push_back(id);

    // rules: generated ones converge on the template, keeping extra manual
    // attachments that survive the toggle deletions
    std::set<std::string> deleted_toggles(plan.togglesToDelete.begin(),
                                          plan.togglesToDelete.end());
    for (auto r : target.rules) {
        const Rule* cur = snap.find_rule(r.id);
        if (!cur) {
            plan.rulesToCreate.push_back(std::move(r));
            continue;
        }
        for (const auto& extra : cur->attachedFeatures)
            if (!deleted_toggles.count(extra)) r.attachedFeatures.insert(extra);
        if (!(r == *cur)) plan.rulesToUpdate.push_back(std::move(r));
    }
    for (const auto& [id, r] : snap.rules)
        if (id.rfind("pricing:", 0) == 0 && !target_rule_ids.count(id))
            plan.rulesToDelete.push_back(id);

    return plan;
}

struct SyncResult {
    CompilationPlan plan;
    std::uint64_t revision = 0;
};

/// Plans and atomically applies a reconciliation (single revision bump).
/// Idempotent: re-running with the same pricing yields an empty plan and no
/// new revision.
inline SyncResult sync_store(ToggleStore& store, const PricingModel& pricing) {
    auto snap = store.snapshot();
    SyncResult out;
    out.plan = plan_sync(*snap, pricing);

    StoreBatch batch;
    if (!out.plan.schemaAdditions.empty()) {
        ContextSchema merged = *snap->contextSchema;
        for (const auto& [p, t] : out.plan.schemaAdditions.attributes()) merged.declare(p, t);
        batch.schema = std::move(merged);
    }
    if (snap->pricingVersion != pricing.version) batch.pricingVersion = pricing.version;
    for (const auto& r : out.plan.rulesToCreate) batch.upsertRules.push_back(r);
    for (const auto& r : out.plan.rulesToUpdate) batch.upsertRules.push_back(r);
    for (const auto& t : out.plan.togglesToCreate) batch.upsertToggles.push_back(t);
    for (const auto& t : out.plan.togglesToUpdate) batch.upsertToggles.push_back(t);
    batch.deleteRuleIds = out.plan.rulesToDelete;
    batch.deleteToggleIds = out.plan.togglesToDelete;

    out.revision = store.apply_batch(batch, ChangeKind::pricingReloaded);
    return out;
}

// ---------------------------------------------------------------------------
// Hot-reload watcher
// ---------------------------------------------------------------------------

inline std::optional<std::string> env_var(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

struct WatcherConfig {
    std::filesystem::path path;
    std::chrono::milliseconds interval{1000};
    int maxFailures = 5;

    /// HORIZON_PRICING_PATH / HORIZON_POLL_MS override the given defaults.
    static WatcherConfig from_env(WatcherConfig base) {
        if (auto p = env_var("HORIZON_PRICING_PATH")) base.path = *p;
        if (auto ms = env_var("HORIZON_POLL_MS")) {
            try {
                base.interval = std::chrono::milliseconds(std::stol(*ms));
            } catch (...) {
                throw Error(Errc::ConfigError, "HORIZON_POLL_MS must be an integer: '" + *ms + "'");
            }
        }
        return base;
    }
};

/// Polls the pricing file by content hash. A change parses, validates, and
/// syncs the store (atomic snapshot swap); an invalid rewrite keeps the
/// previous snapshot live and only logs a diagnostic. Read failures retry
/// with capped exponential backoff and surface a WatchError through onError
/// after maxFailures consecutive misses.
class PricingWatcher {
public:
    PricingWatcher(ToggleStore& store, WatcherConfig cfg)
        : store_(store), cfg_(std::move(cfg)) {}

    ~PricingWatcher() { stop(); }

    void on_diagnostic(std::function<void(const std::string&)> fn) { diag_ = std::move(fn); }
    void on_error(std::function<void(const Error&)> fn) { error_ = std::move(fn); }
    void on_reload(std::function<void(std::shared_ptr<const PricingModel>)> fn) {
        reload_ = std::move(fn);
    }

    /// The last successfully applied pricing.
    std::shared_ptr<const PricingModel> current() const {
        std::lock_guard lk(mu_);
        return current_;
    }

    /// Performs one synchronous load+sync (throws on an unreadable or invalid
    /// initial file), then starts the polling thread.
    void start() {
        std::string content = read_file();
        apply(content);
        {
            std::lock_guard lk(mu_);
            running_ = true;
        }
        thread_ = std::thread([this] { loop(); });
    }

    void stop() {
        {
            std::lock_guard lk(mu_);
            if (!running_) return;
            running_ = false;
        }
        cv_.notify_all();
        if (thread_.joinable()) thread_.join();
    }

    bool running() const {
        std::lock_guard lk(mu_);
        return running_;
    }

private:
    std::string read_file() {
        std::ifstream in(cfg_.path, std::ios::binary);
        if (!in) throw Error(Errc::WatchError, "cannot read '" + cfg_.path.string() + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void diagnostic(const std::string& msg) {
        if (diag_) diag_(msg);
    }

    /// Parse + sync + publish the new pricing; the reload callback fires
    /// after the snapshot swap.
    void apply(const std::string& content) {
        auto m = std::make_shared<const PricingModel>(parse_pricing(content));
        sync_store(store_, *m);
        {
            std::lock_guard lk(mu_);
            current_ = m;
        }
        last_hash_ = sha256_hex(content);
        if (reload_) reload_(m);
    }

    void loop() {
        int failures = 0;
        while (true) {
            auto delay = cfg_.interval;
            if (failures > 0) {
                int shift = std::min(failures, 3);
                delay = cfg_.interval * (1 << shift);
            }
            {
                std::unique_lock lk(mu_);
                if (cv_.wait_for(lk, delay, [this] { return !running_; })) return;
            }
            std::string content;
            try {
                content = read_file();
            } catch (const Error& e) {
                ++failures;
                diagnostic(e.message());
                if (failures == cfg_.maxFailures && error_)
                    error_(Error(Errc::WatchError, "pricing file unreadable after " +
                                                       std::to_string(failures) + " attempts: " +
                                                       e.message()));
                continue;
            }
            failures = 0;
            std::string hash = sha256_hex(content);
            if (hash == last_hash_) continue;
            last_hash_ = hash; // even when invalid: re-log only on further change
            try {
                apply(content);
            } catch (const Error& e) {
                diagnostic("ignoring invalid pricing update: " + e.message());
            }
        }
    }

    ToggleStore& store_;
    WatcherConfig cfg_;
    std::string last_hash_;
    std::shared_ptr<const PricingModel> current_;
    std::function<void(const std::string&)> diag_;
    std::function<void(const Error&)> error_;
    std::function<void(std::shared_ptr<const PricingModel>)> reload_;
    std::thread thread_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    bool running_ = false;
};

} // namespace horizon
