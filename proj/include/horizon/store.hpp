// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0
//
// Centralized toggle registry: CRUD for toggles and rules, dependency links,
// durable JSON persistence (write-temp, fsync, rename), and immutable
// copy-on-write snapshots for evaluation.

#pragma once

#include <cstdint>
#include <chrono>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "horizon/errors.hpp"
#include "horizon/expression.hpp"

namespace horizon {

enum class Origin { manual, pricingGenerated };

struct FeatureToggle {
    std::string id;
    std::string description;
    std::set<std::string> environments;  // empty on input means {"default"}
    std::vector<std::string> ruleIds;    // conjunction, evaluated in order
    std::optional<std::string> dependsOn;
    bool defaultValue = false;
    Origin origin = Origin::manual;

    friend bool operator==(const FeatureToggle&, const FeatureToggle&) = default;
};

struct Rule {
    std::string id;
    std::string expressionSource;
    std::set<std::string> attachedFeatures;

    friend bool operator==(const Rule&, const Rule&) = default;
};

enum class ChangeKind { pricingReloaded, storeMutated };

struct ChangeEvent {
    ChangeKind kind = ChangeKind::storeMutated;
    std::uint64_t revision = 0;
    std::string pricingVersion;
    std::int64_t timestampMs = 0;
};

/// Immutable, internally consistent view of the store. Everything a reader
/// needs (including pre-compiled rule expressions) lives here; concurrent
/// mutations never alter a published snapshot.
struct StoreSnapshot {
    std::map<std::string, FeatureToggle> toggles;
    std::map<std::string, Rule> rules;
    std::shared_ptr<const ContextSchema> contextSchema;
    std::uint64_t revision = 0;
    std::string pricingVersion;
    std::map<std::string, TypedExpr> compiledRules;

    const FeatureToggle* find_toggle(const std::string& id) const {
        auto it = toggles.find(id);
        return it == toggles.end() ? nullptr : &it->second;
    }
    const Rule* find_rule(const std::string& id) const {
        auto it = rules.find(id);
        return it == rules.end() ? nullptr : &it->second;
    }
};

inline bool snapshot_content_equal(const StoreSnapshot& a, const StoreSnapshot& b) {
    return a.revision == b.revision && a.pricingVersion == b.pricingVersion &&
           a.toggles == b.toggles && a.rules == b.rules &&
           *a.contextSchema == *b.contextSchema;
}

// ---------------------------------------------------------------------------
// JSON serde
// ---------------------------------------------------------------------------

inline nlohmann::json toggle_to_json(const FeatureToggle& t) {
    nlohmann::json j{{"id", t.id},
                     {"description", t.description},
                     {"environments", t.environments},
                     {"ruleIds", t.ruleIds},
                     {"defaultValue", t.defaultValue},
                     {"origin", t.origin == Origin::manual ? "manual" : "pricingGenerated"}};
    if (t.dependsOn) j["dependsOn"] = *t.dependsOn;
    return j;
}

inline FeatureToggle toggle_from_json(const nlohmann::json& j) {
    FeatureToggle t;
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
        throw Error(Errc::SchemaError, "toggle requires a string 'id'");
    t.id = j["id"].get<std::string>();
    for (const auto& [k, v] : j.items()) {
        if (k == "id") continue;
        else if (k == "description") t.description = v.get<std::string>();
        else if (k == "environments") t.environments = v.get<std::set<std::string>>();
        else if (k == "ruleIds") t.ruleIds = v.get<std::vector<std::string>>();
        else if (k == "dependsOn") { if (!v.is_null()) t.dependsOn = v.get<std::string>(); }
        else if (k == "defaultValue") t.defaultValue = v.get<bool>();
        else if (k == "origin") {
            std::string o = v.get<std::string>();
            if (o == "manual") t.origin = Origin::manual;
            else if (o == "pricingGenerated") t.origin = Origin::pricingGenerated;
            else throw Error(Errc::SchemaError, "toggle '" + t.id + "': unknown origin '" + o + "'");
        } else {
            throw Error(Errc::SchemaError, "toggle '" + t.id + "': unknown key '" + k + "'");
        }
    }
    return t;
}

inline nlohmann::json rule_to_json(const Rule& r) {
    return {{"id", r.id},
            {"expressionSource", r.expressionSource},
            {"attachedFeatures", r.attachedFeatures}};
}

inline Rule rule_from_json(const nlohmann::json& j) {
    Rule r;
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
        throw Error(Errc::SchemaError, "rule requires a string 'id'");
    r.id = j["id"].get<std::string>();
    for (const auto& [k, v] : j.items()) {
        if (k == "id") continue;
        else if (k == "expressionSource") r.expressionSource = v.get<std::string>();
        else if (k == "attachedFeatures") r.attachedFeatures = v.get<std::set<std::string>>();
        else throw Error(Errc::SchemaError, "rule '" + r.id + "': unknown key '" + k + "'");
    }
    return r;
}

inline nlohmann::json snapshot_to_json(const StoreSnapshot& s) {
    nlohmann::json toggles = nlohmann::json::array();
    for (const auto& [id, t] : s.toggles) toggles.push_back(toggle_to_json(t));
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& [id, r] : s.rules) rules.push_back(rule_to_json(r));
    return {{"revision", s.revision},
            {"pricingVersion", s.pricingVersion},
            {"contextSchema", s.contextSchema->to_json()},
            {"toggles", toggles},
            {"rules", rules}};
}

// ---------------------------------------------------------------------------
// Integrity audit
// ---------------------------------------------------------------------------

/// Full-store referential integrity check. Returns a list of problems;
/// empty means the snapshot is internally consistent.
inline std::vector<std::string> audit(const StoreSnapshot& s) {
    std::vector<std::string> problems;
    for (const auto& [id, t] : s.toggles) {
        for (const auto& rid : t.ruleIds) {
            const Rule* r = s.find_rule(rid);
            if (!r) problems.push_back("toggle '" + id + "' references unknown rule '" + rid + "'");
            else if (!r->attachedFeatures.count(id))
                problems.push_back("rule '" + rid + "' does not list toggle '" + id + "'");
        }
        if (t.dependsOn && !s.find_toggle(*t.dependsOn))
            problems.push_back("toggle '" + id + "' depends on unknown toggle '" + *t.dependsOn + "'");
    }
    for (const auto& [id, r] : s.rules) {
        for (const auto& fid : r.attachedFeatures) {
            const FeatureToggle* t = s.find_toggle(fid);
            if (!t) problems.push_back("rule '" + id + "' attached to unknown toggle '" + fid + "'");
            else if (std::find(t->ruleIds.begin(), t->ruleIds.end(), id) == t->ruleIds.end())
                problems.push_back("toggle '" + fid + "' does not list rule '" + id + "'");
        }
        if (!s.compiledRules.count(id))
            problems.push_back("rule '" + id + "' has no compiled expression");
    }
    // dependsOn acyclicity: walk each chain with a visited set
    for (const auto& [id, t] : s.toggles) {
        std::set<std::string> seen{id};
        const FeatureToggle* cur = &t;
        while (cur->dependsOn) {
            const FeatureToggle* parent = s.find_toggle(*cur->dependsOn);
            if (!parent) break; // reported above
            if (!seen.insert(parent->id).second) {
                problems.push_back("dependency cycle through toggle '" + parent->id + "'");
                break;
            }
            cur = parent;
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Batch mutation (used by the pricing compiler for atomic plan application)
// ---------------------------------------------------------------------------

struct StoreBatch {
    std::optional<ContextSchema> schema;      // replaces the registered schema
    std::optional<std::string> pricingVersion;
    std::vector<Rule> upsertRules;
    std::vector<FeatureToggle> upsertToggles;
    std::vector<std::string> deleteRuleIds;
    std::vector<std::string> deleteToggleIds;

    bool empty() const {
        return !schema && !pricingVersion && upsertRules.empty() && upsertToggles.empty() &&
               deleteRuleIds.empty() && deleteToggleIds.empty();
    }
};

// ---------------------------------------------------------------------------
// ToggleStore
// ---------------------------------------------------------------------------

class ToggleStore {
public:
    using Snapshot = std::shared_ptr<const StoreSnapshot>;
    using Listener = std::function<void(const ChangeEvent&)>;

    /// Opens (or creates) a store backed by `file`. An existing file is
    /// loaded and validated; a missing one starts an empty store at rev 0.
    explicit ToggleStore(std::filesystem::path file) : file_(std::move(file)) {
        if (std::filesystem::exists(file_)) {
            load();
        } else {
            State s;
            snap_ = compile_state(s, 0, "");
        }
    }

    Snapshot snapshot() const {
        std::shared_lock lk(snap_mutex_);
        return snap_;
    }

    std::uint64_t revision() const { return snapshot()->revision; }
    const std::filesystem::path& file() const { return file_; }

    void on_change(Listener fn) {
        std::lock_guard lk(listener_mutex_);
        listeners_.push_back(std::move(fn));
    }

    // -- feature CRUD --------------------------------------------------------

    std::uint64_t upsert_feature(FeatureToggle t) {
        return mutate([&](State& s) {
            if (t.id.empty()) throw Error(Errc::SemanticError, "toggle id must not be empty");
            if (t.environments.empty()) t.environments = {"default"};
            std::set<std::string> seen;
            for (const auto& rid : t.ruleIds) {
                if (!s.rules.count(rid))
                    throw Error(Errc::DanglingReference,
                                "toggle '" + t.id + "' references unknown rule '" + rid + "'");
                if (!seen.insert(rid).second)
                    throw Error(Errc::ConsistencyError,
                                "toggle '" + t.id + "' lists rule '" + rid + "' twice");
            }
            if (t.dependsOn) {
                if (*t.dependsOn == t.id)
                    throw Error(Errc::CycleError, "toggle '" + t.id + "' cannot depend on itself");
                if (!s.toggles.count(*t.dependsOn))
                    throw Error(Errc::DanglingReference, "toggle '" + t.id +
                                                             "' depends on unknown toggle '" +
                                                             *t.dependsOn + "'");
                check_no_cycle(s, t.id, *t.dependsOn);
            }
            // keep both sides of the rule<->toggle link in sync
            auto old = s.toggles.find(t.id);
            if (old != s.toggles.end())
                for (const auto& rid : old->second.ruleIds)
                    if (std::find(t.ruleIds.begin(), t.ruleIds.end(), rid) == t.ruleIds.end())
                        s.rules[rid].attachedFeatures.erase(t.id);
            for (const auto& rid : t.ruleIds) s.rules[rid].attachedFeatures.insert(t.id);
            s.toggles[t.id] = t;
        });
    }

    FeatureToggle read_feature(const std::string& id) const {
        auto s = snapshot();
        const FeatureToggle* t = s->find_toggle(id);
        if (!t) throw Error(Errc::NotFound, "unknown feature toggle '" + id + "'");
        return *t;
    }

    std::uint64_t delete_feature(const std::string& id) {
        return mutate([&](State& s) {
            if (!s.toggles.count(id))
                throw Error(Errc::NotFound, "unknown feature toggle '" + id + "'");
            for (const auto& [oid, other] : s.toggles)
                if (other.dependsOn == id)
                    throw Error(Errc::DependencyViolation,
                                "toggle '" + oid + "' depends on '" + id + "'", oid);
            s.toggles.erase(id);
            for (auto& [rid, r] : s.rules) r.attachedFeatures.erase(id);
        });
    }

    // -- rule CRUD ------------------------------------------------------------

    std::uint64_t upsert_rule(Rule r) {
        return mutate([&](State& s) {
            if (r.id.empty()) throw Error(Errc::SemanticError, "rule id must not be empty");
            compile_expression(r.expressionSource, *s.schema); // ExpressionError on failure
            for (const auto& fid : r.attachedFeatures)
                if (!s.toggles.count(fid))
                    throw Error(Errc::ConsistencyError,
                                "rule '" + r.id + "' attached to unknown toggle '" + fid + "'");
            auto old = s.rules.find(r.id);
            if (old != s.rules.end())
                for (const auto& fid : old->second.attachedFeatures)
                    if (!r.attachedFeatures.count(fid)) detach(s.toggles[fid], r.id);
            for (const auto& fid : r.attachedFeatures) attach(s.toggles[fid], r.id);
            s.rules[r.id] = r;
        });
    }

    Rule read_rule(const std::string& id) const {
        auto s = snapshot();
        const Rule* r = s->find_rule(id);
        if (!r) throw Error(Errc::NotFound, "unknown rule '" + id + "'");
        return *r;
    }

    std::uint64_t delete_rule(const std::string& id, bool force = false) {
        return mutate([&](State& s) {
            auto it = s.rules.find(id);
            if (it == s.rules.end()) throw Error(Errc::NotFound, "unknown rule '" + id + "'");
            if (!force)
                for (const auto& [tid, t] : s.toggles)
                    if (t.origin == Origin::pricingGenerated && t.ruleIds.size() == 1 &&
                        t.ruleIds.front() == id)
                        throw Error(Errc::ConsistencyError,
                                    "rule '" + id + "' is the sole rule of pricing-generated "
                                    "toggle '" + tid + "' (use force to delete)");
            s.rules.erase(it);
            for (auto& [tid, t] : s.toggles) detach(t, id);
        });
    }

    // -- dependency links ------------------------------------------------------

    std::uint64_t link_dependency(const std::string& child, const std::string& parent) {
        return mutate([&](State& s) {
            if (!s.toggles.count(child))
                throw Error(Errc::NotFound, "unknown feature toggle '" + child + "'");
            if (!s.toggles.count(parent))
                throw Error(Errc::NotFound, "unknown feature toggle '" + parent + "'");
            if (child == parent)
                throw Error(Errc::CycleError, "toggle '" + child + "' cannot depend on itself");
            check_no_cycle(s, child, parent);
            s.toggles[child].dependsOn = parent;
        });
    }

    // -- schema ----------------------------------------------------------------

    std::uint64_t set_context_schema(ContextSchema schema) {
        return mutate([&](State& s) { s.schema = std::make_shared<ContextSchema>(std::move(schema)); });
    }

    // -- batch (atomic multi-op; single revision bump) --------------------------

    std::uint64_t apply_batch(const StoreBatch& b,
                              ChangeKind kind = ChangeKind::storeMutated) {
        if (b.empty()) return revision();
        return mutate(
            [&](State& s) {
                if (b.schema) s.schema = std::make_shared<ContextSchema>(*b.schema);
                if (b.pricingVersion) s.pricingVersion = *b.pricingVersion;
                for (const auto& rid : b.deleteRuleIds) {
                    s.rules.erase(rid);
                    for (auto& [tid, t] : s.toggles) detach(t, rid);
                }
                for (const auto& tid : b.deleteToggleIds) {
                    s.toggles.erase(tid);
                    for (auto& [rid, r] : s.rules) r.attachedFeatures.erase(tid);
                }
                for (const auto& r : b.upsertRules) s.rules[r.id] = r;
                for (auto t : b.upsertToggles) {
                    if (t.environments.empty()) t.environments = {"default"};
                    s.toggles[t.id] = t;
                }
                // batches must arrive link-consistent; repair nothing here
            },
            kind);
    }

private:
    struct State {
        std::map<std::string, FeatureToggle> toggles;
        std::map<std::string, Rule> rules;
        std::shared_ptr<const ContextSchema> schema = std::make_shared<ContextSchema>();
        std::string pricingVersion;
    };

    static void attach(FeatureToggle& t, const std::string& rid) {
        if (std::find(t.ruleIds.begin(), t.ruleIds.end(), rid) == t.ruleIds.end())
            t.ruleIds.push_back(rid);
    }
    static void detach(FeatureToggle& t, const std::string& rid) {
        t.ruleIds.erase(std::remove(t.ruleIds.begin(), t.ruleIds.end(), rid), t.ruleIds.end());
    }

    static void check_no_cycle(const State& s, const std::string& child,
                               const std::string& parent) {
        std::set<std::string> seen{child};
        std::string cur = parent;
        while (true) {
            if (!seen.insert(cur).second)
                throw Error(Errc::CycleError, "dependency of '" + child + "' on '" + parent +
                                                  "' would create a cycle");
            auto it = s.toggles.find(cur);
            if (it == s.toggles.end() || !it->second.dependsOn) return;
            cur = *it->second.dependsOn;
        }
    }

    /// Validates and compiles a state into an immutable snapshot. Reuses the
    /// previous snapshot's compiled expressions when source and schema are
    /// unchanged.
    Snapshot compile_state(const State& s, std::uint64_t revision,
                           const std::string& pricingVersion,
                           const Snapshot& previous = nullptr) const {
        auto snap = std::make_shared<StoreSnapshot>();
        snap->toggles = s.toggles;
        snap->rules = s.rules;
        snap->contextSchema = s.schema;
        snap->revision = revision;
        snap->pricingVersion = pricingVersion;
        bool same_schema = previous && previous->contextSchema == s.schema;
        for (const auto& [id, r] : s.rules) {
            if (same_schema) {
                const Rule* old = previous->find_rule(id);
                if (old && old->expressionSource == r.expressionSource) {
                    snap->compiledRules[id] = previous->compiledRules.at(id);
                    continue;
                }
            }
            try {
                snap->compiledRules[id] = compile_expression(r.expressionSource, *s.schema);
            } catch (const Error& e) {
                throw Error(Errc::ExpressionError,
                            "rule '" + id + "': " + e.message(), e.detail());
            }
        }
        auto problems = audit(*snap);
        if (!problems.empty())
            throw Error(Errc::ConsistencyError, problems.front());
        return snap;
    }

    template <typename F>
    std::uint64_t mutate(F&& apply, ChangeKind kind = ChangeKind::storeMutated) {
        std::lock_guard writer(write_mutex_);
        Snapshot cur = snapshot();
        State next;
        next.toggles = cur->toggles;
        next.rules = cur->rules;
        next.schema = cur->contextSchema;
        next.pricingVersion = cur->pricingVersion;
        apply(next);
        Snapshot snap = compile_state(next, cur->revision + 1, next.pricingVersion, cur);
        persist(*snap); // durable before the new revision becomes visible
        {
            std::unique_lock lk(snap_mutex_);
            snap_ = snap;
        }
        notify({kind, snap->revision, snap->pricingVersion, now_ms()});
        return snap->revision;
    }

    static std::int64_t now_ms() {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }

    void notify(const ChangeEvent& ev) {
        std::vector<Listener> fns;
        {
            std::lock_guard lk(listener_mutex_);
            fns = listeners_;
        }
        for (const auto& fn : fns) {
            try {
                fn(ev);
            } catch (...) {
                // listeners must not break the mutation path
            }
        }
    }

    void persist(const StoreSnapshot& s) const {
        std::string body = snapshot_to_json(s).dump(2);
        body += "\n";
        std::filesystem::path tmp = file_;
        tmp += ".tmp";
        int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd < 0) throw Error(Errc::IoError, "cannot write '" + tmp.string() + "'");
        size_t off = 0;
        while (off < body.size()) {
            ssize_t n = ::write(fd, body.data() + off, body.size() - off);
            if (n < 0) {
                ::close(fd);
                throw Error(Errc::IoError, "write failed on '" + tmp.string() + "'");
            }
            off += static_cast<size_t>(n);
        }
        if (::fsync(fd) != 0) {
            ::close(fd);
            throw Error(Errc::IoError, "fsync failed on '" + tmp.string() + "'");
        }
        ::close(fd);
        std::error_code ec;
        std::filesystem::rename(tmp, file_, ec);
        if (ec) throw Error(Errc::IoError, "atomic replace of '" + file_.string() + "' failed");
        // make the rename itself durable
        if (file_.has_parent_path()) {
            int dfd = ::open(file_.parent_path().c_str(), O_RDONLY);
            if (dfd >= 0) {
                ::fsync(dfd);
                ::close(dfd);
            }
        }
    }

    void load() {
        std::ifstream in(file_, std::ios::binary);
        if (!in) throw Error(Errc::IoError, "cannot read store file '" + file_.string() + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::IoError, "store file '" + file_.string() + "' is corrupt",
                        e.what());
        }
        State s;
        std::uint64_t rev = 0;
        try {
            rev = j.at("revision").get<std::uint64_t>();
            if (j.contains("pricingVersion"))
                s.pricingVersion = j["pricingVersion"].get<std::string>();
            s.schema = std::make_shared<ContextSchema>(ContextSchema::from_json(j.at("contextSchema")));
            for (const auto& t : j.at("toggles")) {
                FeatureToggle ft = toggle_from_json(t);
                s.toggles[ft.id] = std::move(ft);
            }
            for (const auto& r : j.at("rules")) {
                Rule rl = rule_from_json(r);
                s.rules[rl.id] = std::move(rl);
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::IoError, "store file '" + file_.string() + "' is malformed",
                        e.what());
        }
        snap_ = compile_state(s, rev, s.pricingVersion);
    }

    std::filesystem::path file_;
    mutable std::shared_mutex snap_mutex_;
    std::mutex write_mutex_;
    std::mutex listener_mutex_;
    std::vector<Listener> listeners_;
    Snapshot snap_;
};

} // namespace horizon
