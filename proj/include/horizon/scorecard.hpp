// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0
//
// Capability conformance scorecard: the built-in capability matrix, tool
// assessments, L0-L3 support-level derivation, comparison reports, and a
// self-assessment that probes this engine against its own matrix.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "horizon/compiler.hpp"
#include "horizon/errors.hpp"
#include "horizon/evaluator.hpp"
#include "horizon/service.hpp"
#include "horizon/store.hpp"

namespace horizon {

enum class Area {
    featureManagement,
    evaluationConfiguration,
    featureEvaluation,
    integration,
    pricingDrivenAutomation,
};

constexpr std::string_view area_title(Area a) {
    switch (a) {
    case Area::featureManagement: return "Feature Management";
    case Area::evaluationConfiguration: return "Evaluation Configuration";
    case Area::featureEvaluation: return "Feature Evaluation";
    case Area::integration: return "Integration";
    case Area::pricingDrivenAutomation: return "Pricing-Driven Automation";
    }
    return "?";
}

enum class Requirement { required, optional, partialTolerated };

enum class Support { none = 0, partial = 1, full = 2 };

constexpr std::string_view support_name(Support s) {
    switch (s) {
    case Support::none: return "none";
    case Support::partial: return "partial";
    case Support::full: return "full";
    }
    return "?";
}

inline Support support_from_name(const std::string& s) {
    if (s == "full") return Support::full;
    if (s == "partial") return Support::partial;
    if (s == "none") return Support::none;
    throw Error(Errc::SchemaError, "unknown support value '" + s + "' (full|partial|none)");
}

constexpr std::string_view support_symbol(Support s) {
    switch (s) {
    case Support::none: return "✗"; // ✗
    case Support::partial: return "~";
    case Support::full: return "✓"; // ✓
    }
    return "?";
}

struct Capability {
    std::string id;
    Area area;
    std::string title;
    Requirement requirement;
};

/// The built-in matrix: 28 capabilities across five areas.
inline const std::vector<Capability>& capability_matrix() {
    static const std::vector<Capability> m = {
        {"featureCreate", Area::featureManagement, "Feature CREATE", Requirement::required},
        {"featureRead", Area::featureManagement, "Feature READ", Requirement::required},
        {"featureUpdate", Area::featureManagement, "Feature UPDATE", Requirement::required},
        {"featureDelete", Area::featureManagement, "Feature DELETE", Requirement::required},
        {"ruleCreate", Area::featureManagement, "Rule CREATE", Requirement::required},
        {"ruleRead", Area::featureManagement, "Rule READ", Requirement::required},
        {"ruleUpdate", Area::featureManagement, "Rule UPDATE", Requirement::required},
        {"ruleDelete", Area::featureManagement, "Rule DELETE", Requirement::required},
        {"featureDependencyManagement", Area::featureManagement,
         "Feature dependency management", Requirement::partialTolerated},
        {"centralizedFeatureManagement", Area::featureManagement,
         "Centralized feature management", Requirement::required},

        {"dynamicFeatureEvaluation", Area::evaluationConfiguration,
         "Dynamic feature evaluation", Requirement::required},
        {"booleanValueSupport", Area::evaluationConfiguration, "Boolean value support",
         Requirement::required},
        {"numericValueSupport", Area::evaluationConfiguration, "Numeric value support",
         Requirement::required},
        {"textValueSupport", Area::evaluationConfiguration, "Text value support",
         Requirement::required},
        {"contextAwareEvaluation", Area::evaluationConfiguration, "Context-aware evaluation",
         Requirement::required},
        {"customAttributes", Area::evaluationConfiguration, "Custom attributes for evaluations",
         Requirement::required},
        {"complexLogicalEvaluations", Area::evaluationConfiguration,
         "Complex logical evaluations", Requirement::required},

        {"singleFeatureEvaluation", Area::featureEvaluation, "Single feature evaluation",
         Requirement::required},
        {"multiFeatureEvaluation", Area::featureEvaluation, "Multi-feature evaluation",
         Requirement::partialTolerated},
        {"defaultValues", Area::featureEvaluation, "Default values support",
         Requirement::required},
        {"standardizedBooleanResults", Area::featureEvaluation, "Standardized boolean results",
         Requirement::required},

        {"serverSDK", Area::integration, "Server SDK", Requirement::required},
        {"clientSDK", Area::integration, "Client SDK", Requirement::required},
        {"apiBasedIntegration", Area::integration, "API-based integration",
         Requirement::optional},
        {"secureCommunication", Area::integration, "Secure communication",
         Requirement::required},

        {"pricingModelSupport", Area::pricingDrivenAutomation, "Support of pricing model",
         Requirement::required},
        {"pricingDrivenToggleGeneration", Area::pricingDrivenAutomation,
         "Pricing-driven toggle generation", Requirement::required},
        {"hotContextChangeManagement", Area::pricingDrivenAutomation,
         "Hot context change management", Requirement::required},
    };
    return m;
}

inline const Capability* find_capability(const std::string& id) {
    for (const auto& c : capability_matrix())
        if (c.id == id) return &c;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Assessments
// ---------------------------------------------------------------------------

struct ToolAssessment {
    std::string toolName;
    std::map<std::string, Support> scores;
    std::map<std::string, std::string> notes;
};

/// Scores must cover every capability exactly once.
inline void validate_assessment(const ToolAssessment& a) {
    for (const auto& c : capability_matrix())
        if (!a.scores.count(c.id))
            throw Error(Errc::IncompleteAssessment,
                        "assessment '" + a.toolName + "' is missing a score for '" + c.id + "'");
    for (const auto& [id, s] : a.scores)
        if (!find_capability(id))
            throw Error(Errc::IncompleteAssessment,
                        "assessment '" + a.toolName + "' scores unknown capability '" + id + "'");
}

inline ToolAssessment assessment_from_json(const nlohmann::json& j) {
    ToolAssessment a;
    if (!j.is_object() || !j.contains("tool") || !j.contains("scores"))
        throw Error(Errc::SchemaError, "assessment needs 'tool' and 'scores'");
    a.toolName = j["tool"].get<std::string>();
    for (const auto& [id, s] : j["scores"].items())
        a.scores[id] = support_from_name(s.get<std::string>());
    if (j.contains("notes"))
        for (const auto& [id, n] : j["notes"].items()) a.notes[id] = n.get<std::string>();
    validate_assessment(a);
    return a;
}

inline ToolAssessment load_assessment_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read assessment file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (path.extension() == ".json")
        return assessment_from_json(nlohmann::json::parse(ss.str()));
    YAML::Node root;
    try {
        root = YAML::Load(ss.str());
    } catch (const YAML::ParserException& e) {
        throw Error(Errc::SyntaxError, path.string() + ":" + std::to_string(e.mark.line + 1) +
                                           ": " + e.msg);
    }
    ToolAssessment a;
    if (!root["tool"] || !root["scores"])
        throw Error(Errc::SchemaError, "assessment '" + path.string() + "' needs tool and scores");
    a.toolName = root["tool"].as<std::string>();
    for (const auto& kv : root["scores"])
        a.scores[kv.first.as<std::string>()] = support_from_name(kv.second.as<std::string>());
    if (root["notes"])
        for (const auto& kv : root["notes"])
            a.notes[kv.first.as<std::string>()] = kv.second.as<std::string>();
    validate_assessment(a);
    return a;
}

// ---------------------------------------------------------------------------
// Level derivation and compliance
// ---------------------------------------------------------------------------

enum class SupportLevel { L0 = 0, L1 = 1, L2 = 2, L3 = 3 };

constexpr std::string_view level_name(SupportLevel l) {
    switch (l) {
    case SupportLevel::L0: return "L0";
    case SupportLevel::L1: return "L1";
    case SupportLevel::L2: return "L2";
    case SupportLevel::L3: return "L3";
    }
    return "?";
}

struct LevelRequirement {
    std::string capability;
    Support minimum;
};

struct LevelRule {
    SupportLevel level;
    std::vector<LevelRequirement> requirements; // cumulative on top of lower levels
};

/// Level formulas as data, so alternative derivations can be configured.
inline const std::vector<LevelRule>& default_level_rules() {
    static const std::vector<LevelRule> rules = {
        {SupportLevel::L1,
         {{"centralizedFeatureManagement", Support::full},
          {"dynamicFeatureEvaluation", Support::full}}},
        {SupportLevel::L2,
         {{"contextAwareEvaluation", Support::full},
          {"singleFeatureEvaluation", Support::full}}},
        {SupportLevel::L3,
         {{"pricingModelSupport", Support::full},
          {"pricingDrivenToggleGeneration", Support::full},
          {"hotContextChangeManagement", Support::partial}}},
    };
    return rules;
}

inline SupportLevel derive_level(const ToolAssessment& a,
                                 const std::vector<LevelRule>& rules = default_level_rules()) {
    validate_assessment(a);
    SupportLevel level = SupportLevel::L0;
    for (const auto& rule : rules) {
        for (const auto& req : rule.requirements)
            if (a.scores.at(req.capability) < req.minimum) return level;
        level = rule.level;
    }
    return level;
}

struct ComplianceReport {
    bool compliant = false;
    std::vector<std::string> gaps; // capability ids in matrix order
};

/// Compliant iff every required capability is full and every
/// partial-tolerated one is at least partial. Optional capabilities never gap.
inline ComplianceReport check_compliance(const ToolAssessment& a) {
    validate_assessment(a);
    ComplianceReport r;
    for (const auto& c : capability_matrix()) {
        Support s = a.scores.at(c.id);
        bool ok = true;
        if (c.requirement == Requirement::required) ok = s == Support::full;
        else if (c.requirement == Requirement::partialTolerated) ok = s >= Support::partial;
        if (!ok) r.gaps.push_back(c.id);
    }
    r.compliant = r.gaps.empty();
    return r;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { markdown, csv, json };

inline ReportFormat report_format_from_name(const std::string& s) {
    if (s == "md" || s == "markdown") return ReportFormat::markdown;
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw Error(Errc::ConfigError, "unknown report format '" + s + "' (md|csv|json)");
}

namespace detail {

inline std::string render_markdown(const std::vector<ToolAssessment>& as) {
    std::string out = "| Capability |";
    for (const auto& a : as) out += " " + a.toolName + " |";
    out += "\n| --- |";
    for (size_t i = 0; i < as.size(); ++i) out += " --- |";
    out += "\n";
    Area current{};
    bool first = true;
    for (const auto& c : capability_matrix()) {
        if (first || c.area != current) {
            current = c.area;
            first = false;
            out += "| **" + std::string(area_title(current)) + "** |";
            for (size_t i = 0; i < as.size(); ++i) out += "  |";
            out += "\n";
        }
        out += "| " + c.title + " |";
        for (const auto& a : as)
            out += " " + std::string(support_symbol(a.scores.at(c.id))) + " |";
        out += "\n";
    }
    out += "| **Derived level** |";
    for (const auto& a : as) out += " " + std::string(level_name(derive_level(a))) + " |";
    out += "\n| **Compliant** |";
    for (const auto& a : as) out += std::string(" ") + (check_compliance(a).compliant ? "yes" : "no") + " |";
    out += "\n";
    return out;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline std::string render_csv(const std::vector<ToolAssessment>& as) {
    std::string out = "area,capability";
    for (const auto& a : as) out += "," + csv_escape(a.toolName);
    out += "\n";
    for (const auto& c : capability_matrix()) {
        out += csv_escape(std::string(area_title(c.area))) + "," + csv_escape(c.title);
        for (const auto& a : as) out += "," + std::string(support_symbol(a.scores.at(c.id)));
        out += "\n";
    }
    out += ",Derived level";
    for (const auto& a : as) out += "," + std::string(level_name(derive_level(a)));
    out += "\n,Compliant";
    for (const auto& a : as) out += std::string(",") + (check_compliance(a).compliant ? "yes" : "no");
    out += "\n";
    return out;
}

inline std::string render_json(const std::vector<ToolAssessment>& as) {
    nlohmann::json doc;
    doc["tools"] = nlohmann::json::array();
    for (const auto& a : as) doc["tools"].push_back(a.toolName);
    doc["areas"] = nlohmann::json::array();
    nlohmann::json* area_node = nullptr;
    Area current{};
    bool first = true;
    for (const auto& c : capability_matrix()) {
        if (first || c.area != current) {
            current = c.area;
            first = false;
            doc["areas"].push_back({{"area", std::string(area_title(current))},
                                    {"capabilities", nlohmann::json::array()}});
            area_node = &doc["areas"].back();
        }
        nlohmann::json row{{"id", c.id},
                           {"title", c.title},
                           {"requirement", c.requirement == Requirement::required ? "required"
                                           : c.requirement == Requirement::optional
                                               ? "optional"
                                               : "partialTolerated"},
                           {"cells", nlohmann::json::object()}};
        for (const auto& a : as)
            row["cells"][a.toolName] = std::string(support_symbol(a.scores.at(c.id)));
        (*area_node)["capabilities"].push_back(std::move(row));
    }
    doc["levels"] = nlohmann::json::object();
    doc["compliance"] = nlohmann::json::object();
    for (const auto& a : as) {
        doc["levels"][a.toolName] = std::string(level_name(derive_level(a)));
        auto rep = check_compliance(a);
        doc["compliance"][a.toolName] = {{"compliant", rep.compliant}, {"gaps", rep.gaps}};
    }
    return doc.dump(2) + "\n";
}

} // namespace detail

/// One row per capability grouped by area in matrix order, one column per
/// tool, cells in {✓, ~, ✗}, with derived level and compliance appended.
inline std::string render_report(const std::vector<ToolAssessment>& assessments,
                                 ReportFormat format) {
    if (assessments.empty())
        throw Error(Errc::ConfigError, "at least one assessment is required");
    for (const auto& a : assessments) validate_assessment(a);
    switch (format) {
    case ReportFormat::markdown: return detail::render_markdown(assessments);
    case ReportFormat::csv: return detail::render_csv(assessments);
    case ReportFormat::json: return detail::render_json(assessments);
    }
    throw Error(Errc::ConfigError, "unknown report format");
}

// ---------------------------------------------------------------------------
// Self-assessment
// ---------------------------------------------------------------------------

struct SelfAssessOptions {
    bool watcherEnabled = true;
    bool deletionEnabled = true;
    std::chrono::milliseconds watcherInterval{25};
};

namespace detail {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::mt19937_64 rng(std::random_device{}());
        path = std::filesystem::temp_directory_path() /
               ("horizon-probe-" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

inline const char* probe_pricing_yaml() {
    return R"(saasName: probe
version: "1"
features:
  - name: alpha
    kind: functional
  - name: beta
    kind: functional
usageLimits:
  - name: maxWidgets
    feature: alpha
    unit: widgets
    contextAttribute: usage.widgets
plans:
  - name: FREE
    features: {alpha: true, beta: false}
    usageLimits: {maxWidgets: 10}
  - name: PAID
    features: {alpha: true, beta: true}
    usageLimits: {maxWidgets: 100}
addOns:
  - name: extra
    availableFor: [FREE, PAID]
    usageLimitExtensions: {maxWidgets: 500}
)";
}

template <typename F>
inline void probe(const std::string& capability, F&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        throw Error(Errc::ProbeFailure, "probe for '" + capability + "' failed: " + e.what(),
                    capability);
    }
}

} // namespace detail

/// Scores this engine against the built-in matrix by running scripted probes
/// (CRUD round-trips, expression typing, bulk-vs-single equality, hot reload,
/// token integrity). Throws Error{ProbeFailure} naming the capability when a
/// probe breaks; disabled subsystems score none instead.
inline ToolAssessment self_assess(const SelfAssessOptions& opt = {}) {
    using detail::probe;
    detail::TempDir tmp;

    ToolAssessment a;
    a.toolName = "horizon";
    auto score = [&](const std::string& id, Support s, const std::string& note) {
        a.scores[id] = s;
        a.notes[id] = note;
    };

    PricingModel pricing = parse_pricing(detail::probe_pricing_yaml());

    probe("pricingModelSupport", [&] {
        if (pricing.features.size() != 2 || configuration_space(pricing) != 4)
            throw Error(Errc::ProbeFailure, "pricing parse mismatch");
        score("pricingModelSupport", Support::full,
              "parses and validates the YAML pricing model");
    });

    ToggleStore store(tmp.path / "store.json");

    probe("pricingDrivenToggleGeneration", [&] {
        auto sync = sync_store(store, pricing);
        if (sync.plan.togglesToCreate.size() != 2 || !sync_store(store, pricing).plan.empty())
            throw Error(Errc::ProbeFailure, "generation not idempotent");
        score("pricingDrivenToggleGeneration", Support::full,
              "toggles, rules, and schema generated and reconciled from the pricing");
    });

    auto paid_ctx = [&](double widgets) {
        nlohmann::json j = entitlements_to_context(resolve_entitlements(pricing, {"PAID", {}}));
        j["usage"]["widgets"] = widgets;
        return EvaluationContext::from_json(j, store.snapshot()->contextSchema);
    };

    probe("centralizedFeatureManagement", [&] {
        ToggleStore reopened(tmp.path / "store.json");
        if (!snapshot_content_equal(*reopened.snapshot(), *store.snapshot()))
            throw Error(Errc::ProbeFailure, "store not durable across reopen");
        score("centralizedFeatureManagement", Support::full,
              "definitions live in an external durable store, not application code");
    });

    probe("featureCreate", [&] {
        FeatureToggle t;
        t.id = "probe-feature";
        t.description = "created by self-assessment";
        store.upsert_feature(t);
        score("featureCreate", Support::full, "created via upsert_feature and PUT /features");
    });
    probe("featureRead", [&] {
        if (store.read_feature("probe-feature").description.empty())
            throw Error(Errc::ProbeFailure, "read back empty");
        score("featureRead", Support::full, "read back after write");
    });
    probe("featureUpdate", [&] {
        FeatureToggle t = store.read_feature("probe-feature");
        t.environments = {"default", "prod"};
        store.upsert_feature(t);
        if (store.read_feature("probe-feature").environments.size() != 2)
            throw Error(Errc::ProbeFailure, "update not visible");
        score("featureUpdate", Support::full, "environments narrowed/extended in place");
    });
    if (opt.deletionEnabled) {
        probe("featureDelete", [&] {
            store.delete_feature("probe-feature");
            try {
                store.read_feature("probe-feature");
                throw Error(Errc::ProbeFailure, "toggle survived deletion");
            } catch (const Error& e) {
                if (e.code() != Errc::NotFound) throw;
            }
            // programmatic delete + re-create must work
            FeatureToggle t;
            t.id = "probe-feature";
            store.upsert_feature(t);
            store.delete_feature("probe-feature");
            score("featureDelete", Support::full,
                  "hard delete and re-create through the API, no archival");
        });
    } else {
        score("featureDelete", Support::none, "deletion disabled in this build");
    }

    // rule CRUD against a declared custom attribute
    {
        ContextSchema schema = *store.snapshot()->contextSchema;
        schema.declare("user.tier", AttrType::string());
        schema.declare("user.tags", AttrType::string_list());
        store.set_context_schema(schema);
    }
    probe("ruleCreate", [&] {
        FeatureToggle t;
        t.id = "probe-rule-host";
        store.upsert_feature(t);
        Rule r;
        r.id = "probe-rule";
        r.expressionSource = "user.tier == \"gold\"";
        r.attachedFeatures = {"probe-rule-host"};
        store.upsert_rule(r);
        score("ruleCreate", Support::full, "rule created and typechecked against the schema");
    });
    probe("ruleRead", [&] {
        if (store.read_rule("probe-rule").expressionSource.empty())
            throw Error(Errc::ProbeFailure, "rule read back empty");
        score("ruleRead", Support::full, "read back after write");
    });
    probe("ruleUpdate", [&] {
        Rule r = store.read_rule("probe-rule");
        r.expressionSource = "user.tier == \"silver\"";
        store.upsert_rule(r);
        if (store.read_rule("probe-rule").expressionSource.find("silver") == std::string::npos)
            throw Error(Errc::ProbeFailure, "rule update not visible");
        score("ruleUpdate", Support::full, "expression and attachments updated in place");
    });
    probe("ruleDelete", [&] {
        store.delete_rule("probe-rule");
        if (!store.read_feature("probe-rule-host").ruleIds.empty())
            throw Error(Errc::ProbeFailure, "rule not detached on delete");
        score("ruleDelete", Support::full, "deleted and detached from all toggles");
    });

    probe("featureDependencyManagement", [&] {
        FeatureToggle parent;
        parent.id = "probe-parent";
        Rule gate;
        gate.id = "probe-parent-gate";
        gate.expressionSource = "user.tier == \"gold\"";
        FeatureToggle child;
        child.id = "probe-child";
        Rule probe_rule;
        probe_rule.id = "probe-child-rule";
        probe_rule.expressionSource = "user.tier == \"gold\"";
        store.upsert_feature(parent);
        store.upsert_feature(child);
        gate.attachedFeatures = {"probe-parent"};
        probe_rule.attachedFeatures = {"probe-child"};
        store.upsert_rule(gate);
        store.upsert_rule(probe_rule);
        store.link_dependency("probe-child", "probe-parent");

        int child_rule_runs = 0;
        EvalHooks hooks;
        hooks.onRuleEvaluated = [&](const std::string& rid, const std::string&) {
            if (rid == "probe-child-rule") ++child_rule_runs;
        };
        auto snap = store.snapshot();
        EvaluationContext ctx(snap->contextSchema);
        ctx.set("user.tier", Value("bronze"));
        auto res = evaluate_feature(*snap, "probe-child", ctx, "default", &hooks);
        if (res.reason != Reason::parentDisabled || child_rule_runs != 0)
            throw Error(Errc::ProbeFailure, "child evaluated despite disabled parent");
        score("featureDependencyManagement", Support::full,
              "dependent toggles short out before any rule executes");
    });

    auto snap = store.snapshot();
    probe("dynamicFeatureEvaluation", [&] {
        auto ctx_width = [&](double w) {
            auto ctx = paid_ctx(w);
            return evaluate_feature(*snap, "alpha", ctx).value;
        };
        if (!ctx_width(50) || ctx_width(5000))
            throw Error(Errc::ProbeFailure, "verdict did not follow the runtime context");
        score("dynamicFeatureEvaluation", Support::full,
              "rule verdicts change with runtime data, no redeploy");
    });

    probe("booleanValueSupport", [&] {
        auto t = compile_expression("user.subscription.features[\"beta\"] == true",
                                    *snap->contextSchema);
        if (!evaluate(t, paid_ctx(1)))
            throw Error(Errc::ProbeFailure, "boolean comparison failed");
        score("booleanValueSupport", Support::full, "boolean attributes compare natively");
    });
    probe("numericValueSupport", [&] {
        for (const char* src : {"usage.widgets < 100", "usage.widgets <= 99",
                                "usage.widgets > 98", "usage.widgets >= 99",
                                "usage.widgets == 99", "usage.widgets != 100"})
            if (!evaluate(compile_expression(src, *snap->contextSchema), paid_ctx(99)))
                throw Error(Errc::ProbeFailure, std::string("numeric operator failed: ") + src);
        score("numericValueSupport", Support::full, "all six comparison operators");
    });
    probe("textValueSupport", [&] {
        ContextSchema s = *snap->contextSchema;
        EvaluationContext ctx(std::make_shared<ContextSchema>(s));
        ctx.set("user.tier", Value("gold-plus"));
        for (const char* src :
             {"user.tier == \"gold-plus\"", "user.tier != \"silver\"",
              "user.tier.includes(\"gold\")", "user.tier.contains(\"plus\")",
              "user.tier.matches(\"^gold\")"})
            if (!evaluate(compile_expression(src, s), ctx))
                throw Error(Errc::ProbeFailure, std::string("text operation failed: ") + src);
        score("textValueSupport", Support::full,
              "equality, substring, containment, and regex matching");
    });
    probe("contextAwareEvaluation", [&] {
        auto free_ctx = entitlements_to_context(resolve_entitlements(pricing, {"FREE", {}}));
        free_ctx["usage"]["widgets"] = 1;
        auto ctx = EvaluationContext::from_json(free_ctx, snap->contextSchema);
        bool beta_free = evaluate_feature(*snap, "beta", ctx).value;
        bool beta_paid = evaluate_feature(*snap, "beta", paid_ctx(1)).value;
        if (beta_free || !beta_paid)
            throw Error(Errc::ProbeFailure, "subscription attributes did not drive the verdict");
        score("contextAwareEvaluation", Support::full,
              "evaluations read subscription data supplied at runtime");
    });
    probe("customAttributes", [&] {
        ContextSchema s = *snap->contextSchema;
        s.declare("org.labels", AttrType::string_list());
        EvaluationContext ctx(std::make_shared<ContextSchema>(s));
        ctx.set("org.labels", Value(Value::List{"pilot", "design-partner"}));
        if (!evaluate(compile_expression("org.labels.includes(\"pilot\")", s), ctx))
            throw Error(Errc::ProbeFailure, "custom list attribute not usable");
        score("customAttributes", Support::full,
              "operator-defined attributes, including lists and maps");
    });
    probe("complexLogicalEvaluations", [&] {
        auto ast = parse_expression("usage.widgets < 10 || (usage.widgets < 1000 && "
                                    "!user.subscription.features[\"beta\"])");
        if (ast->kind != ExprKind::Or)
            throw Error(Errc::ProbeFailure, "no native OR node in the AST");
        auto typed = typecheck(ast, *snap->contextSchema);
        auto ctx = paid_ctx(5);
        evaluate(typed, ctx);
        score("complexLogicalEvaluations", Support::full,
              "native AND/OR/NOT composition, no De Morgan rewriting");
    });

    probe("singleFeatureEvaluation", [&] {
        auto r = evaluate_feature(*snap, "alpha", paid_ctx(7));
        if (r.featureId != "alpha") throw Error(Errc::ProbeFailure, "wrong feature evaluated");
        score("singleFeatureEvaluation", Support::full, "per-feature queries with context");
    });
    probe("multiFeatureEvaluation", [&] {
        auto ctx = paid_ctx(7);
        auto payload = evaluate_all(*snap, ctx);
        for (const auto& [id, r] : payload.results)
            if (!(r == evaluate_feature(*snap, id, ctx)))
                throw Error(Errc::ProbeFailure, "bulk entry diverges from single evaluation");
        auto again = reevaluate_subset(*snap, ctx, {}, payload);
        if (again.results != payload.results)
            throw Error(Errc::ProbeFailure, "no-op re-evaluation changed results");
        score("multiFeatureEvaluation", Support::full,
              "bootstrap payloads plus subset re-evaluation");
    });
    probe("defaultValues", [&] {
        FeatureToggle t;
        t.id = "probe-default";
        t.defaultValue = true;
        store.upsert_feature(t);
        Rule r;
        r.id = "probe-default-rule";
        r.expressionSource = "user.tier == \"gold\"";
        r.attachedFeatures = {"probe-default"};
        store.upsert_rule(r);
        auto s2 = store.snapshot();
        EvaluationContext ctx(s2->contextSchema); // user.tier missing
        auto res = evaluate_feature(*s2, "probe-default", ctx);
        if (!res.value || res.reason != Reason::defaultUsed)
            throw Error(Errc::ProbeFailure, "fallback value not used on missing data");
        score("defaultValues", Support::full, "evaluation failures fall back per toggle");
    });
    probe("standardizedBooleanResults", [&] {
        auto r = evaluate_feature(*snap, "alpha", paid_ctx(25));
        if (r.value != true && r.value != false)
            throw Error(Errc::ProbeFailure, "non-boolean result");
        score("standardizedBooleanResults", Support::full,
              "every evaluation resolves to a boolean regardless of rule types");
    });

    probe("serverSDK", [&] {
        // library embedding is the server-side integration path
        auto res = evaluate_feature(*snap, "alpha", paid_ctx(3));
        if (res.snapshotRevision != snap->revision)
            throw Error(Errc::ProbeFailure, "embedded evaluation inconsistent");
        score("serverSDK", Support::full, "embedded library evaluates per request");
    });
    probe("clientSDK", [&] {
        auto ctx = paid_ctx(3);
        auto payload = evaluate_all(*snap, ctx);
        auto refreshed_json = entitlements_to_context(resolve_entitlements(pricing, {"PAID", {}}));
        refreshed_json["usage"]["widgets"] = 5000;
        auto refreshed_ctx = EvaluationContext::from_json(refreshed_json, snap->contextSchema);
        auto updated = reevaluate_subset(*snap, refreshed_ctx, {"usage.widgets"}, payload);
        if (updated.results.at("alpha").value)
            throw Error(Errc::ProbeFailure, "cached payload not updated on context change");
        score("clientSDK", Support::full,
              "startup pre-evaluation with cached results and subset refresh");
    });

    probe("apiBasedIntegration", [&] {
        ServiceConfig cfg;
        cfg.port = 0;
        cfg.secret = "probe-secret";
        cfg.storePath = tmp.path / "api-store.json";
        ApiService svc(cfg);
        svc.start();
        sync_store(svc.store(), pricing);
        httplib::Client client("127.0.0.1", svc.port());
        nlohmann::json body{{"featureId", "alpha"},
                            {"context", entitlements_to_context(
                                            resolve_entitlements(pricing, {"PAID", {}}))},
                            {"subject", "probe"}};
        body["context"]["usage"]["widgets"] = 3;
        auto res = client.Post("/evaluate", body.dump(), "application/json");
        if (!res || res->status != 200)
            throw Error(Errc::ProbeFailure, "HTTP evaluation failed");
        auto payload = verify_token(nlohmann::json::parse(res->body), cfg.secret);
        if (!payload.at("value").get<bool>())
            throw Error(Errc::ProbeFailure, "HTTP evaluation returned the wrong verdict");
        svc.stop();
        score("apiBasedIntegration", Support::full, "language-agnostic HTTP endpoints");
    });
    probe("secureCommunication", [&] {
        auto token = sign_result(nlohmann::json{{"value", true}}, "probe", "1", "probe-secret");
        verify_token(token.to_json(), "probe-secret");
        auto tampered = token;
        tampered.subject = "someone-else";
        try {
            verify_token(tampered.to_json(), "probe-secret");
            throw Error(Errc::ProbeFailure, "tampered token verified");
        } catch (const Error& e) {
            if (e.code() != Errc::SignatureInvalid) throw;
        }
        score("secureCommunication", Support::full,
              "HMAC-signed evaluations; any mutation fails verification");
    });

    if (opt.watcherEnabled) {
        probe("hotContextChangeManagement", [&] {
            auto pricing_path = tmp.path / "watched.pricing.yaml";
            {
                std::ofstream out(pricing_path);
                out << detail::probe_pricing_yaml();
            }
            ToggleStore wstore(tmp.path / "watch-store.json");
            WatcherConfig wc;
            wc.path = pricing_path;
            wc.interval = opt.watcherInterval;
            PricingWatcher watcher(wstore, wc);
            watcher.start();

            // the same request, re-resolved against whatever pricing is live
            auto verdict = [&] {
                nlohmann::json j{{"user", {{"plan", "FREE"}}}, {"usage", {{"widgets", 50}}}};
                j = enrich_context_with_subscription(j, *watcher.current());
                auto s = wstore.snapshot();
                auto ctx = EvaluationContext::from_json(j, s->contextSchema);
                return evaluate_feature(*s, "alpha", ctx).value;
            };
            if (verdict()) throw Error(Errc::ProbeFailure, "limit not enforced before reload");

            std::string updated(detail::probe_pricing_yaml());
            auto at = updated.find("maxWidgets: 10}");
            updated.replace(at, 15, "maxWidgets: 60}");
            {
                std::ofstream out(pricing_path);
                out << updated;
            }
            bool flipped = false;
            for (int i = 0; i < 200 && !flipped; ++i) {
                std::this_thread::sleep_for(std::chrono::milliseconds(10));
                flipped = verdict();
            }
            watcher.stop();
            if (!flipped)
                throw Error(Errc::ProbeFailure, "pricing change not picked up by the watcher");
            score("hotContextChangeManagement", Support::full,
                  "pricing rewrites go live via hashed polling and snapshot swap");
        });
    } else {
        score("hotContextChangeManagement", Support::none, "watcher disabled in this build");
    }

    validate_assessment(a);
    return a;
}

} // namespace horizon
