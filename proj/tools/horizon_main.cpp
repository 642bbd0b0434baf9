// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0
//
// horizon — pricing-driven feature toggling from the command line.
// Machine output goes to stdout, diagnostics to stderr. Exit codes:
// 0 success, 1 validation/evaluation error, 2 usage error.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "horizon/horizon.hpp"

namespace {

using nlohmann::json;

struct Output {
    bool as_json = false;

    void emit(const json& machine, const std::string& text) const {
        if (as_json) std::cout << machine.dump(2) << "\n";
        else std::cout << text;
    }
};

std::string read_file_or_inline(const std::string& arg) {
    if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) return arg;
    std::ifstream in(arg, std::ios::binary);
    if (!in) throw horizon::Error(horizon::Errc::IoError, "cannot read '" + arg + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_context_arg(const std::string& arg) {
    try {
        return json::parse(read_file_or_inline(arg));
    } catch (const json::exception& e) {
        throw horizon::Error(horizon::Errc::SchemaError,
                             "context is not valid JSON: " + std::string(e.what()));
    }
}

std::string describe_result(const horizon::EvaluationResult& r) {
    std::string line = r.featureId + ": " + (r.value ? "true" : "false") + " (" +
                       std::string(horizon::reason_name(r.reason));
    if (r.ruleId) line += ", rule=" + *r.ruleId;
    line += ")";
    if (r.diagnostics) line += " — " + *r.diagnostics;
    return line + "\n";
}

horizon::EvaluationContext build_context(const json& raw,
                                         const horizon::ToggleStore::Snapshot& snap,
                                         const std::string& pricingPath) {
    json ctx = raw;
    if (!pricingPath.empty()) {
        auto pricing = horizon::load_pricing_file(pricingPath);
        ctx = horizon::enrich_context_with_subscription(std::move(ctx), pricing);
    }
    return horizon::EvaluationContext::from_json(ctx, snap->contextSchema);
}

std::atomic<bool> g_shutdown{false};

void handle_signal(int) { g_shutdown = true; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pricing-driven feature toggling engine"};
    app.require_subcommand(1);

    Output out;
    std::string output_mode = "text";
    app.add_option("-o,--output", output_mode, "Output mode: text or json")
        ->check(CLI::IsMember({"text", "json"}));

    // --- pricing ------------------------------------------------------------
    auto* pricing_cmd = app.add_subcommand("pricing", "Inspect pricing documents");
    pricing_cmd->require_subcommand(1);

    std::string pricing_file;
    auto* validate_cmd = pricing_cmd->add_subcommand("validate", "Parse and validate a pricing");
    validate_cmd->add_option("file", pricing_file, "pricing YAML file")->required();

    auto* space_cmd = pricing_cmd->add_subcommand("space", "Print the configuration space");
    space_cmd->add_option("file", pricing_file, "pricing YAML file")->required();

    // --- compile --------------------------------------------------------------
    std::string compile_pricing_path, store_path;
    auto* compile_cmd = app.add_subcommand("compile", "Sync a store from a pricing");
    compile_cmd->add_option("pricing", compile_pricing_path, "pricing YAML file")->required();
    compile_cmd->add_option("--store", store_path, "store JSON file")->required();

    // --- eval / eval-all --------------------------------------------------------
    std::string eval_feature, eval_context, eval_env = "default", eval_pricing;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a single feature");
    eval_cmd->add_option("--feature", eval_feature, "feature toggle id")->required();
    eval_cmd->add_option("--context", eval_context, "context JSON (file or inline)")->required();
    eval_cmd->add_option("--env", eval_env, "environment (default: default)");
    eval_cmd->add_option("--store", store_path, "store JSON file")->required();
    eval_cmd->add_option("--pricing", eval_pricing,
                         "pricing file for resolving user.plan subscriptions");

    auto* eval_all_cmd = app.add_subcommand("eval-all", "Evaluate every visible feature");
    eval_all_cmd->add_option("--context", eval_context, "context JSON (file or inline)")->required();
    eval_all_cmd->add_option("--env", eval_env, "environment (default: default)");
    eval_all_cmd->add_option("--store", store_path, "store JSON file")->required();
    eval_all_cmd->add_option("--pricing", eval_pricing,
                             "pricing file for resolving user.plan subscriptions");

    // --- feature CRUD ---------------------------------------------------------
    auto* feature_cmd = app.add_subcommand("feature", "Feature toggle CRUD");
    feature_cmd->require_subcommand(1);
    std::string feature_id, feature_doc;
    auto* f_list = feature_cmd->add_subcommand("list", "List toggles");
    f_list->add_option("--store", store_path)->required();
    auto* f_get = feature_cmd->add_subcommand("get", "Read one toggle");
    f_get->add_option("id", feature_id)->required();
    f_get->add_option("--store", store_path)->required();
    auto* f_put = feature_cmd->add_subcommand("put", "Create or update a toggle");
    f_put->add_option("toggle", feature_doc, "toggle JSON (file or inline)")->required();
    f_put->add_option("--store", store_path)->required();
    auto* f_del = feature_cmd->add_subcommand("delete", "Delete a toggle");
    f_del->add_option("id", feature_id)->required();
    f_del->add_option("--store", store_path)->required();

    // --- rule CRUD --------------------------------------------------------------
    auto* rule_cmd = app.add_subcommand("rule", "Rule CRUD");
    rule_cmd->require_subcommand(1);
    std::string rule_id, rule_doc;
    bool rule_force = false;
    auto* r_list = rule_cmd->add_subcommand("list", "List rules");
    r_list->add_option("--store", store_path)->required();
    auto* r_get = rule_cmd->add_subcommand("get", "Read one rule");
    r_get->add_option("id", rule_id)->required();
    r_get->add_option("--store", store_path)->required();
    auto* r_put = rule_cmd->add_subcommand("put", "Create or update a rule");
    r_put->add_option("rule", rule_doc, "rule JSON (file or inline)")->required();
    r_put->add_option("--store", store_path)->required();
    auto* r_del = rule_cmd->add_subcommand("delete", "Delete a rule");
    r_del->add_option("id", rule_id)->required();
    r_del->add_option("--store", store_path)->required();
    r_del->add_flag("--force", rule_force, "delete even the sole rule of a generated toggle");

    // --- depend -------------------------------------------------------------------
    std::string depend_child, depend_parent;
    auto* depend_cmd = app.add_subcommand("depend", "Link a child toggle to a parent");
    depend_cmd->add_option("child", depend_child)->required();
    depend_cmd->add_option("parent", depend_parent)->required();
    depend_cmd->add_option("--store", store_path)->required();

    // --- serve ------------------------------------------------------------------
    horizon::ServiceConfig serve_cfg;
    std::string watch_path, serve_pricing_path;
    long poll_ms = 1000;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--port", serve_cfg.port, "port (default 8080)");
    serve_cmd->add_option("--host", serve_cfg.host, "bind address (default 127.0.0.1)");
    serve_cmd->add_option("--secret", serve_cfg.secret, "token signing secret");
    serve_cmd->add_option("--bearer", serve_cfg.bearer, "bearer token guarding CRUD endpoints");
    serve_cmd->add_option("--store", store_path)->required();
    serve_cmd->add_option("--watch", watch_path, "pricing file to watch for hot reload");
    serve_cmd->add_option("--pricing", serve_pricing_path, "pricing file to sync once at startup");
    serve_cmd->add_option("--poll-ms", poll_ms, "watch poll interval in milliseconds");

    // --- score / self-assess -----------------------------------------------------
    std::string assessments_dir, report_format = "md";
    auto* score_cmd = app.add_subcommand("score", "Render the capability comparison report");
    score_cmd->add_option("--assessments", assessments_dir, "directory of assessment files")
        ->required();
    score_cmd->add_option("--format", report_format, "md, csv, or json")
        ->check(CLI::IsMember({"md", "markdown", "csv", "json"}));

    bool no_watcher = false, no_delete = false;
    auto* assess_cmd = app.add_subcommand("self-assess", "Probe this engine against the matrix");
    assess_cmd->add_flag("--no-watcher", no_watcher, "skip the hot-reload probe");
    assess_cmd->add_flag("--no-delete", no_delete, "skip the deletion probe");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    out.as_json = output_mode == "json";

    try {
        if (*validate_cmd) {
            auto m = horizon::load_pricing_file(pricing_file);
            out.emit({{"saasName", m.name},
                      {"version", m.version},
                      {"features", m.features.size()},
                      {"plans", m.plans.size()},
                      {"addOns", m.addOns.size()},
                      {"usageLimits", m.usageLimits.size()},
                      {"valid", true}},
                     "ok: " + m.name + " v" + m.version + ": " +
                         std::to_string(m.features.size()) + " features, " +
                         std::to_string(m.plans.size()) + " plans, " +
                         std::to_string(m.addOns.size()) + " add-ons, " +
                         std::to_string(m.usageLimits.size()) + " usage limits\n");
        } else if (*space_cmd) {
            auto m = horizon::load_pricing_file(pricing_file);
            auto space = horizon::configuration_space(m);
            out.emit({{"configurationSpace", space}}, std::to_string(space) + "\n");
        } else if (*compile_cmd) {
            horizon::ToggleStore store(store_path);
            auto result = horizon::sync_store(store, horizon::load_pricing_file(compile_pricing_path));
            out.emit({{"revision", result.revision}, {"plan", result.plan.to_json()}},
                     (result.plan.empty()
                          ? "store already in sync (revision " + std::to_string(result.revision) + ")\n"
                          : "synced to revision " + std::to_string(result.revision) + ": +" +
                                std::to_string(result.plan.togglesToCreate.size()) + " toggles, -" +
                                std::to_string(result.plan.togglesToDelete.size()) + " toggles, " +
                                std::to_string(result.plan.togglesToUpdate.size()) + " updated\n"));
        } else if (*eval_cmd) {
            horizon::ToggleStore store(store_path);
            auto snap = store.snapshot();
            auto ctx = build_context(parse_context_arg(eval_context), snap, eval_pricing);
            auto r = horizon::evaluate_feature(*snap, eval_feature, ctx, eval_env);
            out.emit(r.to_json(), describe_result(r));
            return r.value ? 0 : 0; // the verdict is output, not an exit code
        } else if (*eval_all_cmd) {
            horizon::ToggleStore store(store_path);
            auto snap = store.snapshot();
            auto ctx = build_context(parse_context_arg(eval_context), snap, eval_pricing);
            auto payload = horizon::evaluate_all(*snap, ctx, eval_env);
            std::string text;
            for (const auto& [id, r] : payload.results) text += describe_result(r);
            out.emit(payload.to_json(), text);
        } else if (*f_list) {
            horizon::ToggleStore store(store_path);
            auto snap = store.snapshot();
            json arr = json::array();
            std::string text;
            for (const auto& [id, t] : snap->toggles) {
                arr.push_back(horizon::toggle_to_json(t));
                text += id + "\n";
            }
            out.emit(arr, text);
        } else if (*f_get) {
            horizon::ToggleStore store(store_path);
            auto t = store.read_feature(feature_id);
            out.emit(horizon::toggle_to_json(t), horizon::toggle_to_json(t).dump(2) + "\n");
        } else if (*f_put) {
            horizon::ToggleStore store(store_path);
            auto rev = store.upsert_feature(
                horizon::toggle_from_json(json::parse(read_file_or_inline(feature_doc))));
            out.emit({{"revision", rev}}, "stored (revision " + std::to_string(rev) + ")\n");
        } else if (*f_del) {
            horizon::ToggleStore store(store_path);
            auto rev = store.delete_feature(feature_id);
            out.emit({{"revision", rev}}, "deleted (revision " + std::to_string(rev) + ")\n");
        } else if (*r_list) {
            horizon::ToggleStore store(store_path);
            auto snap = store.snapshot();
            json arr = json::array();
            std::string text;
            for (const auto& [id, r] : snap->rules) {
                arr.push_back(horizon::rule_to_json(r));
                text += id + ": " + r.expressionSource + "\n";
            }
            out.emit(arr, text);
        } else if (*r_get) {
            horizon::ToggleStore store(store_path);
            auto r = store.read_rule(rule_id);
            out.emit(horizon::rule_to_json(r), horizon::rule_to_json(r).dump(2) + "\n");
        } else if (*r_put) {
            horizon::ToggleStore store(store_path);
            auto rev = store.upsert_rule(
                horizon::rule_from_json(json::parse(read_file_or_inline(rule_doc))));
            out.emit({{"revision", rev}}, "stored (revision " + std::to_string(rev) + ")\n");
        } else if (*r_del) {
            horizon::ToggleStore store(store_path);
            auto rev = store.delete_rule(rule_id, rule_force);
            out.emit({{"revision", rev}}, "deleted (revision " + std::to_string(rev) + ")\n");
        } else if (*depend_cmd) {
            horizon::ToggleStore store(store_path);
            auto rev = store.link_dependency(depend_child, depend_parent);
            out.emit({{"revision", rev}},
                     depend_child + " now depends on " + depend_parent + " (revision " +
                         std::to_string(rev) + ")\n");
        } else if (*serve_cmd) {
            serve_cfg.storePath = store_path;
            if (!watch_path.empty()) {
                serve_cfg.watch = true;
                serve_cfg.pricingPath = watch_path;
            } else if (!serve_pricing_path.empty()) {
                serve_cfg.pricingPath = serve_pricing_path;
            }
            serve_cfg.pollInterval = std::chrono::milliseconds(poll_ms);
            serve_cfg = horizon::ServiceConfig::from_env(serve_cfg);
            if (serve_cfg.watch) {
                horizon::WatcherConfig wc;
                wc.path = *serve_cfg.pricingPath;
                wc.interval = serve_cfg.pollInterval;
                wc = horizon::WatcherConfig::from_env(wc);
                serve_cfg.pricingPath = wc.path;
                serve_cfg.pollInterval = wc.interval;
            }
            horizon::ApiService service(serve_cfg);
            service.start();
            std::fprintf(stderr, "[horizon] serving on %s:%d (store %s)\n",
                         serve_cfg.host.c_str(), service.port(), store_path.c_str());
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            while (!g_shutdown)
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            std::fprintf(stderr, "[horizon] shutting down\n");
            service.stop();
        } else if (*score_cmd) {
            std::vector<std::filesystem::path> files;
            for (const auto& entry : std::filesystem::directory_iterator(assessments_dir)) {
                auto ext = entry.path().extension();
                if (ext == ".yaml" || ext == ".yml" || ext == ".json")
                    files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
            if (files.empty())
                throw horizon::Error(horizon::Errc::ConfigError,
                                     "no assessment files in '" + assessments_dir + "'");
            std::vector<horizon::ToolAssessment> assessments;
            for (const auto& f : files) assessments.push_back(horizon::load_assessment_file(f));
            auto fmt = horizon::report_format_from_name(report_format);
            std::string doc = horizon::render_report(assessments, fmt);
            if (out.as_json && fmt != horizon::ReportFormat::json)
                std::cout << json{{"format", report_format}, {"document", doc}}.dump(2) << "\n";
            else
                std::cout << doc;
        } else if (*assess_cmd) {
            horizon::SelfAssessOptions opt;
            opt.watcherEnabled = !no_watcher;
            opt.deletionEnabled = !no_delete;
            auto a = horizon::self_assess(opt);
            auto level = horizon::derive_level(a);
            auto comp = horizon::check_compliance(a);
            json scores = json::object(), notes = json::object();
            std::string text;
            for (const auto& c : horizon::capability_matrix()) {
                scores[c.id] = std::string(horizon::support_name(a.scores.at(c.id)));
                if (a.notes.count(c.id)) notes[c.id] = a.notes.at(c.id);
                text += c.id + ": " + std::string(horizon::support_name(a.scores.at(c.id))) + "\n";
            }
            text += "level: " + std::string(horizon::level_name(level)) + "\n";
            text += std::string("compliant: ") + (comp.compliant ? "yes" : "no") + "\n";
            for (const auto& g : comp.gaps) text += "gap: " + g + "\n";
            out.emit({{"tool", a.toolName},
                      {"scores", scores},
                      {"notes", notes},
                      {"level", std::string(horizon::level_name(level))},
                      {"compliant", comp.compliant},
                      {"gaps", comp.gaps}},
                     text);
        }
    } catch (const horizon::Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", std::string(horizon::errc_name(e.code())).c_str(),
                     e.message().c_str());
        if (!e.detail().empty()) std::fprintf(stderr, "  %s\n", e.detail().c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
