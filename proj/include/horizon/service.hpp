// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0
//
// HTTP facade over the store, evaluator, and pricing compiler. Every
// evaluation response is a SignedEvaluation; CRUD endpoints are guarded by a
// static bearer token when one is configured. Evaluations read the latest
// published snapshot per request, so a response never mixes two revisions.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "horizon/compiler.hpp"
#include "horizon/errors.hpp"
#include "horizon/evaluator.hpp"
#include "horizon/signing.hpp"
#include "horizon/store.hpp"

namespace horizon {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080; // 0 binds an ephemeral port
    std::string secret;
    std::string bearer; // empty disables CRUD auth
    std::filesystem::path storePath;
    std::optional<std::filesystem::path> pricingPath;
    std::chrono::milliseconds pollInterval{1000};
    bool watch = false;
    std::int64_t tokenTtlMs = 300'000;

    /// HORIZON_SECRET / HORIZON_BEARER override the given values.
    static ServiceConfig from_env(ServiceConfig base) {
        if (auto s = env_var("HORIZON_SECRET")) base.secret = *s;
        if (auto b = env_var("HORIZON_BEARER")) base.bearer = *b;
        return base;
    }
};

namespace detail {

inline int http_status(Errc c) {
    switch (c) {
    case Errc::NotFound:
    case Errc::UnknownFeature:
        return 404;
    case Errc::CycleError:
    case Errc::DependencyViolation:
    case Errc::ConsistencyError:
    case Errc::ConflictError:
    case Errc::SchemaConflict:
    case Errc::DanglingReference:
        return 409;
    case Errc::SignatureInvalid:
    case Errc::TokenExpired:
    case Errc::Unauthorized:
        return 401;
    case Errc::BindError:
    case Errc::IoError:
    case Errc::WatchError:
        return 500;
    default:
        return 400;
    }
}

inline void write_error(httplib::Response& res, const Error& e) {
    nlohmann::json body{{"code", std::string(errc_name(e.code()))}, {"message", e.message()}};
    if (!e.detail().empty()) body["detail"] = e.detail();
    res.status = http_status(e.code());
    res.set_content(body.dump(), "application/json");
}

/// Missing or null context means "no attributes provided".
inline nlohmann::json context_of(const nlohmann::json& body) {
    if (!body.contains("context") || body["context"].is_null())
        return nlohmann::json::object();
    return body["context"];
}

inline nlohmann::json parse_body(const httplib::Request& req) {
    try {
        return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaError, std::string("request body is not valid JSON: ") + e.what());
    }
}

} // namespace detail

class ApiService {
public:
    explicit ApiService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.secret.empty())
            throw Error(Errc::ConfigError, "service secret must not be empty "
                                           "(--secret or HORIZON_SECRET)");
        if (cfg_.storePath.empty())
            throw Error(Errc::ConfigError, "store path must not be empty");
        store_ = std::make_unique<ToggleStore>(cfg_.storePath);
        routes();
    }

    ~ApiService() { stop(); }

    /// Binds (BindError on failure), optionally starts the pricing watcher,
    /// and serves on a background thread until stop().
    void start() {
        if (cfg_.watch) {
            if (!cfg_.pricingPath)
                throw Error(Errc::ConfigError, "watch mode needs a pricing path");
            WatcherConfig wc;
            wc.path = *cfg_.pricingPath;
            wc.interval = cfg_.pollInterval;
            watcher_ = std::make_unique<PricingWatcher>(*store_, wc);
            watcher_->on_diagnostic([](const std::string& msg) {
                std::fprintf(stderr, "[horizon] watcher: %s\n", msg.c_str());
            });
            watcher_->on_reload(
                [this](std::shared_ptr<const PricingModel> m) { set_pricing(std::move(m)); });
            watcher_->start();
        } else if (cfg_.pricingPath) {
            // one-shot sync at startup when not watching
            auto m = std::make_shared<const PricingModel>(
                load_pricing_file(cfg_.pricingPath->string()));
            sync_store(*store_, *m);
            set_pricing(std::move(m));
        }

        if (cfg_.port == 0) {
            bound_port_ = svr_.bind_to_any_port(cfg_.host);
            if (bound_port_ <= 0)
                throw Error(Errc::BindError, "cannot bind an ephemeral port on " + cfg_.host);
        } else {
            if (!svr_.bind_to_port(cfg_.host, cfg_.port))
                throw Error(Errc::BindError,
                            "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
            bound_port_ = cfg_.port;
        }
        thread_ = std::thread([this] { svr_.listen_after_bind(); });
        for (int i = 0; i < 200 && !svr_.is_running(); ++i)
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        if (!svr_.is_running())
            throw Error(Errc::BindError, "server failed to start");
    }

    void stop() {
        if (watcher_) watcher_->stop();
        if (svr_.is_running()) svr_.stop();
        if (thread_.joinable()) thread_.join();
    }

    /// Blocks until stop() is called from another thread (CLI serve mode).
    void wait() {
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return bound_port_; }
    ToggleStore& store() { return *store_; }
    const ServiceConfig& config() const { return cfg_; }

private:
    using Req = httplib::Request;
    using Res = httplib::Response;

    void check_bearer(const Req& req) const {
        if (cfg_.bearer.empty()) return;
        auto auth = req.get_header_value("Authorization");
        if (auth != "Bearer " + cfg_.bearer)
            throw Error(Errc::Unauthorized, "missing or invalid bearer token");
    }

    template <typename F>
    void handle(Res& res, F&& fn) const {
        try {
            fn();
        } catch (const Error& e) {
            detail::write_error(res, e);
        } catch (const std::exception& e) {
            detail::write_error(res, Error(Errc::IoError, e.what()));
        }
    }

    static void reply(Res& res, const nlohmann::json& j, int status = 200) {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    }

    SignedEvaluation sign(nlohmann::json payload, const std::string& subject,
                          const std::string& pricingVersion) const {
        return sign_result(std::move(payload), subject, pricingVersion, cfg_.secret,
                           cfg_.tokenTtlMs);
    }

    void set_pricing(std::shared_ptr<const PricingModel> m) {
        std::lock_guard lk(pricing_mutex_);
        pricing_ = std::move(m);
    }
    std::shared_ptr<const PricingModel> pricing() const {
        std::lock_guard lk(pricing_mutex_);
        return pricing_;
    }

    /// Subscriptions named in the request (user.plan / user.addOns) are
    /// resolved against the live pricing on every call, so pricing updates
    /// take effect without the client changing anything.
    nlohmann::json enrich(nlohmann::json ctx) const {
        auto m = pricing();
        if (m) return enrich_context_with_subscription(std::move(ctx), *m);
        return ctx;
    }

    void routes() {
        svr_.Get("/healthz", [this](const Req&, Res& res) {
            handle(res, [&] {
                auto snap = store_->snapshot();
                reply(res, {{"status", "ok"},
                            {"revision", snap->revision},
                            {"pricingVersion", snap->pricingVersion}});
            });
        });

        svr_.Get("/features", [this](const Req& req, Res& res) {
            handle(res, [&] {
                check_bearer(req);
                auto snap = store_->snapshot();
                nlohmann::json out = nlohmann::json::array();
                for (const auto& [id, t] : snap->toggles) out.push_back(toggle_to_json(t));
                reply(res, out);
            });
        });

        svr_.Get(R"(/features/([^/]+))", [this](const Req& req, Res& res) {
            handle(res, [&] {
                check_bearer(req);
                reply(res, toggle_to_json(store_->read_feature(req.matches[1])));
            });
        });

        svr_.Put(R"(/features/([^/]+))", [this](const Req& req, Res& res) {
            handle(res, [&] {
                check_bearer(req);
                nlohmann::json body = detail::parse_body(req);
                std::string id = req.matches[1];
                if (!body.contains("id")) body["id"] = id;
                FeatureToggle t = toggle_from_json(body);
                if (t.id != id)
                    throw Error(Errc::SchemaError,
                                "body id '" + t.id + "' does not match path id '" + id + "'");
                reply(res, {{"revision", store_->upsert_feature(std::move(t))}});
            });
        });

        svr_.Delete(R"(/features/([^/]+))", [this](const Req& req, Res& res) {
            handle(res, [&] {
                check_bearer(req);
                reply(res, {{"revision", store_->delete_feature(req.matches[1])}});
            });
        });

        svr_.Post(R"(/features/([^/]+)/dependency)", [this](const Req& req, Res& res) {
            handle(res, [&] {
                check_bearer(req);
                nlohmann::json body = detail::parse_body(req);
                if (!body.contains("parent") || !body["parent"].is_string())
                    throw Error(Errc::SchemaError, "body must carry a string 'parent'");
                reply(res, {{"revision", store_->link_dependency(
                                             req.matches[1], body["parent"].get<std::string>())}});
            });
        });

        svr_.Get(R"(/rules/([^/]+))", [this](const Req& req, Res& res) {
            handle(res, [&] {
                check_bearer(req);
                reply(res, rule_to_json(store_->read_rule(req.matches[1])));
            });
        });

        svr_.Put(R"(/rules/([^/]+))", [this](const Req& req, Res& res) {
            handle(res, [&] {
                check_bearer(req);
                nlohmann::json body = detail::parse_body(req);
                std::string id = req.matches[1];
                if (!body.contains("id")) body["id"] = id;
                Rule r = rule_from_json(body);
                if (r.id != id)
                    throw Error(Errc::SchemaError,
                                "body id '" + r.id + "' does not match path id '" + id + "'");
                reply(res, {{"revision", store_->upsert_rule(std::move(r))}});
            });
        });

        svr_.Delete(R"(/rules/([^/]+))", [this](const Req& req, Res& res) {
            handle(res, [&] {
                check_bearer(req);
                bool force = req.has_param("force") && req.get_param_value("force") != "false";
                reply(res, {{"revision", store_->delete_rule(req.matches[1], force)}});
            });
        });

        svr_.Post("/evaluate", [this](const Req& req, Res& res) {
            handle(res, [&] {
                nlohmann::json body = detail::parse_body(req);
                if (!body.contains("featureId") || !body["featureId"].is_string())
                    throw Error(Errc::SchemaError, "body must carry a string 'featureId'");
                auto snap = store_->snapshot();
                auto ctx = EvaluationContext::from_json(enrich(detail::context_of(body)),
                                                        snap->contextSchema);
                std::string env = body.value("environment", "default");
                auto result = evaluate_feature(*snap, body["featureId"].get<std::string>(), ctx, env);
                auto token = sign(result.to_json(), body.value("subject", "anonymous"),
                                  snap->pricingVersion);
                reply(res, token.to_json());
            });
        });

        svr_.Post("/evaluate-all", [this](const Req& req, Res& res) {
            handle(res, [&] {
                nlohmann::json body = detail::parse_body(req);
                auto snap = store_->snapshot();
                auto ctx = EvaluationContext::from_json(enrich(detail::context_of(body)),
                                                        snap->contextSchema);
                std::string env = body.value("environment", "default");
                auto payload = evaluate_all(*snap, ctx, env);
                auto token = sign(payload.to_json(), body.value("subject", "anonymous"),
                                  snap->pricingVersion);
                reply(res, token.to_json());
            });
        });

        svr_.Post("/pricing/sync", [this](const Req& req, Res& res) {
            handle(res, [&] {
                check_bearer(req);
                if (!cfg_.pricingPath)
                    throw Error(Errc::ConfigError, "no pricing path configured");
                auto m = std::make_shared<const PricingModel>(
                    load_pricing_file(cfg_.pricingPath->string()));
                auto result = sync_store(*store_, *m);
                set_pricing(std::move(m));
                reply(res, {{"revision", result.revision}, {"plan", result.plan.to_json()}});
            });
        });
    }

    ServiceConfig cfg_;
    std::unique_ptr<ToggleStore> store_;
    std::unique_ptr<PricingWatcher> watcher_;
    std::shared_ptr<const PricingModel> pricing_;
    mutable std::mutex pricing_mutex_;
    httplib::Server svr_;
    std::thread thread_;
    int bound_port_ = 0;
};

} // namespace horizon
