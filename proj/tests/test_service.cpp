// HTTP service: endpoint contracts, signed evaluations, bearer auth, and
// API-vs-library equivalence (dual driving).

#include <catch2/catch_amalgamated.hpp>

#include <httplib.h>

#include "horizon/service.hpp"
#include "horizon/signing.hpp"
#include "testutil.hpp"

using namespace horizon;
using nlohmann::json;

namespace {

struct LiveService {
    testutil::TempDir tmp;
    ApiService service;
    httplib::Client client;

    static ServiceConfig make_config(const std::filesystem::path& store,
                                     const std::string& bearer) {
        ServiceConfig cfg;
        cfg.port = 0;
        cfg.secret = "test-secret";
        cfg.bearer = bearer;
        cfg.storePath = store;
        return cfg;
    }

    explicit LiveService(const std::string& bearer = "")
        : service(make_config(tmp.file("store.json"), bearer)),
          client("127.0.0.1", [&] {
              service.start();
              return service.port();
          }()) {}

    json get(const std::string& path, const httplib::Headers& h = {}) {
        auto res = client.Get(path, h);
        REQUIRE(res);
        return json::parse(res->body);
    }

    std::pair<int, json> put(const std::string& path, const json& body,
                             const httplib::Headers& h = {}) {
        auto res = client.Put(path, h, body.dump(), "application/json");
        REQUIRE(res);
        return {res->status, json::parse(res->body)};
    }

    std::pair<int, json> post(const std::string& path, const json& body,
                              const httplib::Headers& h = {}) {
        auto res = client.Post(path, h, body.dump(), "application/json");
        REQUIRE(res);
        return {res->status, json::parse(res->body)};
    }

    std::pair<int, json> del(const std::string& path, const httplib::Headers& h = {}) {
        auto res = client.Delete(path, h);
        REQUIRE(res);
        return {res->status, json::parse(res->body)};
    }
};

} // namespace

TEST_CASE("feature endpoints mirror the store CRUD") {
    LiveService s;

    auto [st1, r1] = s.put("/features/reports", {{"description", "usage reports"}});
    CHECK(st1 == 200);
    CHECK(r1["revision"] == 1);

    auto t = s.get("/features/reports");
    CHECK(t["id"] == "reports");
    CHECK(t["description"] == "usage reports");
    CHECK(t["environments"] == json::array({"default"}));

    auto list = s.get("/features");
    REQUIRE(list.is_array());
    CHECK(list.size() == 1);

    auto [st2, r2] = s.del("/features/reports");
    CHECK(st2 == 200);
    auto after = s.get("/features");
    CHECK(after.empty());

    SECTION("missing toggles are 404 with a machine-readable code") {
        auto res = s.client.Get("/features/ghost");
        REQUIRE(res);
        CHECK(res->status == 404);
        CHECK(json::parse(res->body)["code"] == "NOT_FOUND");
    }
    SECTION("body id must match the path") {
        auto [st, body] = s.put("/features/a", {{"id", "b"}});
        CHECK(st == 400);
        CHECK(body["code"] == "SCHEMA_ERROR");
    }
}

TEST_CASE("rule and dependency endpoints") {
    LiveService s;
    // declare a schema through the library seam, then manage rules via HTTP
    ContextSchema schema;
    schema.declare("user.plan", AttrType::string());
    s.service.store().set_context_schema(schema);

    s.put("/features/parent", json::object());
    s.put("/features/child", json::object());
    auto [st1, r1] = s.put("/rules/gate", {{"expressionSource", "user.plan == \"PRO\""},
                                           {"attachedFeatures", {"parent"}}});
    CHECK(st1 == 200);

    auto rule = s.get("/rules/gate");
    CHECK(rule["expressionSource"] == "user.plan == \"PRO\"");
    CHECK(rule["attachedFeatures"] == json::array({"parent"}));

    auto [st2, r2] = s.post("/features/child/dependency", {{"parent", "parent"}});
    CHECK(st2 == 200);
    CHECK(s.get("/features/child")["dependsOn"] == "parent");

    SECTION("deleting a depended-on toggle is a 409") {
        auto [st, body] = s.del("/features/parent");
        CHECK(st == 409);
        CHECK(body["code"] == "DEPENDENCY_VIOLATION");
    }
    SECTION("invalid expressions are a 400 with position") {
        auto [st, body] = s.put("/rules/broken", {{"expressionSource", "user.plan =="}});
        CHECK(st == 400);
        CHECK(body["code"] == "EXPRESSION_ERROR");
        CHECK(body["message"].get<std::string>().find(":") != std::string::npos);
    }
    SECTION("rule delete honors force") {
        auto [st, body] = s.del("/rules/gate?force=true");
        CHECK(st == 200);
        auto res = s.client.Get("/rules/gate");
        CHECK(res->status == 404);
    }
}

TEST_CASE("evaluation endpoints return verifiable signed tokens") {
    LiveService s;
    ContextSchema schema;
    schema.declare("user.plan", AttrType::string());
    s.service.store().set_context_schema(schema);
    s.put("/features/premium", json::object());
    s.put("/rules/premium-gate", {{"expressionSource", "user.plan == \"PRO\""},
                                  {"attachedFeatures", {"premium"}}});

    auto [st, token] = s.post(
        "/evaluate",
        {{"featureId", "premium"}, {"context", {{"user", {{"plan", "PRO"}}}}}, {"subject", "u1"}});
    CHECK(st == 200);
    CHECK(token["subject"] == "u1");
    CHECK(token["algorithm"] == "HMAC-SHA256");

    auto payload = verify_token(token, "test-secret");
    CHECK(payload["featureId"] == "premium");
    CHECK(payload["value"] == true);
    CHECK(payload["reason"] == "ruleMatched");

    SECTION("tampering with the payload invalidates the token") {
        json tampered = token;
        tampered["payload"]["value"] = false;
        CHECK_THROWS_MATCHES(verify_token(tampered, "test-secret"), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::SignatureInvalid;
                             }));
    }
    SECTION("unknown features map to 404 UNKNOWN_FEATURE") {
        auto [st2, body] = s.post("/evaluate", {{"featureId", "ghost"}, {"context", {}}});
        CHECK(st2 == 404);
        CHECK(body["code"] == "UNKNOWN_FEATURE");
    }
    SECTION("evaluate-all covers every visible toggle and verifies") {
        auto [st2, token2] =
            s.post("/evaluate-all", {{"context", {{"user", {{"plan", "BASIC"}}}}}});
        CHECK(st2 == 200);
        auto p = verify_token(token2, "test-secret");
        CHECK(p["results"].size() == 1);
        CHECK(p["results"]["premium"]["value"] == false);
    }
    SECTION("healthz reports revision and is unsigned") {
        auto h = s.get("/healthz");
        CHECK(h["status"] == "ok");
        CHECK(h["revision"].get<std::uint64_t>() == s.service.store().revision());
    }
}

TEST_CASE("signing round trip, expiry, and skew") {
    auto token = sign_result(json{{"value", true}}, "alice", "v1", "k", /*ttlMs=*/1000,
                             /*nowMs=*/1'000'000);
    SECTION("verifies unmodified") {
        CHECK(verify_token(token.to_json(), "k", 1'000'500) == json{{"value", true}});
    }
    SECTION("wrong secret fails") {
        CHECK_THROWS_AS(verify_token(token.to_json(), "other"), Error);
    }
    SECTION("accepted within the 30s skew, rejected beyond") {
        CHECK_NOTHROW(verify_token(token.to_json(), "k", 1'001'000 + 29'999));
        try {
            verify_token(token.to_json(), "k", 1'001'000 + 30'001);
            FAIL("expected TokenExpired");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::TokenExpired);
        }
    }
    SECTION("unknown algorithm is rejected before any other check") {
        json j = token.to_json();
        j["algorithm"] = "NONE";
        CHECK_THROWS_AS(verify_token(j, "k"), Error);
    }
}

TEST_CASE("bearer token guards CRUD but not evaluation") {
    LiveService s("management-token");
    httplib::Headers auth{{"Authorization", "Bearer management-token"}};

    SECTION("CRUD without the token is 401") {
        auto [st, body] = s.put("/features/x", json::object());
        CHECK(st == 401);
        CHECK(body["code"] == "UNAUTHORIZED");
        auto res = s.client.Get("/features");
        CHECK(res->status == 401);
    }
    SECTION("CRUD with the token works; evaluation stays open") {
        auto [st, body] = s.put("/features/x", json::object(), auth);
        CHECK(st == 200);
        auto [st2, token] = s.post("/evaluate", {{"featureId", "x"}, {"context", {}}});
        CHECK(st2 == 200); // no auth header needed
        CHECK(verify_token(token, "test-secret")["value"] == true);
    }
}

TEST_CASE("API behavior equals direct library calls on the same ops") {
    LiveService s;
    testutil::TempDir direct_tmp;
    ToggleStore direct(direct_tmp.file("store.json"));

    ContextSchema schema;
    schema.declare("user.plan", AttrType::string());
    s.service.store().set_context_schema(schema);
    direct.set_context_schema(schema);

    // the same operation sequence through both drivers
    s.put("/features/alpha", {{"description", "a"}});
    direct.upsert_feature([] {
        FeatureToggle t;
        t.id = "alpha";
        t.description = "a";
        return t;
    }());

    s.put("/rules/gate",
          {{"expressionSource", "user.plan == \"PRO\""}, {"attachedFeatures", {"alpha"}}});
    direct.upsert_rule([] {
        Rule r;
        r.id = "gate";
        r.expressionSource = "user.plan == \"PRO\"";
        r.attachedFeatures = {"alpha"};
        return r;
    }());

    s.put("/features/beta", json::object());
    direct.upsert_feature([] {
        FeatureToggle t;
        t.id = "beta";
        return t;
    }());
    s.post("/features/beta/dependency", {{"parent", "alpha"}});
    direct.link_dependency("beta", "alpha");

    s.del("/features/beta");
    direct.delete_feature("beta");

    auto api_snap = s.service.store().snapshot();
    auto direct_snap = direct.snapshot();
    CHECK(snapshot_content_equal(*api_snap, *direct_snap));
}

TEST_CASE("concurrent CRUD and evaluation never mix revisions in a payload") {
    LiveService s;
    ContextSchema schema;
    schema.declare("user.plan", AttrType::string());
    s.service.store().set_context_schema(schema);
    s.put("/features/stable", json::object());

    std::atomic<bool> stop{false};
    std::atomic<int> bad{0};
    std::thread evaluator([&] {
        httplib::Client c("127.0.0.1", s.service.port());
        while (!stop) {
            auto res = c.Post("/evaluate-all", R"({"context":{}})", "application/json");
            if (!res || res->status != 200) {
                ++bad;
                continue;
            }
            auto payload = verify_token(json::parse(res->body), "test-secret");
            std::int64_t rev = -1;
            for (const auto& [id, r] : payload["results"].items()) {
                auto entry_rev = r["snapshotRevision"].get<std::int64_t>();
                if (rev == -1) rev = entry_rev;
                if (entry_rev != rev) ++bad;
            }
        }
    });
    for (int i = 0; i < 20; ++i) {
        s.put("/features/churn" + std::to_string(i), json::object());
        if (i % 3 == 0) s.del("/features/churn" + std::to_string(i));
    }
    stop = true;
    evaluator.join();
    CHECK(bad == 0);
}

TEST_CASE("service configuration is validated") {
    testutil::TempDir tmp;
    SECTION("empty secret is rejected") {
        ServiceConfig cfg;
        cfg.storePath = tmp.file("s.json");
        CHECK_THROWS_MATCHES(ApiService(cfg), Error,
                             Catch::Matchers::Predicate<Error>(
                                 [](const Error& e) { return e.code() == Errc::ConfigError; }));
    }
    SECTION("pricing sync without a configured path is a 400") {
        LiveService s;
        auto [st, body] = s.post("/pricing/sync", json::object());
        CHECK(st == 400);
        CHECK(body["code"] == "CONFIG_ERROR");
    }
}

TEST_CASE("environment variables override service and watcher config") {
    ::setenv("HORIZON_SECRET", "env-secret", 1);
    ::setenv("HORIZON_BEARER", "env-bearer", 1);
    ::setenv("HORIZON_PRICING_PATH", "/tmp/env-pricing.yaml", 1);
    ::setenv("HORIZON_POLL_MS", "250", 1);

    ServiceConfig cfg;
    cfg.secret = "flag-secret";
    cfg = ServiceConfig::from_env(cfg);
    CHECK(cfg.secret == "env-secret");
    CHECK(cfg.bearer == "env-bearer");

    WatcherConfig wc;
    wc.path = "/original.yaml";
    wc = WatcherConfig::from_env(wc);
    CHECK(wc.path == "/tmp/env-pricing.yaml");
    CHECK(wc.interval == std::chrono::milliseconds(250));

    ::setenv("HORIZON_POLL_MS", "not-a-number", 1);
    CHECK_THROWS_AS(WatcherConfig::from_env(wc), Error);

    ::unsetenv("HORIZON_SECRET");
    ::unsetenv("HORIZON_BEARER");
    ::unsetenv("HORIZON_PRICING_PATH");
    ::unsetenv("HORIZON_POLL_MS");
}
