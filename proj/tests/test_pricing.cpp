// Pricing model: strict parsing, invariants, configuration space, and
// entitlement resolution.

#include <catch2/catch_amalgamated.hpp>

#include "horizon/pricing.hpp"
#include "testutil.hpp"

using namespace horizon;

TEST_CASE("zoom fixture parses to 11 features, 3 plans, 3 add-ons") {
    auto m = testutil::zoom_pricing();
    CHECK(m.name == "zoom");
    CHECK(m.features.size() == 11);
    CHECK(m.plans.size() == 3);
    CHECK(m.addOns.size() == 3);
    CHECK(m.usageLimits.size() == 2);
}

TEST_CASE("minimal pricing with one plan and zero features is valid") {
    auto m = parse_pricing("saasName: tiny\nversion: \"1\"\nplans:\n  - name: ONLY\n");
    CHECK(m.plans.size() == 1);
    CHECK(m.features.empty());
    CHECK(configuration_space(m) == 1); // 2^0
}

TEST_CASE("add-on available for an undeclared plan is a semantic error") {
    std::string doc = R"(saasName: x
version: "1"
features:
  - {name: f, kind: functional}
plans:
  - name: BASIC
    features: {f: true}
addOns:
  - name: huge-meetings
    availableFor: [GOLD]
)";
    try {
        parse_pricing(doc);
        FAIL("expected SemanticError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SemanticError);
        CHECK(e.message().find("huge-meetings") != std::string::npos);
    }
}

TEST_CASE("malformed YAML reports line and column") {
    try {
        parse_pricing("saasName: [unclosed\nversion: \"1\"\n");
        FAIL("expected SyntaxError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SyntaxError);
        CHECK(e.message().find(":") != std::string::npos);
    }
}

TEST_CASE("unknown and missing keys are schema errors") {
    CHECK_THROWS_MATCHES(
        parse_pricing("saasName: x\nversion: \"1\"\nplans:\n  - name: A\nbogus: 1\n"), Error,
        Catch::Matchers::Predicate<Error>(
            [](const Error& e) { return e.code() == Errc::SchemaError; }));
    CHECK_THROWS_MATCHES(parse_pricing("saasName: x\nplans:\n  - name: A\n"), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Errc::SchemaError; }));
    // strict mode inside nested entries too
    CHECK_THROWS_AS(
        parse_pricing("saasName: x\nversion: \"1\"\nplans:\n  - name: A\n    extra: true\n"),
        Error);
}

TEST_CASE("semantic invariants are enforced") {
    SECTION("duplicate plan names") {
        CHECK_THROWS_AS(
            parse_pricing("saasName: x\nversion: \"1\"\nplans:\n  - name: A\n  - name: A\n"),
            Error);
    }
    SECTION("orphan feature") {
        try {
            parse_pricing("saasName: x\nversion: \"1\"\nfeatures:\n  - {name: lonely, kind: "
                          "functional}\nplans:\n  - name: A\n");
            FAIL("expected SemanticError");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::SemanticError);
            CHECK(e.message().find("lonely") != std::string::npos);
        }
    }
    SECTION("usage limit referencing unknown feature") {
        CHECK_THROWS_AS(parse_pricing(R"(saasName: x
version: "1"
usageLimits:
  - {name: cap, feature: ghost, unit: u, contextAttribute: a.b}
plans:
  - name: A
)"),
                        Error);
    }
    SECTION("invalid contextAttribute path") {
        CHECK_THROWS_AS(parse_pricing(R"(saasName: x
version: "1"
features:
  - {name: f, kind: functional}
usageLimits:
  - {name: cap, feature: f, unit: u, contextAttribute: "9bad..path"}
plans:
  - name: A
    features: {f: true}
)"),
                        Error);
    }
    SECTION("negative price") {
        CHECK_THROWS_AS(
            parse_pricing("saasName: x\nversion: \"1\"\nplans:\n  - name: A\n    price: -1\n"),
            Error);
    }
    SECTION("unknown feature kind") {
        CHECK_THROWS_AS(parse_pricing("saasName: x\nversion: \"1\"\nfeatures:\n  - {name: f, "
                                      "kind: shiny}\nplans:\n  - name: A\n"),
                        Error);
    }
}

TEST_CASE("configuration space of the zoom fixture is 20") {
    CHECK(configuration_space(testutil::zoom_pricing()) == 20);
}

TEST_CASE("configuration space equals brute-force subscription enumeration") {
    std::mt19937 rng(20260810);
    for (int i = 0; i < 200; ++i) {
        auto m = testutil::random_pricing(rng);
        CAPTURE(i, m.plans.size(), m.addOns.size());
        CHECK(configuration_space(m) == testutil::enumerate_subscriptions(m));
    }
}

TEST_CASE("entitlement resolution follows plan values, OR and max") {
    auto m = testutil::zoom_pricing();

    auto business = resolve_entitlements(m, {"BUSINESS", {}});
    CHECK(business.limits.at("maxAssistantsPerMeeting") == 300);

    auto business_hm = resolve_entitlements(m, {"BUSINESS", {"huge-meetings"}});
    CHECK(business_hm.limits.at("maxAssistantsPerMeeting") == 1000);

    auto pro = resolve_entitlements(m, {"PRO", {}});
    CHECK_FALSE(pro.features.at("translated-captions"));
    auto pro_tc = resolve_entitlements(m, {"PRO", {"translated-captions"}});
    CHECK(pro_tc.features.at("translated-captions"));

    CHECK(pro.pricingVersion == m.version);
    // keys exactly match declared features and limits
    CHECK(pro.features.size() == m.features.size());
    CHECK(pro.limits.size() == m.usageLimits.size());
}

TEST_CASE("invalid subscriptions are distinguished") {
    auto m = testutil::zoom_pricing();
    auto code_of = [&](const Subscription& s) {
        try {
            resolve_entitlements(m, s);
            return std::string("none");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::InvalidSubscription);
            return e.detail();
        }
    };
    CHECK(code_of({"GOLD", {}}) == "unknown-plan");
    CHECK(code_of({"PRO", {"ghost"}}) == "unknown-add-on");
    CHECK(code_of({"BASIC", {"huge-meetings"}}) == "add-on-not-available");
}

TEST_CASE("serialize/parse round-trip is identity") {
    SECTION("zoom fixture") {
        auto m = testutil::zoom_pricing();
        CHECK(parse_pricing(serialize_pricing(m)) == m);
    }
    SECTION("randomized pricings") {
        std::mt19937 rng(7);
        for (int i = 0; i < 50; ++i) {
            auto m = testutil::random_pricing(rng);
            CHECK(parse_pricing(serialize_pricing(m)) == m);
        }
    }
    SECTION("fractional prices and limits survive") {
        auto m = testutil::zoom_pricing();
        m.plans[1].price = 13.33;
        m.plans[1].usageLimitValues["maxTimePerMeeting"] = 1800.5;
        CHECK(parse_pricing(serialize_pricing(m)) == m);
    }
}

TEST_CASE("adding an add-on never lowers entitlements") {
    std::mt19937 rng(99);
    for (int i = 0; i < 100; ++i) {
        auto m = testutil::random_pricing(rng);
        for (const auto& plan : m.plans) {
            Subscription base{plan.name, {}};
            auto base_ents = resolve_entitlements(m, base);
            for (const auto& addon : m.addOns) {
                if (!addon.availableFor.count(plan.name)) continue;
                auto more = resolve_entitlements(m, {plan.name, {addon.name}});
                for (const auto& [f, v] : base_ents.features)
                    if (v) CHECK(more.features.at(f));
                for (const auto& [l, v] : base_ents.limits) CHECK(more.limits.at(l) >= v);
            }
        }
    }
}

TEST_CASE("resolution is deterministic") {
    auto m = testutil::zoom_pricing();
    Subscription s{"BUSINESS", {"huge-meetings", "phone-dialing"}};
    CHECK(resolve_entitlements(m, s) == resolve_entitlements(m, s));
}
