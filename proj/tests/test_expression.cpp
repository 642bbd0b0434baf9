// Rule DSL: grammar, typechecking, evaluation semantics, and the
// propositional properties (truth tables, De Morgan, short-circuit).

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "horizon/expression.hpp"
#include "testutil.hpp"

using namespace horizon;

namespace {

std::shared_ptr<ContextSchema> abc_schema() {
    auto s = std::make_shared<ContextSchema>();
    s->declare("a", AttrType::boolean());
    s->declare("b", AttrType::boolean());
    s->declare("c", AttrType::boolean());
    return s;
}

EvaluationContext abc_context(const std::shared_ptr<ContextSchema>& s, bool a, bool b, bool c) {
    EvaluationContext ctx(s);
    ctx.set("a", Value(a));
    ctx.set("b", Value(b));
    ctx.set("c", Value(c));
    return ctx;
}

} // namespace

TEST_CASE("paper expressions parse to the expected shapes") {
    SECTION("includes call") {
        auto e = parse_expression("user.subscription.includes(\"records\")");
        REQUIRE(e->kind == ExprKind::Call);
        CHECK(e->fn == CallFn::Includes);
        REQUIRE(e->callee->kind == ExprKind::Path);
        CHECK(path_to_string(e->callee->segments) == "user.subscription");
        REQUIRE(e->args.size() == 1);
        CHECK(e->args[0]->literal.as_string() == "records");
    }
    SECTION("comparison with bracketed map key") {
        auto e = parse_expression("user.currentTime <= user.subscription[\"maxTimePerMeeting\"]");
        REQUIRE(e->kind == ExprKind::Compare);
        CHECK(e->cmp == CompareOp::Le);
        CHECK(e->lhs->kind == ExprKind::Path);
        REQUIRE(e->rhs->kind == ExprKind::Path);
        REQUIRE(e->rhs->segments.size() == 3);
        CHECK(e->rhs->segments[2].is_key);
        CHECK(e->rhs->segments[2].text == "maxTimePerMeeting");
    }
    SECTION("precedence and parentheses") {
        auto e = parse_expression("a && (b || !c)");
        REQUIRE(e->kind == ExprKind::And);
        CHECK(e->lhs->kind == ExprKind::Path);
        REQUIRE(e->rhs->kind == ExprKind::Or);
        CHECK(e->rhs->rhs->kind == ExprKind::Not);
    }
    SECTION("|| binds looser than &&") {
        auto e = parse_expression("a || b && c");
        REQUIRE(e->kind == ExprKind::Or);
        CHECK(e->rhs->kind == ExprKind::And);
    }
    SECTION("=== and !== are accepted as aliases") {
        auto a = parse_expression("user.plan === \"PRO\"");
        REQUIRE(a->kind == ExprKind::Compare);
        CHECK(a->cmp == CompareOp::Eq);
        auto b = parse_expression("user.plan !== \"PRO\"");
        CHECK(b->cmp == CompareOp::Ne);
        CHECK(ast_equal(*a, *parse_expression("user.plan == \"PRO\"")));
    }
}

TEST_CASE("syntax errors carry line:column and a hint") {
    SECTION("truncated comparison") {
        try {
            parse_expression("user.plan ===");
            FAIL("expected SyntaxError");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::SyntaxError);
            CHECK(e.message().find("1:14") != std::string::npos);
            CHECK(e.message().find("expected") != std::string::npos);
        }
    }
    SECTION("unterminated string") {
        CHECK_THROWS_AS(parse_expression("user.plan == \"PRO"), Error);
    }
    SECTION("unknown function") {
        try {
            parse_expression("user.plan.startsWith(\"P\")");
            FAIL("expected SyntaxError");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::SyntaxError);
            CHECK(e.message().find("startsWith") != std::string::npos);
        }
    }
    SECTION("trailing input") {
        CHECK_THROWS_AS(parse_expression("a b"), Error);
    }
    SECTION("single = is rejected with a hint") {
        try {
            parse_expression("a = true");
            FAIL("expected SyntaxError");
        } catch (const Error& e) {
            CHECK(e.message().find("==") != std::string::npos);
        }
    }
}

TEST_CASE("typecheck resolves attributes and rejects type clashes") {
    ContextSchema s;
    s.declare("user.language", AttrType::string());
    s.declare("user.plan", AttrType::string());
    s.declare("user.subscription", AttrType::string_list());
    s.declare("user.limits", AttrType::map_of(AttrType::Scalar::Number));
    s.declare("meeting.assistants", AttrType::number());
    s.declare("user.active", AttrType::boolean());

    SECTION("string includes is boolean") {
        CHECK_NOTHROW(typecheck(parse_expression("user.language.includes(\"EN\")"), s));
    }
    SECTION("ordering needs numbers") {
        try {
            typecheck(parse_expression("user.plan < 3"), s);
            FAIL("expected TypeError");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::TypeError);
        }
    }
    SECTION("undeclared attribute") {
        try {
            typecheck(parse_expression("user.iq > 100"), s);
            FAIL("expected UnknownAttribute");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::UnknownAttribute);
            CHECK(e.message().find("user.iq") != std::string::npos);
        }
    }
    SECTION("map bracket access yields the value type") {
        CHECK_NOTHROW(typecheck(parse_expression("meeting.assistants <= user.limits[\"max\"]"), s));
        CHECK_THROWS_AS(typecheck(parse_expression("user.limits[\"max\"] == \"many\""), s), Error);
    }
    SECTION("bracket key on a non-map is a type error") {
        try {
            typecheck(parse_expression("user.plan[\"x\"] == \"y\""), s);
            FAIL("expected TypeError");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::TypeError);
        }
    }
    SECTION("path extending beyond a declared attribute") {
        CHECK_THROWS_AS(typecheck(parse_expression("user.plan.tier == \"gold\""), s), Error);
    }
    SECTION("equality across mismatched types is a TypeError, not false") {
        CHECK_THROWS_AS(typecheck(parse_expression("user.plan == 3"), s), Error);
        CHECK_THROWS_AS(typecheck(parse_expression("user.active == \"yes\""), s), Error);
    }
    SECTION("whole expression must be boolean") {
        CHECK_THROWS_AS(typecheck(parse_expression("meeting.assistants"), s), Error);
    }
    SECTION("logical operators need boolean operands") {
        CHECK_THROWS_AS(typecheck(parse_expression("user.plan && user.active"), s), Error);
        CHECK_THROWS_AS(typecheck(parse_expression("!meeting.assistants"), s), Error);
    }
    SECTION("list membership and substring forms of includes") {
        CHECK_NOTHROW(typecheck(parse_expression("user.subscription.includes(\"records\")"), s));
        CHECK_NOTHROW(typecheck(parse_expression("user.language.contains(\"E\")"), s));
        CHECK_THROWS_AS(typecheck(parse_expression("user.subscription.contains(\"x\")"), s), Error);
    }
    SECTION("matches validates literal patterns eagerly") {
        try {
            typecheck(parse_expression("user.language.matches(\"[unclosed\")"), s);
            FAIL("expected RegexError");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::RegexError);
        }
    }
    SECTION("call arity") {
        CHECK_THROWS_AS(typecheck(parse_expression("user.language.includes(\"a\", \"b\")"), s),
                        Error);
    }
}

TEST_CASE("evaluation follows the worked limit examples") {
    ContextSchema s;
    s.declare("meeting.assistants", AttrType::number());
    s.declare("user.subscription", AttrType::map_of(AttrType::Scalar::Number));
    auto schema = std::make_shared<ContextSchema>(s);
    auto typed = typecheck(
        parse_expression("meeting.assistants <= user.subscription[\"maxAssistants\"]"), s);

    auto ctx = [&](double assistants, double max) {
        EvaluationContext c(schema);
        c.set("meeting.assistants", Value(assistants));
        c.set("user.subscription", Value(Value::Map{{"maxAssistants", Value(max)}}));
        return c;
    };
    CHECK_FALSE(evaluate(typed, ctx(150, 100)));
    CHECK(evaluate(typed, ctx(300, 300)));
}

TEST_CASE("truth tables for &&, || and ! match a brute-force oracle") {
    auto schema = abc_schema();
    struct Case {
        const char* src;
        bool (*oracle)(bool, bool, bool);
    };
    static const Case cases[] = {
        {"a && b", [](bool a, bool b, bool) { return a && b; }},
        {"a || b", [](bool a, bool b, bool) { return a || b; }},
        {"!a", [](bool a, bool, bool) { return !a; }},
        {"a && b && c", [](bool a, bool b, bool c) { return a && b && c; }},
        {"a || b || c", [](bool a, bool b, bool c) { return a || b || c; }},
        {"a && (b || c)", [](bool a, bool b, bool c) { return a && (b || c); }},
        {"(a && b) || c", [](bool a, bool b, bool c) { return (a && b) || c; }},
        {"!(a && b)", [](bool a, bool b, bool) { return !(a && b); }},
        {"!a || !b", [](bool a, bool b, bool) { return !a || !b; }},
        {"!(a || b)", [](bool a, bool b, bool) { return !(a || b); }},
        {"!a && !b", [](bool a, bool b, bool) { return !a && !b; }},
        {"a && !b || c", [](bool a, bool b, bool c) { return (a && !b) || c; }},
    };
    for (const auto& tc : cases) {
        auto typed = typecheck(parse_expression(tc.src), *schema);
        for (int bits = 0; bits < 8; ++bits) {
            bool a = bits & 1, b = bits & 2, c = bits & 4;
            CAPTURE(tc.src, a, b, c);
            CHECK(evaluate(typed, abc_context(schema, a, b, c)) == tc.oracle(a, b, c));
        }
    }
}

namespace {

// random boolean expression over a, b, c
ExprPtr random_bool_expr(std::mt19937& rng, int depth) {
    auto node = std::make_shared<Expr>();
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 3);
    switch (pick(rng)) {
    case 0: {
        node->kind = ExprKind::Path;
        const char* names[] = {"a", "b", "c"};
        node->segments.push_back({false, names[rng() % 3]});
        break;
    }
    case 1:
        node->kind = ExprKind::Not;
        node->operand = random_bool_expr(rng, depth - 1);
        break;
    case 2:
        node->kind = ExprKind::And;
        node->lhs = random_bool_expr(rng, depth - 1);
        node->rhs = random_bool_expr(rng, depth - 1);
        break;
    default:
        node->kind = ExprKind::Or;
        node->lhs = random_bool_expr(rng, depth - 1);
        node->rhs = random_bool_expr(rng, depth - 1);
        break;
    }
    return node;
}

} // namespace

TEST_CASE("De Morgan equivalence holds on random expression pairs") {
    auto schema = abc_schema();
    std::mt19937 rng(424242);
    for (int i = 0; i < 1000; ++i) {
        ExprPtr lhs = random_bool_expr(rng, 3);
        ExprPtr rhs = random_bool_expr(rng, 3);

        auto conj = std::make_shared<Expr>();
        conj->kind = ExprKind::And;
        conj->lhs = lhs;
        conj->rhs = rhs;
        auto negated = std::make_shared<Expr>();
        negated->kind = ExprKind::Not;
        negated->operand = conj;

        auto not_l = std::make_shared<Expr>();
        not_l->kind = ExprKind::Not;
        not_l->operand = lhs;
        auto not_r = std::make_shared<Expr>();
        not_r->kind = ExprKind::Not;
        not_r->operand = rhs;
        auto disj = std::make_shared<Expr>();
        disj->kind = ExprKind::Or;
        disj->lhs = not_l;
        disj->rhs = not_r;

        auto t1 = typecheck(negated, *schema);
        auto t2 = typecheck(disj, *schema);
        bool a = rng() & 1, b = rng() & 1, c = rng() & 1;
        auto ctx = abc_context(schema, a, b, c);
        CHECK(evaluate(t1, ctx) == evaluate(t2, ctx));
    }
}

TEST_CASE("|| is native: the AST keeps the Or node after typechecking") {
    auto schema = abc_schema();
    auto typed = typecheck(parse_expression("a || b"), *schema);
    REQUIRE(typed.ast->kind == ExprKind::Or);
    CHECK(typed.ast->lhs->kind == ExprKind::Path);
    CHECK(typed.ast->rhs->kind == ExprKind::Path);
}

TEST_CASE("short-circuit: the right side of a decided && / || never runs") {
    ContextSchema s;
    s.declare("present", AttrType::boolean());
    s.declare("absent", AttrType::boolean());
    auto schema = std::make_shared<ContextSchema>(s);
    EvaluationContext ctx(schema);
    ctx.set("present", Value(false));

    // 'absent' is declared but not provided: evaluating it would throw
    auto t_and = typecheck(parse_expression("present && absent"), s);
    CHECK_FALSE(evaluate(t_and, ctx));

    EvaluationContext ctx2(schema);
    ctx2.set("present", Value(true));
    auto t_or = typecheck(parse_expression("present || absent"), s);
    CHECK(evaluate(t_or, ctx2));

    auto t_bare = typecheck(parse_expression("absent"), s);
    try {
        evaluate(t_bare, ctx);
        FAIL("expected MissingAttribute");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingAttribute);
    }
}

TEST_CASE("missing map keys surface as MissingAttribute") {
    ContextSchema s;
    s.declare("user.limits", AttrType::map_of(AttrType::Scalar::Number));
    auto schema = std::make_shared<ContextSchema>(s);
    EvaluationContext ctx(schema);
    ctx.set("user.limits", Value(Value::Map{{"other", Value(1.0)}}));
    auto typed = typecheck(parse_expression("user.limits[\"max\"] <= 10"), s);
    try {
        evaluate(typed, ctx);
        FAIL("expected MissingAttribute");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingAttribute);
        CHECK(e.message().find("max") != std::string::npos);
    }
}

TEST_CASE("matches evaluates regular expressions") {
    ContextSchema s;
    s.declare("user.language", AttrType::string());
    auto schema = std::make_shared<ContextSchema>(s);
    EvaluationContext ctx(schema);
    ctx.set("user.language", Value("EN-us"));
    CHECK(evaluate(typecheck(parse_expression("user.language.matches(\"^EN\")"), s), ctx));
    CHECK(evaluate(typecheck(parse_expression("user.language.matches(\"EN|ES\")"), s), ctx));
    CHECK_FALSE(evaluate(typecheck(parse_expression("user.language.matches(\"^ES\")"), s), ctx));
}

TEST_CASE("a non-literal pattern is compiled at evaluation time") {
    ContextSchema s;
    s.declare("user.language", AttrType::string());
    s.declare("user.pattern", AttrType::string());
    auto schema = std::make_shared<ContextSchema>(s);
    auto typed = typecheck(parse_expression("user.language.matches(user.pattern)"), s);

    EvaluationContext good(schema);
    good.set("user.language", Value("EN-us"));
    good.set("user.pattern", Value("^EN"));
    CHECK(evaluate(typed, good));

    EvaluationContext bad(schema);
    bad.set("user.language", Value("EN-us"));
    bad.set("user.pattern", Value("[unclosed"));
    try {
        evaluate(typed, bad);
        FAIL("expected RegexError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::RegexError);
    }
}

namespace {

// Random printable AST, including comparisons, calls, and literals. Produces
// syntactically valid trees; type validity is irrelevant for the round-trip.
ExprPtr random_ast(std::mt19937& rng, int depth) {
    auto node = std::make_shared<Expr>();
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 6);
    switch (pick(rng)) {
    case 0: {
        node->kind = ExprKind::Literal;
        switch (rng() % 3) {
        case 0: node->literal = Value(static_cast<double>(static_cast<int>(rng() % 1000)) / 4.0); break;
        case 1: node->literal = Value(rng() % 2 == 0); break;
        default: node->literal = Value(std::string("s") + char('a' + rng() % 26)); break;
        }
        break;
    }
    case 1: {
        node->kind = ExprKind::Path;
        node->segments.push_back({false, std::string(1, char('a' + rng() % 4))});
        if (rng() % 2) node->segments.push_back({false, "sub"});
        if (rng() % 3 == 0) node->segments.push_back({true, "key with spaces"});
        break;
    }
    case 2: {
        node->kind = ExprKind::Call;
        node->fn = static_cast<CallFn>(rng() % 3);
        auto callee = std::make_shared<Expr>();
        callee->kind = ExprKind::Path;
        callee->segments.push_back({false, "user"});
        callee->segments.push_back({false, "field"});
        node->callee = callee;
        auto arg = std::make_shared<Expr>();
        arg->kind = ExprKind::Literal;
        arg->literal = Value(std::string("quoted\"arg\\with\nescapes"));
        node->args.push_back(arg);
        break;
    }
    case 3:
        node->kind = ExprKind::Not;
        node->operand = random_ast(rng, depth - 1);
        break;
    case 4: {
        node->kind = ExprKind::Compare;
        node->cmp = static_cast<CompareOp>(rng() % 6);
        node->lhs = random_ast(rng, 0); // operands are primaries
        node->rhs = random_ast(rng, 0);
        break;
    }
    case 5:
        node->kind = ExprKind::And;
        node->lhs = random_ast(rng, depth - 1);
        node->rhs = random_ast(rng, depth - 1);
        break;
    default:
        node->kind = ExprKind::Or;
        node->lhs = random_ast(rng, depth - 1);
        node->rhs = random_ast(rng, depth - 1);
        break;
    }
    return node;
}

} // namespace

TEST_CASE("print/parse round-trip is the identity on ASTs") {
    std::mt19937 rng(777);
    for (int i = 0; i < 500; ++i) {
        ExprPtr ast = random_ast(rng, 4);
        std::string printed = to_source(*ast);
        CAPTURE(printed);
        ExprPtr reparsed;
        REQUIRE_NOTHROW(reparsed = parse_expression(printed));
        CHECK(ast_equal(*reparsed, *ast));
    }
}

TEST_CASE("typechecked evaluation is total over schema-complete contexts") {
    auto schema = abc_schema();
    std::mt19937 rng(31337);
    for (int i = 0; i < 300; ++i) {
        auto typed = typecheck(random_bool_expr(rng, 4), *schema);
        auto ctx = abc_context(schema, rng() & 1, rng() & 1, rng() & 1);
        bool v = evaluate(typed, ctx);
        CHECK((v == true || v == false));
    }
}

TEST_CASE("contexts accept nested and flattened JSON forms") {
    ContextSchema s;
    s.declare("user.plan", AttrType::string());
    s.declare("user.limits", AttrType::map_of(AttrType::Scalar::Number));
    s.declare("meeting.assistants", AttrType::number());
    auto schema = std::make_shared<ContextSchema>(s);

    auto nested = EvaluationContext::from_json(
        nlohmann::json::parse(
            R"({"user":{"plan":"PRO","limits":{"max":5}},"meeting":{"assistants":3}})"),
        schema);
    auto flattened = EvaluationContext::from_json(
        nlohmann::json::parse(
            R"({"user.plan":"PRO","user.limits":{"max":5},"meeting.assistants":3})"),
        schema);
    CHECK(nested.values() == flattened.values());

    SECTION("declared attribute with mismatched type is rejected") {
        CHECK_THROWS_AS(
            EvaluationContext::from_json(nlohmann::json::parse(R"({"user":{"plan":42}})"), schema),
            Error);
    }
    SECTION("undeclared attributes are ignored") {
        auto ctx = EvaluationContext::from_json(
            nlohmann::json::parse(R"({"user":{"plan":"PRO","shoe_size":44}})"), schema);
        CHECK(ctx.values().size() == 1);
    }
    SECTION("context schema prefix freedom") {
        ContextSchema bad;
        bad.declare("user.plan", AttrType::string());
        CHECK_THROWS_AS(bad.declare("user.plan.tier", AttrType::string()), Error);
        CHECK_THROWS_AS(bad.declare("user", AttrType::string()), Error);
    }
}
