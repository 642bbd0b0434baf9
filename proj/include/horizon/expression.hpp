// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0
//
// Rule DSL: parsing, schema-directed typechecking, and evaluation.
//
// Grammar:
//   expr    := or
//   or      := and ("||" and)*
//   and     := unary ("&&" unary)*
//   unary   := "!" unary | cmp
//   cmp     := operand (CMPOP operand)?          CMPOP in { < <= > >= == != }
//   operand := literal | path | path "." fn "(" args ")" | "(" expr ")"
//   path    := ident ("." ident | "[" string "]")*
//   literal := "true" | "false" | decimal number | double-quoted string
//
// "===" and "!==" are accepted as aliases of "==" and "!=".

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "horizon/errors.hpp"
#include "horizon/value.hpp"

namespace horizon {

// ---------------------------------------------------------------------------
// Context schema
// ---------------------------------------------------------------------------

struct AttrType {
    enum class Kind { Boolean, Number, String, StringList, Map };
    enum class Scalar { Boolean, Number, String };

    Kind kind = Kind::Boolean;
    Scalar map_value = Scalar::Boolean; // meaningful only when kind == Map

    friend bool operator==(const AttrType&, const AttrType&) = default;

    static AttrType boolean() { return {Kind::Boolean, {}}; }
    static AttrType number() { return {Kind::Number, {}}; }
    static AttrType string() { return {Kind::String, {}}; }
    static AttrType string_list() { return {Kind::StringList, {}}; }
    static AttrType map_of(Scalar s) { return {Kind::Map, s}; }

    std::string to_string() const {
        switch (kind) {
        case Kind::Boolean: return "boolean";
        case Kind::Number: return "number";
        case Kind::String: return "string";
        case Kind::StringList: return "list<string>";
        case Kind::Map:
            switch (map_value) {
            case Scalar::Boolean: return "map<string,boolean>";
            case Scalar::Number: return "map<string,number>";
            case Scalar::String: return "map<string,string>";
            }
        }
        return "?";
    }

    static AttrType parse(const std::string& s) {
        if (s == "boolean") return boolean();
        if (s == "number") return number();
        if (s == "string") return string();
        if (s == "list<string>") return string_list();
        if (s == "map<string,boolean>") return map_of(Scalar::Boolean);
        if (s == "map<string,number>") return map_of(Scalar::Number);
        if (s == "map<string,string>") return map_of(Scalar::String);
        throw Error(Errc::SchemaError, "unknown attribute type '" + s + "'");
    }

    AttrType scalar_type() const {
        switch (map_value) {
        case Scalar::Boolean: return boolean();
        case Scalar::Number: return number();
        case Scalar::String: return string();
        }
        return boolean();
    }
};

inline bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

/// True when `s` is a dotted chain of identifiers ("user.currentTime").
inline bool is_attribute_path(std::string_view s) {
    size_t start = 0;
    while (true) {
        size_t dot = s.find('.', start);
        std::string_view seg = s.substr(start, dot == std::string_view::npos ? dot : dot - start);
        if (!is_identifier(seg)) return false;
        if (dot == std::string_view::npos) return true;
        start = dot + 1;
    }
}

/// Declared attributes a rule may reference. Paths are dotted identifiers;
/// no declared path may be a segment-prefix of another.
class ContextSchema {
public:
    void declare(const std::string& path, AttrType type) {
        if (!is_attribute_path(path))
            throw Error(Errc::SchemaError, "invalid attribute path '" + path + "'");
        for (const auto& [existing, t] : attrs_) {
            if (existing == path) continue;
            if (is_segment_prefix(existing, path) || is_segment_prefix(path, existing))
                throw Error(Errc::SchemaError,
                            "attribute path '" + path + "' conflicts with declared '" + existing + "'");
        }
        auto it = attrs_.find(path);
        if (it != attrs_.end() && !(it->second == type))
            throw Error(Errc::SchemaError,
                        "attribute '" + path + "' already declared as " + it->second.to_string());
        attrs_[path] = type;
    }

    const AttrType* find(const std::string& path) const {
        auto it = attrs_.find(path);
        return it == attrs_.end() ? nullptr : &it->second;
    }

    const std::map<std::string, AttrType>& attributes() const { return attrs_; }
    bool empty() const { return attrs_.empty(); }

    friend bool operator==(const ContextSchema&, const ContextSchema&) = default;

    nlohmann::json to_json() const {
        nlohmann::json o = nlohmann::json::object();
        for (const auto& [p, t] : attrs_) o[p] = t.to_string();
        return o;
    }

    static ContextSchema from_json(const nlohmann::json& j) {
        if (!j.is_object())
            throw Error(Errc::SchemaError, "context schema must be a JSON object");
        ContextSchema s;
        for (const auto& [k, v] : j.items()) {
            if (!v.is_string())
                throw Error(Errc::SchemaError, "schema type for '" + k + "' must be a string");
            s.declare(k, AttrType::parse(v.get<std::string>()));
        }
        return s;
    }

    static bool is_segment_prefix(const std::string& a, const std::string& b) {
        return b.size() > a.size() && b.compare(0, a.size(), a) == 0 && b[a.size()] == '.';
    }

private:
    std::map<std::string, AttrType> attrs_;
};

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

enum class ExprKind { Or, And, Not, Compare, Call, Path, Literal };
enum class CompareOp { Lt, Le, Gt, Ge, Eq, Ne };
enum class CallFn { Includes, Contains, Matches };

struct PathSegment {
    bool is_key = false; // true: bracketed map key, false: identifier
    std::string text;
    friend bool operator==(const PathSegment&, const PathSegment&) = default;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprKind kind = ExprKind::Literal;
    int line = 1, col = 1;

    ExprPtr lhs, rhs;    // Or, And, Compare
    CompareOp cmp{};     // Compare
    ExprPtr operand;     // Not
    CallFn fn{};         // Call
    ExprPtr callee;      // Call (a Path node)
    std::vector<ExprPtr> args;
    std::vector<PathSegment> segments; // Path
    Value literal;                     // Literal

    // Filled in by typecheck on the annotated clone.
    std::string resolved_attr;
    std::optional<std::string> map_key;
    std::shared_ptr<const std::regex> literal_regex; // Matches with literal pattern
};

inline bool ast_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
    case ExprKind::Or:
    case ExprKind::And:
        return ast_equal(*a.lhs, *b.lhs) && ast_equal(*a.rhs, *b.rhs);
    case ExprKind::Not:
        return ast_equal(*a.operand, *b.operand);
    case ExprKind::Compare:
        return a.cmp == b.cmp && ast_equal(*a.lhs, *b.lhs) && ast_equal(*a.rhs, *b.rhs);
    case ExprKind::Call:
        if (a.fn != b.fn || a.args.size() != b.args.size() || !ast_equal(*a.callee, *b.callee))
            return false;
        for (size_t i = 0; i < a.args.size(); ++i)
            if (!ast_equal(*a.args[i], *b.args[i])) return false;
        return true;
    case ExprKind::Path:
        return a.segments == b.segments;
    case ExprKind::Literal:
        return a.literal == b.literal;
    }
    return false;
}

inline std::string path_to_string(const std::vector<PathSegment>& segs) {
    std::string out;
    for (const auto& s : segs) {
        if (s.is_key) {
            out += "[\"" + s.text + "\"]";
        } else {
            if (!out.empty()) out += ".";
            out += s.text;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace detail {

enum class Tok {
    Ident, Number, String, True, False,
    LParen, RParen, LBracket, RBracket, Dot, Comma, Bang,
    AndAnd, OrOr, Lt, Le, Gt, Ge, Eq, Ne, End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0;
    int line = 1, col = 1;
};

inline const char* tok_name(Tok t) {
    switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::String: return "string";
    case Tok::True: return "'true'";
    case Tok::False: return "'false'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Dot: return "'.'";
    case Tok::Comma: return "','";
    case Tok::Bang: return "'!'";
    case Tok::AndAnd: return "'&&'";
    case Tok::OrOr: return "'||'";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::Eq: return "'=='";
    case Tok::Ne: return "'!='";
    case Tok::End: return "end of input";
    }
    return "?";
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    [[noreturn]] void fail(int line, int col, const std::string& msg) {
        throw Error(Errc::SyntaxError,
                    std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
    }

    char cur() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    char lookahead(size_t n = 1) const {
        return pos_ + n < src_.size() ? src_[pos_ + n] : '\0';
    }

    void consume() {
        if (pos_ < src_.size()) {
            if (src_[pos_] == '\n') { ++line_; col_ = 1; } else { ++col_; }
            ++pos_;
        }
    }

    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            consume();
        tok_ = Token{};
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= src_.size()) { tok_.kind = Tok::End; return; }

        char c = cur();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string id;
            while (std::isalnum(static_cast<unsigned char>(cur())) || cur() == '_') {
                id += cur();
                consume();
            }
            if (id == "true") tok_.kind = Tok::True;
            else if (id == "false") tok_.kind = Tok::False;
            else { tok_.kind = Tok::Ident; tok_.text = id; }
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && std::isdigit(static_cast<unsigned char>(lookahead())))) {
            std::string num;
            if (c == '-') { num += c; consume(); }
            while (std::isdigit(static_cast<unsigned char>(cur()))) { num += cur(); consume(); }
            if (cur() == '.' && std::isdigit(static_cast<unsigned char>(lookahead()))) {
                num += '.';
                consume();
                while (std::isdigit(static_cast<unsigned char>(cur()))) { num += cur(); consume(); }
            }
            tok_.kind = Tok::Number;
            tok_.number = std::stod(num);
            tok_.text = num;
            return;
        }
        if (c == '"') {
            consume();
            std::string s;
            while (cur() != '"') {
                if (cur() == '\0')
                    fail(tok_.line, tok_.col, "unterminated string literal");
                if (cur() == '\\') {
                    consume();
                    switch (cur()) {
                    case '"': s += '"'; break;
                    case '\\': s += '\\'; break;
                    case '/': s += '/'; break;
                    case 'n': s += '\n'; break;
                    case 't': s += '\t'; break;
                    case 'r': s += '\r'; break;
                    default:
                        fail(line_, col_, std::string("invalid escape '\\") + cur() + "'");
                    }
                    consume();
                } else {
                    s += cur();
                    consume();
                }
            }
            consume();
            tok_.kind = Tok::String;
            tok_.text = s;
            return;
        }
        switch (c) {
        case '(': consume(); tok_.kind = Tok::LParen; return;
        case ')': consume(); tok_.kind = Tok::RParen; return;
        case '[': consume(); tok_.kind = Tok::LBracket; return;
        case ']': consume(); tok_.kind = Tok::RBracket; return;
        case '.': consume(); tok_.kind = Tok::Dot; return;
        case ',': consume(); tok_.kind = Tok::Comma; return;
        case '&':
            consume();
            if (cur() != '&') fail(tok_.line, tok_.col, "expected '&&'");
            consume();
            tok_.kind = Tok::AndAnd;
            return;
        case '|':
            consume();
            if (cur() != '|') fail(tok_.line, tok_.col, "expected '||'");
            consume();
            tok_.kind = Tok::OrOr;
            return;
        case '<':
            consume();
            if (cur() == '=') { consume(); tok_.kind = Tok::Le; } else tok_.kind = Tok::Lt;
            return;
        case '>':
            consume();
            if (cur() == '=') { consume(); tok_.kind = Tok::Ge; } else tok_.kind = Tok::Gt;
            return;
        case '=':
            consume();
            if (cur() != '=') fail(tok_.line, tok_.col, "expected '==' (assignment is not supported)");
            consume();
            if (cur() == '=') consume(); // '===' alias
            tok_.kind = Tok::Eq;
            return;
        case '!':
            consume();
            if (cur() == '=') {
                consume();
                if (cur() == '=') consume(); // '!==' alias
                tok_.kind = Tok::Ne;
            } else {
                tok_.kind = Tok::Bang;
            }
            return;
        default:
            fail(tok_.line, tok_.col, std::string("unexpected character '") + c + "'");
        }
    }

    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

} // namespace detail

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) {}

    ExprPtr parse() {
        ExprPtr e = parse_or();
        if (lex_.peek().kind != Tok::End)
            fail(lex_.peek(), "expected end of input");
        return e;
    }

private:
    [[noreturn]] void fail(const Token& t, const std::string& expected) {
        throw Error(Errc::SyntaxError,
                    std::to_string(t.line) + ":" + std::to_string(t.col) + ": " + expected +
                        ", got " + tok_name(t.kind));
    }

    Token expect(Tok kind, const std::string& what) {
        if (lex_.peek().kind != kind) fail(lex_.peek(), "expected " + what);
        return lex_.next();
    }

    static std::shared_ptr<Expr> node(ExprKind k, const Token& at) {
        auto e = std::make_shared<Expr>();
        e->kind = k;
        e->line = at.line;
        e->col = at.col;
        return e;
    }

    ExprPtr parse_or() {
        ExprPtr lhs = parse_and();
        while (lex_.peek().kind == Tok::OrOr) {
            Token op = lex_.next();
            auto e = node(ExprKind::Or, op);
            e->lhs = lhs;
            e->rhs = parse_and();
            lhs = e;
        }
        return lhs;
    }

    ExprPtr parse_and() {
        ExprPtr lhs = parse_unary();
        while (lex_.peek().kind == Tok::AndAnd) {
            Token op = lex_.next();
            auto e = node(ExprKind::And, op);
            e->lhs = lhs;
            e->rhs = parse_unary();
            lhs = e;
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (lex_.peek().kind == Tok::Bang) {
            Token op = lex_.next();
            auto e = node(ExprKind::Not, op);
            e->operand = parse_unary();
            return e;
        }
        return parse_cmp();
    }

    static std::optional<CompareOp> as_cmp(Tok t) {
        switch (t) {
        case Tok::Lt: return CompareOp::Lt;
        case Tok::Le: return CompareOp::Le;
        case Tok::Gt: return CompareOp::Gt;
        case Tok::Ge: return CompareOp::Ge;
        case Tok::Eq: return CompareOp::Eq;
        case Tok::Ne: return CompareOp::Ne;
        default: return std::nullopt;
        }
    }

    ExprPtr parse_cmp() {
        ExprPtr lhs = parse_operand();
        if (auto op = as_cmp(lex_.peek().kind)) {
            Token t = lex_.next();
            auto e = node(ExprKind::Compare, t);
            e->cmp = *op;
            e->lhs = lhs;
            e->rhs = parse_operand();
            return e;
        }
        return lhs;
    }

    ExprPtr parse_operand() {
        const Token& t = lex_.peek();
        switch (t.kind) {
        case Tok::LParen: {
            lex_.next();
            ExprPtr inner = parse_or();
            expect(Tok::RParen, "')' after expression");
            return inner;
        }
        case Tok::True:
        case Tok::False: {
            Token tk = lex_.next();
            auto e = node(ExprKind::Literal, tk);
            e->literal = Value(tk.kind == Tok::True);
            return e;
        }
        case Tok::Number: {
            Token tk = lex_.next();
            auto e = node(ExprKind::Literal, tk);
            e->literal = Value(tk.number);
            return e;
        }
        case Tok::String: {
            Token tk = lex_.next();
            auto e = node(ExprKind::Literal, tk);
            e->literal = Value(tk.text);
            return e;
        }
        case Tok::Ident:
            return parse_path_or_call();
        default:
            fail(t, "expected an operand (literal, attribute path, or '(')");
        }
    }

    static std::optional<CallFn> as_fn(const std::string& name) {
        if (name == "includes") return CallFn::Includes;
        if (name == "contains") return CallFn::Contains;
        if (name == "matches") return CallFn::Matches;
        return std::nullopt;
    }

    ExprPtr parse_path_or_call() {
        Token first = expect(Tok::Ident, "identifier");
        auto path = node(ExprKind::Path, first);
        path->segments.push_back({false, first.text});

        while (true) {
            if (lex_.peek().kind == Tok::Dot) {
                lex_.next();
                Token id = expect(Tok::Ident, "identifier after '.'");
                if (lex_.peek().kind == Tok::LParen) {
                    auto fn = as_fn(id.text);
                    if (!fn)
                        throw Error(Errc::SyntaxError,
                                    std::to_string(id.line) + ":" + std::to_string(id.col) +
                                        ": unknown function '" + id.text +
                                        "' (expected includes, contains, or matches)");
                    auto call = node(ExprKind::Call, id);
                    call->fn = *fn;
                    call->callee = path;
                    lex_.next(); // '('
                    if (lex_.peek().kind != Tok::RParen) {
                        call->args.push_back(parse_operand());
                        while (lex_.peek().kind == Tok::Comma) {
                            lex_.next();
                            call->args.push_back(parse_operand());
                        }
                    }
                    expect(Tok::RParen, "')' after arguments");
                    return call;
                }
                path->segments.push_back({false, id.text});
            } else if (lex_.peek().kind == Tok::LBracket) {
                lex_.next();
                Token key = expect(Tok::String, "string key inside '[]'");
                expect(Tok::RBracket, "']' after key");
                path->segments.push_back({true, key.text});
            } else {
                return path;
            }
        }
    }

    Lexer lex_;
};

} // namespace detail

/// Parses DSL text into an AST. Throws Error{SyntaxError} with line:column.
inline ExprPtr parse_expression(std::string_view source) {
    return detail::Parser(source).parse();
}

// ---------------------------------------------------------------------------
// Printer (canonical source form; parse(to_source(e)) == e)
// ---------------------------------------------------------------------------

namespace detail {

inline int expr_level(const Expr& e) {
    switch (e.kind) {
    case ExprKind::Or: return 1;
    case ExprKind::And: return 2;
    case ExprKind::Not:
    case ExprKind::Compare: return 3;
    default: return 4;
    }
}

inline std::string escape_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
        }
    }
    out += '"';
    return out;
}

inline void print_expr(const Expr& e, int min_level, std::string& out) {
    bool parens = expr_level(e) < min_level;
    if (parens) out += '(';
    switch (e.kind) {
    case ExprKind::Or:
        print_expr(*e.lhs, 1, out);
        out += " || ";
        print_expr(*e.rhs, 2, out);
        break;
    case ExprKind::And:
        print_expr(*e.lhs, 2, out);
        out += " && ";
        print_expr(*e.rhs, 3, out);
        break;
    case ExprKind::Not:
        out += '!';
        // Parenthesize anything below primary except a nested '!'.
        if (e.operand->kind == ExprKind::Not) print_expr(*e.operand, 3, out);
        else print_expr(*e.operand, 4, out);
        break;
    case ExprKind::Compare: {
        print_expr(*e.lhs, 4, out);
        const char* ops[] = {" < ", " <= ", " > ", " >= ", " == ", " != "};
        out += ops[static_cast<int>(e.cmp)];
        print_expr(*e.rhs, 4, out);
        break;
    }
    case ExprKind::Call: {
        print_expr(*e.callee, 4, out);
        const char* fns[] = {".includes(", ".contains(", ".matches("};
        out += fns[static_cast<int>(e.fn)];
        for (size_t i = 0; i < e.args.size(); ++i) {
            if (i) out += ", ";
            print_expr(*e.args[i], 4, out);
        }
        out += ')';
        break;
    }
    case ExprKind::Path:
        for (const auto& seg : e.segments) {
            if (seg.is_key) out += "[" + escape_string(seg.text) + "]";
            else {
                if (&seg != &e.segments.front()) out += '.';
                out += seg.text;
            }
        }
        break;
    case ExprKind::Literal:
        if (e.literal.is_bool()) out += e.literal.as_bool() ? "true" : "false";
        else if (e.literal.is_number()) out += format_number(e.literal.as_number());
        else out += escape_string(e.literal.as_string());
        break;
    }
    if (parens) out += ')';
}

} // namespace detail

inline std::string to_source(const Expr& e) {
    std::string out;
    detail::print_expr(e, 1, out);
    return out;
}

// ---------------------------------------------------------------------------
// Typecheck
// ---------------------------------------------------------------------------

/// A typechecked expression: every path resolved against a schema, operand
/// types verified, literal regexes pre-compiled. Immutable and safe to share.
struct TypedExpr {
    ExprPtr ast;
    std::vector<std::string> referenced_attrs; // sorted, unique declared paths

    bool references(const std::string& attr) const {
        return std::binary_search(referenced_attrs.begin(), referenced_attrs.end(), attr);
    }
};

namespace detail {

struct TypeChecker {
    const ContextSchema& schema;
    std::set<std::string> refs;

    [[noreturn]] static void type_fail(const Expr& e, const std::string& msg) {
        throw Error(Errc::TypeError,
                    std::to_string(e.line) + ":" + std::to_string(e.col) + ": " + msg);
    }

    std::shared_ptr<Expr> clone(const Expr& e) {
        auto c = std::make_shared<Expr>(e);
        return c;
    }

    AttrType resolve_path(Expr& p) {
        std::string attr;
        size_t matched = 0;
        const AttrType* found = nullptr;
        for (size_t i = 0; i < p.segments.size(); ++i) {
            if (p.segments[i].is_key) break;
            if (!attr.empty()) attr += '.';
            attr += p.segments[i].text;
            if (const AttrType* t = schema.find(attr)) {
                found = t;
                matched = i + 1;
                break; // prefix-freedom: no longer declared path can match
            }
        }
        std::string full = path_to_string(p.segments);
        if (!found)
            throw Error(Errc::UnknownAttribute,
                        std::to_string(p.line) + ":" + std::to_string(p.col) +
                            ": unknown attribute '" + full + "'");
        p.resolved_attr = attr;
        refs.insert(attr);
        size_t rest = p.segments.size() - matched;
        if (rest == 0) return *found;
        if (rest == 1 && p.segments[matched].is_key) {
            if (found->kind != AttrType::Kind::Map)
                type_fail(p, "'" + attr + "' is " + found->to_string() +
                                 " and cannot be indexed with a key");
            p.map_key = p.segments[matched].text;
            return found->scalar_type();
        }
        throw Error(Errc::UnknownAttribute,
                    std::to_string(p.line) + ":" + std::to_string(p.col) +
                        ": unknown attribute '" + full + "' ('" + attr +
                        "' does not extend further)");
    }

    static bool is_scalar(const AttrType& t) {
        return t.kind == AttrType::Kind::Boolean || t.kind == AttrType::Kind::Number ||
               t.kind == AttrType::Kind::String;
    }

    ExprPtr check(const Expr& e, AttrType& out) {
        switch (e.kind) {
        case ExprKind::Literal: {
            if (e.literal.is_bool()) out = AttrType::boolean();
            else if (e.literal.is_number()) out = AttrType::number();
            else out = AttrType::string();
            return clone(e);
        }
        case ExprKind::Path: {
            auto c = clone(e);
            out = resolve_path(*c);
            return c;
        }
        case ExprKind::Call: {
            auto c = clone(e);
            AttrType callee_t;
            c->callee = check(*e.callee, callee_t);
            if (e.args.size() != 1)
                type_fail(e, "function expects exactly one argument");
            AttrType arg_t;
            c->args.clear();
            c->args.push_back(check(*e.args[0], arg_t));
            switch (e.fn) {
            case CallFn::Includes:
                if (!((callee_t.kind == AttrType::Kind::StringList ||
                       callee_t.kind == AttrType::Kind::String) &&
                      arg_t.kind == AttrType::Kind::String))
                    type_fail(e, "includes expects list<string> or string receiver and a string "
                                 "argument, got " + callee_t.to_string() + " and " + arg_t.to_string());
                break;
            case CallFn::Contains:
                if (callee_t.kind != AttrType::Kind::String || arg_t.kind != AttrType::Kind::String)
                    type_fail(e, "contains expects string receiver and string argument, got " +
                                     callee_t.to_string() + " and " + arg_t.to_string());
                break;
            case CallFn::Matches:
                if (callee_t.kind != AttrType::Kind::String || arg_t.kind != AttrType::Kind::String)
                    type_fail(e, "matches expects string receiver and string pattern, got " +
                                     callee_t.to_string() + " and " + arg_t.to_string());
                if (c->args[0]->kind == ExprKind::Literal) {
                    try {
                        c->literal_regex = std::make_shared<const std::regex>(
                            c->args[0]->literal.as_string(), std::regex::ECMAScript);
                    } catch (const std::regex_error& re) {
                        throw Error(Errc::RegexError,
                                    std::to_string(e.line) + ":" + std::to_string(e.col) +
                                        ": invalid regular expression: " + re.what());
                    }
                }
                break;
            }
            out = AttrType::boolean();
            return c;
        }
        case ExprKind::Compare: {
            auto c = clone(e);
            AttrType lt, rt;
            c->lhs = check(*e.lhs, lt);
            c->rhs = check(*e.rhs, rt);
            bool ordering = e.cmp == CompareOp::Lt || e.cmp == CompareOp::Le ||
                            e.cmp == CompareOp::Gt || e.cmp == CompareOp::Ge;
            if (ordering) {
                if (lt.kind != AttrType::Kind::Number || rt.kind != AttrType::Kind::Number)
                    type_fail(e, "ordering comparison needs numbers, got " + lt.to_string() +
                                     " and " + rt.to_string());
            } else {
                if (!is_scalar(lt) || !is_scalar(rt) || lt.kind != rt.kind)
                    type_fail(e, "equality needs two values of the same scalar type, got " +
                                     lt.to_string() + " and " + rt.to_string());
            }
            out = AttrType::boolean();
            return c;
        }
        case ExprKind::Not: {
            auto c = clone(e);
            AttrType t;
            c->operand = check(*e.operand, t);
            if (t.kind != AttrType::Kind::Boolean)
                type_fail(e, "'!' needs a boolean operand, got " + t.to_string());
            out = AttrType::boolean();
            return c;
        }
        case ExprKind::Or:
        case ExprKind::And: {
            auto c = clone(e);
            AttrType lt, rt;
            c->lhs = check(*e.lhs, lt);
            c->rhs = check(*e.rhs, rt);
            if (lt.kind != AttrType::Kind::Boolean || rt.kind != AttrType::Kind::Boolean)
                type_fail(e, std::string(e.kind == ExprKind::And ? "'&&'" : "'||'") +
                                 " needs boolean operands, got " + lt.to_string() + " and " +
                                 rt.to_string());
            out = AttrType::boolean();
            return c;
        }
        }
        type_fail(e, "unreachable");
    }
};

} // namespace detail

/// Resolves every path against the schema and verifies operand types.
/// The whole expression must be boolean.
inline TypedExpr typecheck(const ExprPtr& expr, const ContextSchema& schema) {
    detail::TypeChecker tc{schema, {}};
    AttrType t;
    ExprPtr annotated = tc.check(*expr, t);
    if (t.kind != AttrType::Kind::Boolean)
        throw Error(Errc::TypeError, "expression must be boolean, got " + t.to_string());
    TypedExpr out;
    out.ast = annotated;
    out.referenced_attrs.assign(tc.refs.begin(), tc.refs.end());
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation context
// ---------------------------------------------------------------------------

/// Attribute values for one evaluation. Values for declared attributes must
/// match the declared type; attributes missing from the context surface as
/// MissingAttribute at their use site; undeclared attributes are ignored.
class EvaluationContext {
public:
    EvaluationContext() : schema_(std::make_shared<ContextSchema>()) {}
    explicit EvaluationContext(std::shared_ptr<const ContextSchema> schema)
        : schema_(std::move(schema)) {}

    static EvaluationContext from_json(const nlohmann::json& j,
                                       std::shared_ptr<const ContextSchema> schema) {
        if (!j.is_object())
            throw Error(Errc::TypeError, "context must be a JSON object");
        EvaluationContext ctx(std::move(schema));
        ctx.absorb(j, "");
        return ctx;
    }

    void set(const std::string& attr, Value v) {
        const AttrType* t = schema_->find(attr);
        if (!t)
            throw Error(Errc::UnknownAttribute, "context attribute '" + attr + "' is not declared");
        check_type(attr, *t, v);
        values_[attr] = std::move(v);
    }

    const Value* find(const std::string& attr) const {
        auto it = values_.find(attr);
        return it == values_.end() ? nullptr : &it->second;
    }

    const std::map<std::string, Value>& values() const { return values_; }
    const std::shared_ptr<const ContextSchema>& schema() const { return schema_; }

    /// Canonical nested JSON form of the provided values.
    nlohmann::json to_json() const {
        nlohmann::json root = nlohmann::json::object();
        for (const auto& [path, v] : values_) {
            nlohmann::json* node = &root;
            size_t start = 0;
            while (true) {
                size_t dot = path.find('.', start);
                std::string seg = path.substr(start, dot == std::string::npos ? dot : dot - start);
                if (dot == std::string::npos) {
                    (*node)[seg] = v.to_json();
                    break;
                }
                node = &(*node)[seg];
                start = dot + 1;
            }
        }
        return root;
    }

private:
    void absorb(const nlohmann::json& j, const std::string& prefix) {
        for (const auto& [key, val] : j.items()) {
            // Flattened keys may carry dots; fold them into the path.
            std::string path = prefix.empty() ? key : prefix + "." + key;
            if (const AttrType* t = schema_->find(path)) {
                values_[path] = convert(path, *t, val);
            } else if (val.is_object()) {
                absorb(val, path);
            }
            // Undeclared leaves are inert: no typechecked rule can reach them.
        }
    }

    static Value convert(const std::string& attr, const AttrType& t, const nlohmann::json& j) {
        switch (t.kind) {
        case AttrType::Kind::Boolean:
            if (j.is_boolean()) return Value(j.get<bool>());
            break;
        case AttrType::Kind::Number:
            if (j.is_number()) return Value(j.get<double>());
            break;
        case AttrType::Kind::String:
            if (j.is_string()) return Value(j.get<std::string>());
            break;
        case AttrType::Kind::StringList:
            if (j.is_array()) {
                Value::List l;
                for (const auto& e : j) {
                    if (!e.is_string())
                        throw Error(Errc::TypeError, "context attribute '" + attr +
                                                         "': list elements must be strings");
                    l.push_back(e.get<std::string>());
                }
                return Value(std::move(l));
            }
            break;
        case AttrType::Kind::Map:
            if (j.is_object()) {
                Value::Map m;
                for (const auto& [k, v] : j.items())
                    m[k] = convert(attr + "[\"" + k + "\"]", t.scalar_type(), v);
                return Value(std::move(m));
            }
            break;
        }
        throw Error(Errc::TypeError, "context attribute '" + attr + "': expected " +
                                         t.to_string() + ", got " + j.type_name());
    }

    static void check_type(const std::string& attr, const AttrType& t, const Value& v) {
        bool ok = false;
        switch (t.kind) {
        case AttrType::Kind::Boolean: ok = v.is_bool(); break;
        case AttrType::Kind::Number: ok = v.is_number(); break;
        case AttrType::Kind::String: ok = v.is_string(); break;
        case AttrType::Kind::StringList: ok = v.is_list(); break;
        case AttrType::Kind::Map:
            ok = v.is_map();
            if (ok)
                for (const auto& [k, e] : v.as_map())
                    check_type(attr + "[\"" + k + "\"]", t.scalar_type(), e);
            break;
        }
        if (!ok)
            throw Error(Errc::TypeError, "context attribute '" + attr + "': expected " +
                                             t.to_string() + ", got " + v.type_name());
    }

    std::shared_ptr<const ContextSchema> schema_;
    std::map<std::string, Value> values_;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline Value eval_node(const Expr& e, const EvaluationContext& ctx);

inline bool eval_bool(const Expr& e, const EvaluationContext& ctx) {
    return eval_node(e, ctx).as_bool();
}

inline Value lookup(const Expr& p, const EvaluationContext& ctx) {
    const Value* v = ctx.find(p.resolved_attr);
    if (!v)
        throw Error(Errc::MissingAttribute,
                    "attribute '" + p.resolved_attr + "' is not present in the context");
    if (!p.map_key) return *v;
    const auto& m = v->as_map();
    auto it = m.find(*p.map_key);
    if (it == m.end())
        throw Error(Errc::MissingAttribute, "attribute '" + p.resolved_attr + "[\"" + *p.map_key +
                                                "\"]' is not present in the context");
    return it->second;
}

inline Value eval_node(const Expr& e, const EvaluationContext& ctx) {
    switch (e.kind) {
    case ExprKind::Literal:
        return e.literal;
    case ExprKind::Path:
        return lookup(e, ctx);
    case ExprKind::Not:
        return Value(!eval_bool(*e.operand, ctx));
    case ExprKind::And: {
        if (!eval_bool(*e.lhs, ctx)) return Value(false); // short-circuit
        return Value(eval_bool(*e.rhs, ctx));
    }
    case ExprKind::Or: {
        if (eval_bool(*e.lhs, ctx)) return Value(true); // short-circuit
        return Value(eval_bool(*e.rhs, ctx));
    }
    case ExprKind::Compare: {
        Value a = eval_node(*e.lhs, ctx);
        Value b = eval_node(*e.rhs, ctx);
        if (a.is_number()) {
            double x = a.as_number(), y = b.as_number();
            switch (e.cmp) {
            case CompareOp::Lt: return Value(x < y);
            case CompareOp::Le: return Value(x <= y);
            case CompareOp::Gt: return Value(x > y);
            case CompareOp::Ge: return Value(x >= y);
            case CompareOp::Eq: return Value(x == y);
            case CompareOp::Ne: return Value(x != y);
            }
        }
        // strings byte-wise, booleans by value; ordering excluded by typecheck
        return Value(e.cmp == CompareOp::Eq ? a == b : a != b);
    }
    case ExprKind::Call: {
        Value recv = eval_node(*e.callee, ctx);
        Value arg = eval_node(*e.args[0], ctx);
        switch (e.fn) {
        case CallFn::Includes:
            if (recv.is_list()) {
                const auto& l = recv.as_list();
                return Value(std::find(l.begin(), l.end(), arg.as_string()) != l.end());
            }
            return Value(recv.as_string().find(arg.as_string()) != std::string::npos);
        case CallFn::Contains:
            return Value(recv.as_string().find(arg.as_string()) != std::string::npos);
        case CallFn::Matches: {
            if (e.literal_regex)
                return Value(std::regex_search(recv.as_string(), *e.literal_regex));
            try {
                std::regex re(arg.as_string(), std::regex::ECMAScript);
                return Value(std::regex_search(recv.as_string(), re));
            } catch (const std::regex_error& rex) {
                throw Error(Errc::RegexError,
                            "invalid regular expression '" + arg.as_string() + "': " + rex.what());
            }
        }
        }
        break;
    }
    }
    throw Error(Errc::ExpressionError, "malformed expression node");
}

} // namespace detail

/// Evaluates a typechecked expression. Throws Error{MissingAttribute} when a
/// referenced attribute (or map key) is absent and Error{RegexError} for an
/// invalid non-literal pattern; both are routed to toggle defaults upstream.
inline bool evaluate(const TypedExpr& expr, const EvaluationContext& ctx) {
    return detail::eval_node(*expr.ast, ctx).as_bool();
}

/// Convenience used by the stores: parse + typecheck in one step, wrapping
/// failures as ExpressionError with the original position preserved.
inline TypedExpr compile_expression(std::string_view source, const ContextSchema& schema) {
    try {
        return typecheck(parse_expression(source), schema);
    } catch (const Error& e) {
        if (e.code() == Errc::SyntaxError || e.code() == Errc::TypeError ||
            e.code() == Errc::UnknownAttribute || e.code() == Errc::RegexError)
            throw Error(Errc::ExpressionError, e.message(), std::string(errc_name(e.code())));
        throw;
    }
}

} // namespace horizon
