// obsel/formula.hpp — predicate/expression AST for a set-theoretic modelling
// language, with parser, printer, identifier analysis, substitution and
// structural hashing.
//
// Design notes:
//
//   Formulas are immutable trees of shared nodes; substitution and priming
//   build new trees and share untouched subtrees, so values are safe to pass
//   between threads.  The node kind set is closed and split into predicate
//   kinds and expression kinds; factories enforce arity and the
//   predicate/expression stratification, so an ill-formed tree cannot be
//   constructed.
//
//   Concrete syntax is the ASCII keyboard notation ("|->", "<+", "-->",
//   "!x.", "&", ...).  Quantifiers scope to the end of the enclosing
//   predicate.  Set operators share one precedence tier and mixing different
//   ones without parentheses is a parse error.
//
//   MetaVar nodes ("?f") are pattern holes used by the lemma store only;
//   the parser accepts them only when asked to, and the printer only renders
//   them in pattern mode.

#ifndef OBSEL_FORMULA_HPP
#define OBSEL_FORMULA_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "obsel/errors.hpp"

namespace obsel {

// ── Node kinds ──────────────────────────────────────────────────────────────

enum class Kind : std::uint8_t {
    // predicates
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    Iff,
    Forall,
    Exists,
    Equal,
    NotEqual,
    In,
    SubsetEq,
    Lt,
    Le,
    Gt,
    Ge,
    // expressions
    Ident,
    IntLit,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Union,
    Inter,
    SetMinus,
    CartProd,
    Pow,
    Maplet,
    SetExtension,
    Dom,
    Ran,
    Image,
    Override,
    TotalFun,
    PartialFun,
    Relation,
    FunApp,
    Nat,
    Int,
    MetaVar,
};

inline bool is_predicate_kind(Kind k) {
    return static_cast<std::uint8_t>(k) <= static_cast<std::uint8_t>(Kind::Ge);
}

inline bool is_expression_kind(Kind k) { return !is_predicate_kind(k); }

inline bool is_quantifier_kind(Kind k) { return k == Kind::Forall || k == Kind::Exists; }

// PascalCase name, used by translation-map files and diagnostics.
inline const char* kind_name(Kind k) {
    switch (k) {
        case Kind::True: return "True";
        case Kind::False: return "False";
        case Kind::Not: return "Not";
        case Kind::And: return "And";
        case Kind::Or: return "Or";
        case Kind::Implies: return "Implies";
        case Kind::Iff: return "Iff";
        case Kind::Forall: return "Forall";
        case Kind::Exists: return "Exists";
        case Kind::Equal: return "Equal";
        case Kind::NotEqual: return "NotEqual";
        case Kind::In: return "In";
        case Kind::SubsetEq: return "SubsetEq";
        case Kind::Lt: return "Lt";
        case Kind::Le: return "Le";
        case Kind::Gt: return "Gt";
        case Kind::Ge: return "Ge";
        case Kind::Ident: return "Ident";
        case Kind::IntLit: return "IntLit";
        case Kind::Add: return "Add";
        case Kind::Sub: return "Sub";
        case Kind::Mul: return "Mul";
        case Kind::Div: return "Div";
        case Kind::Mod: return "Mod";
        case Kind::Union: return "Union";
        case Kind::Inter: return "Inter";
        case Kind::SetMinus: return "SetMinus";
        case Kind::CartProd: return "CartProd";
        case Kind::Pow: return "Pow";
        case Kind::Maplet: return "Maplet";
        case Kind::SetExtension: return "SetExtension";
        case Kind::Dom: return "Dom";
        case Kind::Ran: return "Ran";
        case Kind::Image: return "Image";
        case Kind::Override: return "Override";
        case Kind::TotalFun: return "TotalFun";
        case Kind::PartialFun: return "PartialFun";
        case Kind::Relation: return "Relation";
        case Kind::FunApp: return "FunApp";
        case Kind::Nat: return "Nat";
        case Kind::Int: return "Int";
        case Kind::MetaVar: return "MetaVar";
    }
    return "?";
}

// Surface operator token, used as the shingle label in listings.
inline const char* kind_symbol(Kind k) {
    switch (k) {
        case Kind::True: return "true";
        case Kind::False: return "false";
        case Kind::Not: return "not";
        case Kind::And: return "&";
        case Kind::Or: return "or";
        case Kind::Implies: return "=>";
        case Kind::Iff: return "<=>";
        case Kind::Forall: return "!";
        case Kind::Exists: return "#";
        case Kind::Equal: return "=";
        case Kind::NotEqual: return "/=";
        case Kind::In: return ":";
        case Kind::SubsetEq: return "<:";
        case Kind::Lt: return "<";
        case Kind::Le: return "<=";
        case Kind::Gt: return ">";
        case Kind::Ge: return ">=";
        case Kind::Ident: return "id";
        case Kind::IntLit: return "lit";
        case Kind::Add: return "+";
        case Kind::Sub: return "-";
        case Kind::Mul: return "*";
        case Kind::Div: return "/";
        case Kind::Mod: return "mod";
        case Kind::Union: return "\\/";
        case Kind::Inter: return "/\\";
        case Kind::SetMinus: return "\\";
        case Kind::CartProd: return "**";
        case Kind::Pow: return "POW";
        case Kind::Maplet: return "|->";
        case Kind::SetExtension: return "{}";
        case Kind::Dom: return "dom";
        case Kind::Ran: return "ran";
        case Kind::Image: return "[]";
        case Kind::Override: return "<+";
        case Kind::TotalFun: return "-->";
        case Kind::PartialFun: return "+->";
        case Kind::Relation: return "<->";
        case Kind::FunApp: return "apply";
        case Kind::Nat: return "NAT";
        case Kind::Int: return "INT";
        case Kind::MetaVar: return "?";
    }
    return "?";
}

// Fixed arity per kind; -1 for SetExtension (one or more children).
inline int kind_arity(Kind k) {
    switch (k) {
        case Kind::True:
        case Kind::False:
        case Kind::Ident:
        case Kind::IntLit:
        case Kind::Nat:
        case Kind::Int:
        case Kind::MetaVar:
            return 0;
        case Kind::Not:
        case Kind::Forall:
        case Kind::Exists:
        case Kind::Pow:
        case Kind::Dom:
        case Kind::Ran:
            return 1;
        case Kind::SetExtension:
            return -1;
        default:
            return 2;
    }
}

// ── Formula nodes ───────────────────────────────────────────────────────────

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

class Formula {
public:
    Kind kind() const { return kind_; }
    const std::vector<FormulaPtr>& children() const { return children_; }
    const FormulaPtr& child(std::size_t i) const { return children_[i]; }

    // Ident / MetaVar payload.
    const std::string& name() const { return name_; }
    // IntLit payload.
    long long value() const { return value_; }
    // Forall / Exists payload.
    const std::vector<std::string>& bound() const { return bound_; }

    SourceSpan span() const { return span_; }

    bool is_predicate() const { return is_predicate_kind(kind_); }
    bool is_expression() const { return is_expression_kind(kind_); }

    // ── Factories (arity and stratification checked) ────────────────────

    static FormulaPtr leaf(Kind k, SourceSpan span = {}) {
        if (k != Kind::True && k != Kind::False && k != Kind::Nat && k != Kind::Int)
            throw Error(std::string("leaf() does not build ") + kind_name(k));
        return FormulaPtr(new Formula(k, {}, "", 0, {}, span));
    }

    static FormulaPtr ident(std::string name, SourceSpan span = {}) {
        if (name.empty()) throw Error("identifier name must be nonempty");
        return FormulaPtr(new Formula(Kind::Ident, {}, std::move(name), 0, {}, span));
    }

    static FormulaPtr int_lit(long long value, SourceSpan span = {}) {
        return FormulaPtr(new Formula(Kind::IntLit, {}, "", value, {}, span));
    }

    static FormulaPtr meta_var(std::string name, SourceSpan span = {}) {
        if (name.empty()) throw Error("metavariable name must be nonempty");
        return FormulaPtr(new Formula(Kind::MetaVar, {}, std::move(name), 0, {}, span));
    }

    static FormulaPtr node(Kind k, std::vector<FormulaPtr> children, SourceSpan span = {}) {
        if (is_quantifier_kind(k)) throw Error("use quantifier() for binder nodes");
        int arity = kind_arity(k);
        if (arity == 0)
            throw Error(std::string("node() does not build leaf kind ") + kind_name(k));
        if (arity >= 0 && children.size() != static_cast<std::size_t>(arity))
            throw Error(std::string(kind_name(k)) + " expects " + std::to_string(arity) +
                        " children, got " + std::to_string(children.size()));
        if (k == Kind::SetExtension && children.empty())
            throw Error("SetExtension expects at least one element");
        for (const auto& c : children)
            if (!c) throw Error("null child");
        check_child_categories(k, children);
        return FormulaPtr(new Formula(k, std::move(children), "", 0, {}, span));
    }

    static FormulaPtr quantifier(Kind k, std::vector<std::string> bound, FormulaPtr body,
                                 SourceSpan span = {}) {
        if (!is_quantifier_kind(k)) throw Error("quantifier() expects Forall or Exists");
        if (bound.empty()) throw Error("quantifier bound list must be nonempty");
        if (!body || !body->is_predicate())
            throw Error("quantifier body must be a predicate");
        return FormulaPtr(
            new Formula(k, {std::move(body)}, "", 0, std::move(bound), span));
    }

    // Structural equality; spans are ignored.
    friend bool operator==(const Formula& a, const Formula& b) {
        if (a.kind_ != b.kind_ || a.name_ != b.name_ || a.value_ != b.value_ ||
            a.bound_ != b.bound_ || a.children_.size() != b.children_.size())
            return false;
        for (std::size_t i = 0; i < a.children_.size(); ++i)
            if (!(*a.children_[i] == *b.children_[i])) return false;
        return true;
    }

private:
    Formula(Kind k, std::vector<FormulaPtr> children, std::string name, long long value,
            std::vector<std::string> bound, SourceSpan span)
        : kind_(k),
          children_(std::move(children)),
          name_(std::move(name)),
          value_(value),
          bound_(std::move(bound)),
          span_(span) {}

    static void check_child_categories(Kind k, const std::vector<FormulaPtr>& children) {
        bool want_predicates;
        switch (k) {
            case Kind::Not:
            case Kind::And:
            case Kind::Or:
            case Kind::Implies:
            case Kind::Iff:
                want_predicates = true;
                break;
            default:
                // comparisons, membership and every expression operator take
                // expression children
                want_predicates = false;
                break;
        }
        for (const auto& c : children) {
            if (c->is_predicate() != want_predicates)
                throw Error(std::string(kind_name(k)) + ": child " + kind_name(c->kind()) +
                            " violates predicate/expression stratification");
        }
    }

    Kind kind_;
    std::vector<FormulaPtr> children_;
    std::string name_;
    long long value_ = 0;
    std::vector<std::string> bound_;
    SourceSpan span_;
};

inline bool equal(const FormulaPtr& a, const FormulaPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return *a == *b;
}

// ── Identifier analysis ─────────────────────────────────────────────────────

namespace detail {

inline void collect_free(const Formula& f, std::map<std::string, int>& bound,
                         std::set<std::string>& out) {
    switch (f.kind()) {
        case Kind::Ident:
            if (bound.find(f.name()) == bound.end()) out.insert(f.name());
            return;
        case Kind::Forall:
        case Kind::Exists:
            for (const auto& v : f.bound()) bound[v]++;
            collect_free(*f.child(0), bound, out);
            for (const auto& v : f.bound())
                if (--bound[v] == 0) bound.erase(v);
            return;
        default:
            for (const auto& c : f.children()) collect_free(*c, bound, out);
    }
}

}  // namespace detail

// All Ident names not bound by an enclosing quantifier. Bound names shadow.
inline std::set<std::string> free_identifiers(const FormulaPtr& f) {
    std::set<std::string> out;
    std::map<std::string, int> bound;
    detail::collect_free(*f, bound, out);
    return out;
}

inline bool contains_metavar(const FormulaPtr& f) {
    if (f->kind() == Kind::MetaVar) return true;
    for (const auto& c : f->children())
        if (contains_metavar(c)) return true;
    return false;
}

// ── Substitution ────────────────────────────────────────────────────────────

using Substitution = std::map<std::string, FormulaPtr>;

namespace detail {

// One walker serves both ordinary substitution (for Ident occurrences) and
// metavariable instantiation (for MetaVar occurrences).
inline FormulaPtr substitute_impl(const FormulaPtr& f, const Substitution& subst,
                                  bool on_metavars, std::map<std::string, int>& bound) {
    Kind target = on_metavars ? Kind::MetaVar : Kind::Ident;
    if (f->kind() == target) {
        auto it = subst.find(f->name());
        if (it == subst.end()) return f;
        if (!on_metavars && bound.find(f->name()) != bound.end()) return f;  // shadowed
        const auto fv = free_identifiers(it->second);
        for (const auto& v : fv)
            if (bound.find(v) != bound.end()) throw CaptureError(v, f->name());
        return it->second;
    }
    if (is_quantifier_kind(f->kind())) {
        for (const auto& v : f->bound()) bound[v]++;
        FormulaPtr body = substitute_impl(f->child(0), subst, on_metavars, bound);
        for (const auto& v : f->bound())
            if (--bound[v] == 0) bound.erase(v);
        if (body == f->child(0)) return f;
        return Formula::quantifier(f->kind(), f->bound(), std::move(body), f->span());
    }
    std::vector<FormulaPtr> children;
    bool changed = false;
    children.reserve(f->children().size());
    for (const auto& c : f->children()) {
        children.push_back(substitute_impl(c, subst, on_metavars, bound));
        changed = changed || children.back() != c;
    }
    if (!changed) return f;
    return Formula::node(f->kind(), std::move(children), f->span());
}

}  // namespace detail

// Replaces every free occurrence of each mapped identifier. Throws
// CaptureError if a replacement would be captured by a binder in f.
inline FormulaPtr substitute(const FormulaPtr& f, const Substitution& subst) {
    std::map<std::string, int> bound;
    return detail::substitute_impl(f, subst, /*on_metavars=*/false, bound);
}

// Replaces MetaVar holes; same capture discipline as substitute().
inline FormulaPtr substitute_metavars(const FormulaPtr& f, const Substitution& subst) {
    std::map<std::string, int> bound;
    return detail::substitute_impl(f, subst, /*on_metavars=*/true, bound);
}

// Renames every free occurrence of an identifier in vars to name + "'".
inline FormulaPtr prime(const FormulaPtr& f, const std::set<std::string>& vars) {
    Substitution subst;
    for (const auto& v : vars) subst.emplace(v, Formula::ident(v + "'"));
    return substitute(f, subst);
}

// ── Structural hashing ──────────────────────────────────────────────────────
//
// FNV-1a (64-bit) over a canonical pre-order serialization: per node one kind
// byte, a 32-bit little-endian child count, then the payload (identifier or
// metavariable name, decimal literal value, bound names — each
// NUL-terminated), then the children.  Spans do not contribute, so the hash
// is stable across reparses, runs and platforms.

namespace detail {

struct Fnv1a64 {
    std::uint64_t state = 1469598103934665603ull;

    void feed(const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state ^= bytes[i];
            state *= 1099511628211ull;
        }
    }
    void feed_byte(unsigned char b) { feed(&b, 1); }
    void feed_str(const std::string& s) {
        feed(s.data(), s.size());
        feed_byte(0);
    }
    void feed_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) feed_byte(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    }
    void feed_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) feed_byte(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    }
};

inline void hash_node(const Formula& f, Fnv1a64& h) {
    h.feed_byte(static_cast<unsigned char>(f.kind()));
    h.feed_u32(static_cast<std::uint32_t>(f.children().size()));
    switch (f.kind()) {
        case Kind::Ident:
        case Kind::MetaVar:
            h.feed_str(f.name());
            break;
        case Kind::IntLit:
            h.feed_str(std::to_string(f.value()));
            break;
        case Kind::Forall:
        case Kind::Exists:
            for (const auto& v : f.bound()) h.feed_str(v);
            break;
        default:
            break;
    }
    for (const auto& c : f.children()) hash_node(*c, h);
}

}  // namespace detail

inline std::uint64_t formula_hash(const FormulaPtr& f) {
    detail::Fnv1a64 h;
    detail::hash_node(*f, h);
    return h.state;
}

// ── Alpha equality ──────────────────────────────────────────────────────────

namespace detail {

inline bool alpha_equal_impl(const Formula& a, const Formula& b,
                             std::vector<std::pair<std::string, std::string>>& scope) {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case Kind::Ident: {
            for (auto it = scope.rbegin(); it != scope.rend(); ++it) {
                if (it->first == a.name() || it->second == b.name())
                    return it->first == a.name() && it->second == b.name();
            }
            return a.name() == b.name();
        }
        case Kind::MetaVar:
            return a.name() == b.name();
        case Kind::IntLit:
            return a.value() == b.value();
        case Kind::Forall:
        case Kind::Exists: {
            if (a.bound().size() != b.bound().size()) return false;
            for (std::size_t i = 0; i < a.bound().size(); ++i)
                scope.emplace_back(a.bound()[i], b.bound()[i]);
            bool ok = alpha_equal_impl(*a.child(0), *b.child(0), scope);
            scope.resize(scope.size() - a.bound().size());
            return ok;
        }
        default: {
            if (a.children().size() != b.children().size()) return false;
            for (std::size_t i = 0; i < a.children().size(); ++i)
                if (!alpha_equal_impl(*a.child(i), *b.child(i), scope)) return false;
            return true;
        }
    }
}

}  // namespace detail

// Structural equality modulo consistent renaming of bound variables.
inline bool alpha_equal(const FormulaPtr& a, const FormulaPtr& b) {
    std::vector<std::pair<std::string, std::string>> scope;
    return detail::alpha_equal_impl(*a, *b, scope);
}

// ── Lexer ───────────────────────────────────────────────────────────────────

struct ParseOptions {
    // Primed identifiers (x') only appear in generated proof obligations;
    // reject them in hand-written sources to avoid ambiguity.
    bool allow_primed = false;
    // MetaVar holes (?f) are only meaningful in lemma patterns.
    bool allow_metavars = false;
};

namespace detail {

enum class Tok : std::uint8_t {
    Ident, IntLit, MetaVar,
    KwNot, KwOr, KwMod, KwDom, KwRan, KwPow, KwNat, KwInt, KwTrue, KwFalse,
    Iff, Implies, Amp,
    Bang, HashSign, Dot, Comma,
    Eq, Neq, Colon, SubsetEq, Lt, Le, Gt, Ge,
    Union, Inter, SetMinus, CartProd, Override, TotalFun, PartialFun, Relation,
    Maplet,
    Plus, Minus, Star, Slash,
    LParen, RParen, LBrace, RBrace, LBracket, RBracket,
    Assign, SuchThat,
    End,
};

struct Token {
    Tok tok;
    std::string text;
    SourceSpan span;
};

inline const char* tok_label(Tok t) {
    switch (t) {
        case Tok::Ident: return "identifier";
        case Tok::IntLit: return "integer";
        case Tok::MetaVar: return "metavariable";
        case Tok::KwNot: return "not";
        case Tok::KwOr: return "or";
        case Tok::KwMod: return "mod";
        case Tok::KwDom: return "dom";
        case Tok::KwRan: return "ran";
        case Tok::KwPow: return "POW";
        case Tok::KwNat: return "NAT";
        case Tok::KwInt: return "INT";
        case Tok::KwTrue: return "true";
        case Tok::KwFalse: return "false";
        case Tok::Iff: return "<=>";
        case Tok::Implies: return "=>";
        case Tok::Amp: return "&";
        case Tok::Bang: return "!";
        case Tok::HashSign: return "#";
        case Tok::Dot: return ".";
        case Tok::Comma: return ",";
        case Tok::Eq: return "=";
        case Tok::Neq: return "/=";
        case Tok::Colon: return ":";
        case Tok::SubsetEq: return "<:";
        case Tok::Lt: return "<";
        case Tok::Le: return "<=";
        case Tok::Gt: return ">";
        case Tok::Ge: return ">=";
        case Tok::Union: return "\\/";
        case Tok::Inter: return "/\\";
        case Tok::SetMinus: return "\\";
        case Tok::CartProd: return "**";
        case Tok::Override: return "<+";
        case Tok::TotalFun: return "-->";
        case Tok::PartialFun: return "+->";
        case Tok::Relation: return "<->";
        case Tok::Maplet: return "|->";
        case Tok::Plus: return "+";
        case Tok::Minus: return "-";
        case Tok::Star: return "*";
        case Tok::Slash: return "/";
        case Tok::LParen: return "(";
        case Tok::RParen: return ")";
        case Tok::LBrace: return "{";
        case Tok::RBrace: return "}";
        case Tok::LBracket: return "[";
        case Tok::RBracket: return "]";
        case Tok::Assign: return ":=";
        case Tok::SuchThat: return ":|";
        case Tok::End: return "end of input";
    }
    return "?";
}

inline bool ident_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
inline bool ident_char(char c) {
    return ident_start(c) || (c >= '0' && c <= '9') || c == '\'';
}
inline bool digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = src.size();
    auto push = [&](Tok t, std::size_t start, std::size_t end) {
        out.push_back({t, std::string(src.substr(start, end - start)), {start, end}});
    };
    while (i < n) {
        char c = src[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
            continue;
        }
        std::size_t s = i;
        if (ident_start(c)) {
            ++i;
            while (i < n && ident_char(src[i])) ++i;
            std::string_view word = src.substr(s, i - s);
            Tok t = Tok::Ident;
            if (word == "not") t = Tok::KwNot;
            else if (word == "or") t = Tok::KwOr;
            else if (word == "mod") t = Tok::KwMod;
            else if (word == "dom") t = Tok::KwDom;
            else if (word == "ran") t = Tok::KwRan;
            else if (word == "POW") t = Tok::KwPow;
            else if (word == "NAT") t = Tok::KwNat;
            else if (word == "INT") t = Tok::KwInt;
            else if (word == "true") t = Tok::KwTrue;
            else if (word == "false") t = Tok::KwFalse;
            push(t, s, i);
            continue;
        }
        if (digit(c)) {
            ++i;
            while (i < n && digit(src[i])) ++i;
            push(Tok::IntLit, s, i);
            continue;
        }
        if (c == '?') {
            ++i;
            if (i >= n || !ident_start(src[i]))
                throw ParseError("expected identifier after '?'", {s, i});
            std::size_t ns = i;
            while (i < n && ident_char(src[i])) ++i;
            out.push_back({Tok::MetaVar, std::string(src.substr(ns, i - ns)), {s, i}});
            continue;
        }
        auto two = [&](std::size_t off) -> char { return i + off < n ? src[i + off] : '\0'; };
        switch (c) {
            case '<':
                if (two(1) == '=' && two(2) == '>') { i += 3; push(Tok::Iff, s, i); }
                else if (two(1) == '-' && two(2) == '>') { i += 3; push(Tok::Relation, s, i); }
                else if (two(1) == '=') { i += 2; push(Tok::Le, s, i); }
                else if (two(1) == ':') { i += 2; push(Tok::SubsetEq, s, i); }
                else if (two(1) == '+') { i += 2; push(Tok::Override, s, i); }
                else { ++i; push(Tok::Lt, s, i); }
                continue;
            case '>':
                if (two(1) == '=') { i += 2; push(Tok::Ge, s, i); }
                else { ++i; push(Tok::Gt, s, i); }
                continue;
            case '=':
                if (two(1) == '>') { i += 2; push(Tok::Implies, s, i); }
                else { ++i; push(Tok::Eq, s, i); }
                continue;
            case '/':
                if (two(1) == '=') { i += 2; push(Tok::Neq, s, i); }
                else if (two(1) == '\\') { i += 2; push(Tok::Inter, s, i); }
                else { ++i; push(Tok::Slash, s, i); }
                continue;
            case '\\':
                if (two(1) == '/') { i += 2; push(Tok::Union, s, i); }
                else { ++i; push(Tok::SetMinus, s, i); }
                continue;
            case '*':
                if (two(1) == '*') { i += 2; push(Tok::CartProd, s, i); }
                else { ++i; push(Tok::Star, s, i); }
                continue;
            case '+':
                if (two(1) == '-' && two(2) == '>') { i += 3; push(Tok::PartialFun, s, i); }
                else { ++i; push(Tok::Plus, s, i); }
                continue;
            case '-':
                if (two(1) == '-' && two(2) == '>') { i += 3; push(Tok::TotalFun, s, i); }
                else { ++i; push(Tok::Minus, s, i); }
                continue;
            case '|':
                if (two(1) == '-' && two(2) == '>') { i += 3; push(Tok::Maplet, s, i); }
                else throw ParseError("unexpected character '|'", {s, s + 1});
                continue;
            case ':':
                if (two(1) == '=') { i += 2; push(Tok::Assign, s, i); }
                else if (two(1) == '|') { i += 2; push(Tok::SuchThat, s, i); }
                else { ++i; push(Tok::Colon, s, i); }
                continue;
            case '&': ++i; push(Tok::Amp, s, i); continue;
            case '!': ++i; push(Tok::Bang, s, i); continue;
            case '#': ++i; push(Tok::HashSign, s, i); continue;
            case '.': ++i; push(Tok::Dot, s, i); continue;
            case ',': ++i; push(Tok::Comma, s, i); continue;
            case '(': ++i; push(Tok::LParen, s, i); continue;
            case ')': ++i; push(Tok::RParen, s, i); continue;
            case '{': ++i; push(Tok::LBrace, s, i); continue;
            case '}': ++i; push(Tok::RBrace, s, i); continue;
            case '[': ++i; push(Tok::LBracket, s, i); continue;
            case ']': ++i; push(Tok::RBracket, s, i); continue;
            default:
                throw ParseError(std::string("unexpected character '") + c + "'", {s, s + 1});
        }
    }
    out.push_back({Tok::End, "", {n, n}});
    return out;
}

// ── Parser ──────────────────────────────────────────────────────────────────
//
// Recursive descent with one backtrack point: a parenthesized group may hold
// either a predicate or an expression, so the comparison level first tries
// the expression route and falls back to "( predicate )".  Errors report the
// furthest failure position and the union of tokens expected there.

class Parser {
public:
    Parser(std::string_view src, ParseOptions opts)
        : opts_(opts), toks_(lex(src)) {}

    FormulaPtr parse_any() {
        // A formula file may hold a predicate or a bare expression.
        std::size_t start = pos_;
        try {
            FormulaPtr p = parse_predicate();
            expect(Tok::End);
            return p;
        } catch (const ParseError&) {
            pos_ = start;
        }
        try {
            FormulaPtr e = parse_expression();
            expect(Tok::End);
            return e;
        } catch (const ParseError&) {
            throw furthest_error();
        }
    }

    FormulaPtr parse_predicate_only() {
        FormulaPtr p;
        try {
            p = parse_predicate();
            expect(Tok::End);
        } catch (const ParseError&) {
            throw furthest_error();
        }
        return p;
    }

    FormulaPtr parse_expression_only() {
        FormulaPtr e;
        try {
            e = parse_expression();
            expect(Tok::End);
        } catch (const ParseError&) {
            throw furthest_error();
        }
        return e;
    }

private:
    const Token& cur() const { return toks_[pos_]; }
    bool at(Tok t) const { return cur().tok == t; }

    Token take() { return toks_[pos_++]; }

    [[noreturn]] void fail(std::initializer_list<Tok> expected, const std::string& msg = {}) {
        if (cur().span.start > err_pos_ || err_expected_.empty()) {
            err_pos_ = cur().span.start;
            err_span_ = cur().span;
            err_expected_.clear();
            err_msg_ = msg;
        }
        if (cur().span.start == err_pos_)
            for (Tok t : expected) err_expected_.insert(tok_label(t));
        std::string m = msg.empty() ? std::string("unexpected ") +
                                          (cur().tok == Tok::End ? "end of input"
                                                                 : "'" + cur().text + "'")
                                    : msg;
        throw ParseError(m, cur().span, {err_expected_.begin(), err_expected_.end()});
    }

    ParseError furthest_error() const {
        std::string m = err_msg_.empty() ? "parse error" : err_msg_;
        return ParseError(m, err_span_, err_expected_);
    }

    Token expect(Tok t) {
        if (!at(t)) fail({t});
        return take();
    }

    std::string take_ident() {
        if (!at(Tok::Ident)) fail({Tok::Ident});
        Token t = take();
        if (!opts_.allow_primed && t.text.find('\'') != std::string::npos)
            throw ParseError("primed identifier '" + t.text + "' not allowed here", t.span);
        return t.text;
    }

    // predicate := iff
    FormulaPtr parse_predicate() { return parse_iff(); }

    FormulaPtr parse_iff() {
        std::size_t s = cur().span.start;
        FormulaPtr left = parse_implies();
        if (at(Tok::Iff)) {
            take();
            FormulaPtr right = parse_iff();  // right-assoc
            return Formula::node(Kind::Iff, {left, right}, {s, prev_end()});
        }
        return left;
    }

    FormulaPtr parse_implies() {
        std::size_t s = cur().span.start;
        FormulaPtr left = parse_or();
        if (at(Tok::Implies)) {
            take();
            FormulaPtr right = parse_implies();  // right-assoc
            return Formula::node(Kind::Implies, {left, right}, {s, prev_end()});
        }
        return left;
    }

    FormulaPtr parse_or() {
        std::size_t s = cur().span.start;
        FormulaPtr left = parse_and();
        while (at(Tok::KwOr)) {
            take();
            FormulaPtr right = parse_and();
            left = Formula::node(Kind::Or, {left, right}, {s, prev_end()});
        }
        return left;
    }

    FormulaPtr parse_and() {
        std::size_t s = cur().span.start;
        FormulaPtr left = parse_not();
        while (at(Tok::Amp)) {
            take();
            FormulaPtr right = parse_not();
            left = Formula::node(Kind::And, {left, right}, {s, prev_end()});
        }
        return left;
    }

    FormulaPtr parse_not() {
        if (at(Tok::KwNot)) {
            std::size_t s = take().span.start;
            FormulaPtr operand = parse_not();
            return Formula::node(Kind::Not, {operand}, {s, prev_end()});
        }
        return parse_quantified();
    }

    FormulaPtr parse_quantified() {
        if (at(Tok::Bang) || at(Tok::HashSign)) {
            Kind k = at(Tok::Bang) ? Kind::Forall : Kind::Exists;
            std::size_t s = take().span.start;
            std::vector<std::string> bound;
            bound.push_back(take_ident());
            while (at(Tok::Comma)) {
                take();
                bound.push_back(take_ident());
            }
            expect(Tok::Dot);
            // The body extends to the end of the enclosing predicate.
            FormulaPtr body = parse_predicate();
            return Formula::quantifier(k, std::move(bound), std::move(body), {s, prev_end()});
        }
        return parse_comparison();
    }

    FormulaPtr parse_comparison() {
        if (at(Tok::KwTrue)) {
            Token t = take();
            return Formula::leaf(Kind::True, t.span);
        }
        if (at(Tok::KwFalse)) {
            Token t = take();
            return Formula::leaf(Kind::False, t.span);
        }
        std::size_t start = pos_;
        std::size_t s = cur().span.start;
        try {
            FormulaPtr lhs = parse_expression();
            Kind k;
            switch (cur().tok) {
                case Tok::Eq: k = Kind::Equal; break;
                case Tok::Neq: k = Kind::NotEqual; break;
                case Tok::Colon: k = Kind::In; break;
                case Tok::SubsetEq: k = Kind::SubsetEq; break;
                case Tok::Lt: k = Kind::Lt; break;
                case Tok::Le: k = Kind::Le; break;
                case Tok::Gt: k = Kind::Gt; break;
                case Tok::Ge: k = Kind::Ge; break;
                default:
                    fail({Tok::Eq, Tok::Neq, Tok::Colon, Tok::SubsetEq, Tok::Lt, Tok::Le,
                          Tok::Gt, Tok::Ge});
            }
            take();
            FormulaPtr rhs = parse_expression();
            if (is_comparison_tok(cur().tok))
                fail({}, "comparisons are non-associative; use parentheses");
            return Formula::node(k, {lhs, rhs}, {s, prev_end()});
        } catch (const ParseError&) {
            pos_ = start;
        }
        if (at(Tok::LParen)) {
            take();
            FormulaPtr p = parse_predicate();
            expect(Tok::RParen);
            return p;
        }
        fail({Tok::LParen, Tok::KwTrue, Tok::KwFalse, Tok::Ident, Tok::IntLit});
    }

    static bool is_comparison_tok(Tok t) {
        switch (t) {
            case Tok::Eq: case Tok::Neq: case Tok::Colon: case Tok::SubsetEq:
            case Tok::Lt: case Tok::Le: case Tok::Gt: case Tok::Ge:
                return true;
            default:
                return false;
        }
    }

    // expression := set-operator tier (one operator kind per unparenthesized chain)
    FormulaPtr parse_expression() {
        std::size_t s = cur().span.start;
        FormulaPtr left = parse_maplet();
        std::optional<Tok> chain;
        while (true) {
            Kind k;
            switch (cur().tok) {
                case Tok::Union: k = Kind::Union; break;
                case Tok::Inter: k = Kind::Inter; break;
                case Tok::SetMinus: k = Kind::SetMinus; break;
                case Tok::CartProd: k = Kind::CartProd; break;
                case Tok::Override: k = Kind::Override; break;
                case Tok::TotalFun: k = Kind::TotalFun; break;
                case Tok::PartialFun: k = Kind::PartialFun; break;
                case Tok::Relation: k = Kind::Relation; break;
                default: return left;
            }
            if (chain && *chain != cur().tok)
                fail({}, "mixed set operators need parentheses");
            chain = cur().tok;
            take();
            FormulaPtr right = parse_maplet();
            left = Formula::node(k, {left, right}, {s, prev_end()});
        }
    }

    FormulaPtr parse_maplet() {
        std::size_t s = cur().span.start;
        FormulaPtr left = parse_additive();
        if (at(Tok::Maplet)) {
            take();
            FormulaPtr right = parse_maplet();  // right-assoc
            return Formula::node(Kind::Maplet, {left, right}, {s, prev_end()});
        }
        return left;
    }

    FormulaPtr parse_additive() {
        std::size_t s = cur().span.start;
        FormulaPtr left = parse_multiplicative();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            Kind k = at(Tok::Plus) ? Kind::Add : Kind::Sub;
            take();
            FormulaPtr right = parse_multiplicative();
            left = Formula::node(k, {left, right}, {s, prev_end()});
        }
        return left;
    }

    FormulaPtr parse_multiplicative() {
        std::size_t s = cur().span.start;
        FormulaPtr left = parse_unary();
        while (at(Tok::Star) || at(Tok::Slash) || at(Tok::KwMod)) {
            Kind k = at(Tok::Star) ? Kind::Mul : at(Tok::Slash) ? Kind::Div : Kind::Mod;
            take();
            FormulaPtr right = parse_unary();
            left = Formula::node(k, {left, right}, {s, prev_end()});
        }
        return left;
    }

    FormulaPtr parse_unary() {
        if (at(Tok::Minus)) {
            std::size_t s = take().span.start;
            if (at(Tok::IntLit)) {
                Token t = take();
                FormulaPtr lit = Formula::int_lit(-parse_int(t), {s, t.span.end});
                return parse_postfix_suffixes(std::move(lit), s);
            }
            // There is no negation node; 0 - e carries the same meaning.
            FormulaPtr operand = parse_unary();
            return Formula::node(Kind::Sub, {Formula::int_lit(0), operand}, {s, prev_end()});
        }
        return parse_postfix();
    }

    FormulaPtr parse_postfix() {
        std::size_t s = cur().span.start;
        return parse_postfix_suffixes(parse_primary(), s);
    }

    FormulaPtr parse_postfix_suffixes(FormulaPtr f, std::size_t s) {
        while (true) {
            if (at(Tok::LParen)) {
                take();
                FormulaPtr arg = parse_expression();
                expect(Tok::RParen);
                f = Formula::node(Kind::FunApp, {f, arg}, {s, prev_end()});
            } else if (at(Tok::LBracket)) {
                take();
                FormulaPtr arg = parse_expression();
                expect(Tok::RBracket);
                f = Formula::node(Kind::Image, {f, arg}, {s, prev_end()});
            } else {
                return f;
            }
        }
    }

    FormulaPtr parse_primary() {
        switch (cur().tok) {
            case Tok::Ident: {
                Token t = toks_[pos_];
                std::string name = take_ident();
                return Formula::ident(std::move(name), t.span);
            }
            case Tok::IntLit: {
                Token t = take();
                return Formula::int_lit(parse_int(t), t.span);
            }
            case Tok::MetaVar: {
                Token t = take();
                if (!opts_.allow_metavars)
                    throw ParseError("metavariable '?" + t.text + "' not allowed here", t.span);
                return Formula::meta_var(t.text, t.span);
            }
            case Tok::KwNat: {
                Token t = take();
                return Formula::leaf(Kind::Nat, t.span);
            }
            case Tok::KwInt: {
                Token t = take();
                return Formula::leaf(Kind::Int, t.span);
            }
            case Tok::KwPow: return parse_call(Kind::Pow);
            case Tok::KwDom: return parse_call(Kind::Dom);
            case Tok::KwRan: return parse_call(Kind::Ran);
            case Tok::LBrace: {
                std::size_t s = take().span.start;
                std::vector<FormulaPtr> elems;
                elems.push_back(parse_expression());
                while (at(Tok::Comma)) {
                    take();
                    elems.push_back(parse_expression());
                }
                expect(Tok::RBrace);
                return Formula::node(Kind::SetExtension, std::move(elems), {s, prev_end()});
            }
            case Tok::LParen: {
                take();
                FormulaPtr e = parse_expression();
                expect(Tok::RParen);
                return e;
            }
            default:
                fail({Tok::Ident, Tok::IntLit, Tok::KwNat, Tok::KwInt, Tok::KwPow, Tok::KwDom,
                      Tok::KwRan, Tok::LBrace, Tok::LParen});
        }
    }

    FormulaPtr parse_call(Kind k) {
        std::size_t s = take().span.start;
        expect(Tok::LParen);
        FormulaPtr arg = parse_expression();
        expect(Tok::RParen);
        return Formula::node(k, {arg}, {s, prev_end()});
    }

    long long parse_int(const Token& t) {
        try {
            return std::stoll(t.text);
        } catch (const std::exception&) {
            throw ParseError("integer literal out of range", t.span);
        }
    }

    std::size_t prev_end() const { return pos_ > 0 ? toks_[pos_ - 1].span.end : 0; }

    ParseOptions opts_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;

    std::size_t err_pos_ = 0;
    SourceSpan err_span_ = {};
    std::set<std::string> err_expected_;
    std::string err_msg_;
};

}  // namespace detail

// Parses a predicate or a bare expression. Throws ParseError.
inline FormulaPtr parse_formula(std::string_view text, ParseOptions opts = {}) {
    return detail::Parser(text, opts).parse_any();
}

inline FormulaPtr parse_predicate(std::string_view text, ParseOptions opts = {}) {
    return detail::Parser(text, opts).parse_predicate_only();
}

inline FormulaPtr parse_expression(std::string_view text, ParseOptions opts = {}) {
    return detail::Parser(text, opts).parse_expression_only();
}

// ── Printer ─────────────────────────────────────────────────────────────────
//
// Minimal parenthesization: parse_formula(print_formula(f)) reproduces f.
// A quantifier needs no parentheses exactly when it sits in tail position of
// its enclosing predicate (its body may then swallow the rest of the text);
// everywhere else it is wrapped.

struct PrintOptions {
    // Render MetaVar holes as "?name" (pattern/debug mode). When false a
    // MetaVar in the tree is a precondition violation.
    bool metavars = false;
};

namespace detail {

constexpr int kPredIff = 1;
constexpr int kPredImplies = 2;
constexpr int kPredOr = 3;
constexpr int kPredAnd = 4;
constexpr int kPredNot = 5;
constexpr int kPredAtom = 6;

constexpr int kExprSetOp = 1;
constexpr int kExprMaplet = 2;
constexpr int kExprAdd = 3;
constexpr int kExprMul = 4;
constexpr int kExprPostfix = 5;
constexpr int kExprAtom = 6;

inline bool is_setop_kind(Kind k) {
    switch (k) {
        case Kind::Union: case Kind::Inter: case Kind::SetMinus: case Kind::CartProd:
        case Kind::Override: case Kind::TotalFun: case Kind::PartialFun: case Kind::Relation:
            return true;
        default:
            return false;
    }
}

inline int pred_level(Kind k) {
    switch (k) {
        case Kind::Iff: return kPredIff;
        case Kind::Implies: return kPredImplies;
        case Kind::Or: return kPredOr;
        case Kind::And: return kPredAnd;
        case Kind::Not: return kPredNot;
        default: return kPredAtom;
    }
}

inline int expr_level(Kind k) {
    if (is_setop_kind(k)) return kExprSetOp;
    switch (k) {
        case Kind::Maplet: return kExprMaplet;
        case Kind::Add: case Kind::Sub: return kExprAdd;
        case Kind::Mul: case Kind::Div: case Kind::Mod: return kExprMul;
        case Kind::FunApp: case Kind::Image: return kExprPostfix;
        default: return kExprAtom;
    }
}

inline void print_expr(const Formula& f, int min, std::optional<Kind> chain_with,
                       std::string& out, const PrintOptions& opts);

inline void print_expr_child(const Formula& f, int min, std::string& out,
                             const PrintOptions& opts) {
    print_expr(f, min, std::nullopt, out, opts);
}

inline void print_expr(const Formula& f, int min, std::optional<Kind> chain_with,
                       std::string& out, const PrintOptions& opts) {
    Kind k = f.kind();
    int lvl = expr_level(k);
    bool wrap = lvl < min;
    // Within the set-operator tier only a chain of one same operator may stay
    // bare; anything else takes parentheses.
    if (!wrap && lvl == kExprSetOp && min == kExprSetOp && chain_with && *chain_with != k)
        wrap = true;
    if (wrap) out += '(';
    int inner_min = wrap ? 1 : min;
    (void)inner_min;
    switch (k) {
        case Kind::Ident:
            out += f.name();
            break;
        case Kind::MetaVar:
            if (!opts.metavars) throw Error("cannot print MetaVar outside pattern mode");
            out += '?';
            out += f.name();
            break;
        case Kind::IntLit:
            out += std::to_string(f.value());
            break;
        case Kind::Nat:
            out += "NAT";
            break;
        case Kind::Int:
            out += "INT";
            break;
        case Kind::Pow:
        case Kind::Dom:
        case Kind::Ran:
            out += (k == Kind::Pow ? "POW(" : k == Kind::Dom ? "dom(" : "ran(");
            print_expr_child(*f.child(0), 1, out, opts);
            out += ')';
            break;
        case Kind::SetExtension: {
            out += '{';
            bool first = true;
            for (const auto& e : f.children()) {
                if (!first) out += ',';
                first = false;
                print_expr_child(*e, 1, out, opts);
            }
            out += '}';
            break;
        }
        case Kind::FunApp:
        case Kind::Image:
            print_expr_child(*f.child(0), kExprPostfix, out, opts);
            out += (k == Kind::FunApp ? '(' : '[');
            print_expr_child(*f.child(1), 1, out, opts);
            out += (k == Kind::FunApp ? ')' : ']');
            break;
        case Kind::Maplet:
            print_expr_child(*f.child(0), kExprMaplet + 1, out, opts);
            out += " |-> ";
            print_expr(*f.child(1), kExprMaplet, std::nullopt, out, opts);  // right-assoc
            break;
        case Kind::Add:
        case Kind::Sub:
            print_expr_child(*f.child(0), kExprAdd, out, opts);
            out += (k == Kind::Add ? "+" : "-");
            print_expr_child(*f.child(1), kExprAdd + 1, out, opts);
            break;
        case Kind::Mul:
        case Kind::Div:
            print_expr_child(*f.child(0), kExprMul, out, opts);
            out += (k == Kind::Mul ? "*" : "/");
            print_expr_child(*f.child(1), kExprMul + 1, out, opts);
            break;
        case Kind::Mod:
            print_expr_child(*f.child(0), kExprMul, out, opts);
            out += " mod ";
            print_expr_child(*f.child(1), kExprMul + 1, out, opts);
            break;
        default: {
            // set-operator tier; left-assoc chain of one operator
            print_expr(*f.child(0), kExprSetOp, k, out, opts);
            out += ' ';
            out += kind_symbol(k);
            out += ' ';
            print_expr_child(*f.child(1), kExprSetOp + 1, out, opts);
            break;
        }
    }
    if (wrap) out += ')';
}

inline void print_pred(const Formula& f, int min, bool tail, std::string& out,
                       const PrintOptions& opts) {
    Kind k = f.kind();
    if (is_quantifier_kind(k)) {
        bool wrap = !tail;
        if (wrap) out += '(';
        out += (k == Kind::Forall ? '!' : '#');
        bool first = true;
        for (const auto& v : f.bound()) {
            if (!first) out += ',';
            first = false;
            out += v;
        }
        out += ". ";
        print_pred(*f.child(0), kPredIff, true, out, opts);
        if (wrap) out += ')';
        return;
    }
    int lvl = pred_level(k);
    bool wrap = lvl < min;
    if (wrap) {
        out += '(';
        min = kPredIff;
        tail = true;
    }
    switch (k) {
        case Kind::True:
            out += "true";
            break;
        case Kind::False:
            out += "false";
            break;
        case Kind::Iff:
            print_pred(*f.child(0), kPredIff + 1, false, out, opts);
            out += " <=> ";
            print_pred(*f.child(1), kPredIff, tail, out, opts);  // right-assoc
            break;
        case Kind::Implies:
            print_pred(*f.child(0), kPredImplies + 1, false, out, opts);
            out += " => ";
            print_pred(*f.child(1), kPredImplies, tail, out, opts);  // right-assoc
            break;
        case Kind::Or:
            print_pred(*f.child(0), kPredOr, false, out, opts);
            out += " or ";
            print_pred(*f.child(1), kPredOr + 1, tail, out, opts);
            break;
        case Kind::And:
            print_pred(*f.child(0), kPredAnd, false, out, opts);
            out += " & ";
            print_pred(*f.child(1), kPredAnd + 1, tail, out, opts);
            break;
        case Kind::Not:
            out += "not ";
            print_pred(*f.child(0), kPredNot, tail, out, opts);
            break;
        default: {
            // comparison
            print_expr_child(*f.child(0), kExprSetOp, out, opts);
            out += ' ';
            out += kind_symbol(k);
            out += ' ';
            print_expr_child(*f.child(1), kExprSetOp, out, opts);
            break;
        }
    }
    if (wrap) out += ')';
}

}  // namespace detail

// Canonical text with minimal parenthesization; parse_formula(print_formula(f))
// is structurally equal to f.
inline std::string print_formula(const FormulaPtr& f, PrintOptions opts = {}) {
    std::string out;
    if (f->is_predicate())
        detail::print_pred(*f, detail::kPredIff, true, out, opts);
    else
        detail::print_expr(*f, 1, std::nullopt, out, opts);
    return out;
}

}  // namespace obsel

#endif  // OBSEL_FORMULA_HPP
