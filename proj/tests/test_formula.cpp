#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <string>

#include "obsel/formula.hpp"
#include "support/formula_gen.hpp"

using namespace obsel;

namespace {

FormulaPtr P(const std::string& text) { return parse_formula(text); }

FormulaPtr id(const std::string& n) { return Formula::ident(n); }

}  // namespace

TEST_CASE("parse: membership in a total function space") {
    auto f = P("library : BOOKS --> NAT");
    auto expected = Formula::node(
        Kind::In, {id("library"),
                   Formula::node(Kind::TotalFun, {id("BOOKS"), Formula::leaf(Kind::Nat)})});
    CHECK(*f == *expected);
}

TEST_CASE("parse: smallest predicate") {
    auto f = P("1 = 1");
    auto expected = Formula::node(Kind::Equal, {Formula::int_lit(1), Formula::int_lit(1)});
    CHECK(*f == *expected);
}

TEST_CASE("parse: arithmetic expression with nested parens") {
    auto f = P("a*(b+c/d)+e*(f-d*2)");
    auto expected = Formula::node(
        Kind::Add,
        {Formula::node(Kind::Mul,
                       {id("a"), Formula::node(Kind::Add,
                                               {id("b"), Formula::node(Kind::Div,
                                                                        {id("c"), id("d")})})}),
         Formula::node(Kind::Mul,
                       {id("e"), Formula::node(Kind::Sub,
                                               {id("f"), Formula::node(Kind::Mul,
                                                                        {id("d"),
                                                                         Formula::int_lit(2)})})})});
    CHECK(*f == *expected);
}

TEST_CASE("parse: quantifier scopes to end of enclosing predicate") {
    auto f = P("!x. x : NAT => 0 <= x");
    REQUIRE(f->kind() == Kind::Forall);
    CHECK(f->bound() == std::vector<std::string>{"x"});
    CHECK(f->child(0)->kind() == Kind::Implies);
}

TEST_CASE("parse: parenthesized quantifier stops early") {
    auto f = P("(!x. x : NAT) => 0 <= y");
    CHECK(f->kind() == Kind::Implies);
    CHECK(f->child(0)->kind() == Kind::Forall);
}

TEST_CASE("parse errors carry span and expected set") {
    try {
        P("x + ");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.span().start == 4);
        CHECK(!e.expected().empty());
    }
    CHECK_THROWS_AS(P("x ="), ParseError);
    CHECK_THROWS_AS(P(""), ParseError);
    CHECK_THROWS_AS(P("1 = = 2"), ParseError);
}

TEST_CASE("parse: comparisons are non-associative") {
    CHECK_THROWS_AS(P("a = b = c"), ParseError);
    CHECK_NOTHROW(P("a = b & b = c"));
}

TEST_CASE("parse: mixed set operators need parentheses") {
    CHECK_THROWS_AS(P("a \\/ b /\\ c"), ParseError);
    CHECK_NOTHROW(P("a \\/ (b /\\ c)"));
    CHECK_NOTHROW(P("a \\/ b \\/ c"));
}

TEST_CASE("parse: primed identifiers rejected unless enabled") {
    CHECK_THROWS_AS(P("x' = y"), ParseError);
    ParseOptions opts;
    opts.allow_primed = true;
    auto f = parse_formula("x' = y", opts);
    CHECK(f->child(0)->name() == "x'");
}

TEST_CASE("parse: metavariables rejected unless enabled") {
    CHECK_THROWS_AS(P("?f <+ {?x |-> ?y} : ?A --> ?B"), ParseError);
    ParseOptions opts;
    opts.allow_metavars = true;
    auto f = parse_formula("?f <+ {?x |-> ?y} : ?A --> ?B", opts);
    CHECK(f->kind() == Kind::In);
    CHECK(f->child(0)->child(0)->kind() == Kind::MetaVar);
}

TEST_CASE("factories enforce arity and stratification") {
    CHECK_THROWS_AS(Formula::node(Kind::Not, {id("x"), id("y")}), Error);
    // predicate under an expression operator
    CHECK_THROWS_AS(Formula::node(Kind::Add, {P("1 = 1"), Formula::int_lit(1)}), Error);
    // expression under a predicate connective
    CHECK_THROWS_AS(Formula::node(Kind::And, {id("x"), id("y")}), Error);
    CHECK_THROWS_AS(Formula::quantifier(Kind::Forall, {}, P("1 = 1")), Error);
    CHECK_THROWS_AS(Formula::quantifier(Kind::Forall, {"x"}, id("x")), Error);
}

TEST_CASE("print: pinned strings") {
    CHECK(print_formula(P("1 = 1")) == "1 = 1");
    CHECK(print_formula(P("a*(b+c/d)+e*(f-d*2)")) == "a*(b+c/d)+e*(f-d*2)");
    auto f = Formula::quantifier(
        Kind::Forall, {"x"},
        Formula::node(Kind::Implies,
                      {Formula::node(Kind::In, {id("x"), Formula::leaf(Kind::Nat)}),
                       Formula::node(Kind::Le, {Formula::int_lit(0), id("x")})}));
    CHECK(print_formula(f) == "!x. x : NAT => 0 <= x");
}

TEST_CASE("print: set-operator chains keep mandatory parens") {
    auto u = Formula::node(Kind::Union, {id("a"), id("b")});
    auto uu = Formula::node(Kind::Union, {u, id("c")});
    CHECK(print_formula(uu) == "a \\/ b \\/ c");
    auto ur = Formula::node(Kind::Union, {id("a"), Formula::node(Kind::Union, {id("b"), id("c")})});
    CHECK(print_formula(ur) == "a \\/ (b \\/ c)");
    auto mixed = Formula::node(Kind::Union, {Formula::node(Kind::Inter, {id("a"), id("b")}), id("c")});
    CHECK(print_formula(mixed) == "(a /\\ b) \\/ c");
}

TEST_CASE("print: metavars only in pattern mode") {
    ParseOptions popts;
    popts.allow_metavars = true;
    auto pat = parse_formula("?x + 1", popts);
    CHECK_THROWS_AS(print_formula(pat), Error);
    PrintOptions opts;
    opts.metavars = true;
    CHECK(print_formula(pat, opts) == "?x+1");
}

TEST_CASE("free_identifiers") {
    auto names = [](const FormulaPtr& f) { return free_identifiers(f); };
    CHECK(names(P("x + y")) == std::set<std::string>{"x", "y"});
    CHECK(names(P("!x. x : S => f(x) : T")) == std::set<std::string>{"S", "f", "T"});
    // inner exists shadows the outer x; y stays free
    CHECK(names(P("!x. x : S & (#x. x = y)")) == std::set<std::string>{"S", "y"});
}

TEST_CASE("substitute") {
    auto two = P("2");
    CHECK(*substitute(P("x + 1"), {{"x", two}}) == *P("2 + 1"));
    CHECK(*substitute(P("!x. x : A"), {{"A", id("BOOKS")}}) == *P("!x. x : BOOKS"));
    CHECK(*substitute(P("!x. y : A"), {{"y", id("z")}}) == *P("!x. z : A"));
    // bound occurrences untouched
    CHECK(*substitute(P("!x. x : A"), {{"x", two}}) == *P("!x. x : A"));
}

TEST_CASE("substitute: capture is detected") {
    auto singleton_x = P("{x}");
    try {
        substitute(P("!x. x : A"), {{"A", singleton_x}});
        FAIL("expected CaptureError");
    } catch (const CaptureError& e) {
        CHECK(e.binder() == "x");
        CHECK(e.identifier() == "A");
    }
}

TEST_CASE("prime") {
    ParseOptions primed;
    primed.allow_primed = true;
    CHECK(*prime(P("x = y"), {"x"}) == *parse_formula("x' = y", primed));
    CHECK(*prime(P("library : BOOKS --> NAT"), {"library"}) ==
          *parse_formula("library' : BOOKS --> NAT", primed));
    CHECK(*prime(P("x = y"), {}) == *P("x = y"));
    // bound names shadow
    CHECK(*prime(P("!x. x = y"), {"x"}) == *P("!x. x = y"));
}

TEST_CASE("formula_hash: stability and span independence") {
    CHECK(formula_hash(P("1=1")) == formula_hash(P(" 1 = 1 ")));
    CHECK(formula_hash(P("x+y")) != formula_hash(P("y+x")));
    auto f = P("!x. x : NAT => x + 1 > 0");
    CHECK(formula_hash(f) == formula_hash(P(print_formula(f))));
}

TEST_CASE("alpha_equal") {
    CHECK(alpha_equal(P("!x. x : S"), P("!y. y : S")));
    CHECK(!alpha_equal(P("!x. x : S"), P("!y. x : S")));
    CHECK(!alpha_equal(P("!x. x : S"), P("!y. y : T")));
    CHECK(alpha_equal(P("x + 1"), P("x + 1")));
    CHECK(!alpha_equal(P("x + 1"), P("y + 1")));
}

TEST_CASE("property: parse(print(f)) == f for generated formulas") {
    testgen::FormulaGen gen(0xB00C5u);
    for (int i = 0; i < 1000; ++i) {
        auto f = gen.formula(8);
        std::string text = print_formula(f);
        CAPTURE(text);
        auto back = parse_formula(text);
        REQUIRE(*back == *f);
    }
}

TEST_CASE("property: disjoint substitutions commute") {
    testgen::FormulaGen gen(0x5EEDu);
    auto e1 = P("k + 1");
    auto e2 = P("m * 2");
    for (int i = 0; i < 200; ++i) {
        auto f = gen.formula(5);
        Substitution a{{"x", e1}};
        Substitution b{{"y", e2}};
        FormulaPtr ab, ba;
        try {
            ab = substitute(substitute(f, a), b);
            ba = substitute(substitute(f, b), a);
        } catch (const CaptureError&) {
            continue;  // generator may bind x/y; the law only covers capture-free cases
        }
        REQUIRE(*ab == *ba);
    }
}

TEST_CASE("property: free identifiers after substitution") {
    auto f = P("x + y * x");
    auto e = P("u + v");
    auto result = free_identifiers(substitute(f, {{"x", e}}));
    std::set<std::string> expected = {"y", "u", "v"};
    CHECK(result == expected);
}

TEST_CASE("property: priming with empty set is the identity on primed output") {
    testgen::FormulaGen gen(0xAB1Eu);
    for (int i = 0; i < 100; ++i) {
        auto f = gen.formula(4);
        auto once = prime(f, {"x", "y"});
        CHECK(*prime(once, {}) == *once);
    }
}
