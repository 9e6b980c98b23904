#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "obsel/lemma.hpp"
#include "support/brute_force.hpp"

using namespace obsel;

namespace {

FormulaPtr pat(const std::string& text) {
    ParseOptions opts;
    opts.allow_metavars = true;
    return parse_formula(text, opts);
}

SchematicLemma override_lemma() {
    SchematicLemma lemma;
    lemma.name = "override_tfun";
    lemma.parameters = {"A", "B"};
    lemma.trigger = pat("?f <+ {?x |-> ?y} : ?A --> ?B");
    lemma.statement =
        pat("!f. f : ?A --> ?B => (!x,y. x : ?A & y : ?B => f <+ {x |-> y} : ?A --> ?B)");
    lemma.visibility = {Visibility::Level::Global, ""};
    return lemma;
}

bool occurs_as_subterm(const FormulaPtr& needle, const FormulaPtr& hay) {
    if (*needle == *hay) return true;
    for (const auto& c : hay->children())
        if (occurs_as_subterm(needle, c)) return true;
    return false;
}

}  // namespace

TEST_CASE("lemma file parsing and store loading") {
    auto store = load_lemma_store(std::string(OBSEL_FIXTURE_DIR) + "/lemmas");
    REQUIRE(store.lemmas.size() == 1);
    const auto& lemma = store.lemmas[0];
    CHECK(lemma.name == "override_tfun");
    CHECK(lemma.visibility.level == Visibility::Level::Global);
    CHECK(lemma.parameters == std::vector<std::string>{"A", "B"});
    CHECK(*lemma.trigger == *override_lemma().trigger);
    CHECK(*lemma.statement == *override_lemma().statement);

    // serialize/parse round trip
    auto again = parse_lemma(serialize_lemma(lemma));
    CHECK(again.name == lemma.name);
    CHECK(*again.trigger == *lemma.trigger);
    CHECK(*again.statement == *lemma.statement);
}

TEST_CASE("lemma validation") {
    CHECK_THROWS_AS(parse_lemma("name: x\nscope: global\ntrigger: ?a + 1\nstatement: 1 = 1\n"
                                "params: Q\n"),
                    ParseError);  // Q not in trigger
    CHECK_THROWS_AS(parse_lemma("name: x\nscope: global\ntrigger: ?a + 1\n"
                                "statement: ?Z : NAT\n"),
                    ParseError);  // ?Z undeclared
    CHECK_THROWS_AS(parse_lemma("name: x\nscope: global\ntrigger: ?a + 1\n"), ParseError);
    CHECK_THROWS_AS(parse_lemma("name: x\nscope: county y\ntrigger: ?a\nstatement: 1 = 1\n"),
                    ParseError);
}

TEST_CASE("visibility scope matrix") {
    SchematicLemma g = override_lemma();
    g.name = "G";
    SchematicLemma p = override_lemma();
    p.name = "P";
    p.visibility = {Visibility::Level::Project, "proj1"};
    SchematicLemma m = override_lemma();
    m.name = "M";
    m.visibility = {Visibility::Level::Machine, "m1"};
    LemmaStore store{{m, p, g}};  // order in the store must not matter

    auto names = [&](const std::string& machine, const std::string& project) {
        std::vector<std::string> out;
        for (const auto& lemma : lemmas_in_scope(store, machine, project))
            out.push_back(lemma.name);
        return out;
    };
    CHECK(names("m1", "proj1") == std::vector<std::string>{"G", "P", "M"});
    CHECK(names("m2", "proj1") == std::vector<std::string>{"G", "P"});
    CHECK(names("m2", "proj2") == std::vector<std::string>{"G"});
}

TEST_CASE("match_trigger: functional override conjecture") {
    auto trigger = pat("?f <+ {?x |-> ?y} : ?A --> ?B");
    auto target = parse_formula("library <+ {b |-> c} : BOOKS --> NAT");
    auto bindings = match_trigger(trigger, target);
    REQUIRE(bindings.size() == 1);
    const auto& b = bindings[0];
    CHECK(*b.at("f") == *parse_formula("library"));
    CHECK(*b.at("x") == *parse_formula("b"));
    CHECK(*b.at("y") == *parse_formula("c"));
    CHECK(*b.at("A") == *parse_formula("BOOKS"));
    CHECK(*b.at("B") == *parse_formula("NAT"));
}

TEST_CASE("match_trigger: nonlinear metavariables bind consistently") {
    auto bindings = match_trigger(pat("?x + ?x"), parse_formula("(a+a) * (a+b)"));
    REQUIRE(bindings.size() == 1);
    CHECK(*bindings[0].at("x") == *parse_formula("a"));
}

TEST_CASE("match_trigger: no match yields empty") {
    CHECK(match_trigger(pat("?x : NAT"), parse_formula("1 = 1")).empty());
}

TEST_CASE("instantiate: override lemma at BOOKS/NAT") {
    auto lemma = override_lemma();
    Binding binding{{"A", parse_formula("BOOKS")}, {"B", parse_formula("NAT")}};
    auto inst = instantiate(lemma, binding);
    auto expected = parse_formula(
        "!f. f : BOOKS --> NAT => (!x,y. x : BOOKS & y : NAT => f <+ {x |-> y} : BOOKS --> NAT)");
    CHECK(*inst == *expected);
    CHECK(metavars_of(inst).empty());
    // prints and parses normally
    CHECK(*parse_formula(print_formula(inst)) == *inst);
}

TEST_CASE("instantiate: missing parameters are reported") {
    auto lemma = override_lemma();
    Binding binding{{"A", parse_formula("BOOKS")}};
    try {
        instantiate(lemma, binding);
        FAIL("expected IncompleteBindingError");
    } catch (const IncompleteBindingError& e) {
        CHECK(e.missing() == std::set<std::string>{"B"});
    }
}

TEST_CASE("instantiate: concrete lemma is untouched by the empty binding") {
    SchematicLemma lemma;
    lemma.name = "concrete";
    lemma.trigger = parse_formula("x : NAT");
    lemma.statement = parse_formula("!x. x : NAT => 0 <= x");
    auto inst = instantiate(lemma, {});
    CHECK(*inst == *lemma.statement);
}

TEST_CASE("suggest_lemmas: the override scenario yields exactly one suggestion") {
    auto goal = parse_formula("library <+ {b |-> c} : BOOKS --> NAT");
    std::vector<FormulaPtr> hyps = {parse_formula("library : BOOKS --> NAT"),
                                    parse_formula("b : BOOKS & c : NAT")};
    ScoreParams params;
    auto suggestions = suggest_lemmas(goal, hyps, {override_lemma()}, params);
    REQUIRE(suggestions.size() == 1);
    CHECK(suggestions[0].lemma.name == "override_tfun");
    auto expected = parse_formula(
        "!f. f : BOOKS --> NAT => (!x,y. x : BOOKS & y : NAT => f <+ {x |-> y} : BOOKS --> NAT)");
    CHECK(*suggestions[0].instantiated == *expected);
    CHECK(suggestions[0].score > 0.0);
}

TEST_CASE("suggest_lemmas: empty store suggests nothing") {
    auto goal = parse_formula("library <+ {b |-> c} : BOOKS --> NAT");
    ScoreParams params;
    CHECK(suggest_lemmas(goal, {}, {}, params).empty());
}

TEST_CASE("suggest_lemmas: two matching lemmas are ordered by score then name") {
    SchematicLemma broad;
    broad.name = "tfun_member";
    broad.parameters = {"A", "B"};
    broad.trigger = pat("?f : ?A --> ?B");
    broad.statement = pat("!g. g : ?A --> ?B => dom(g) = ?A");
    broad.visibility = {Visibility::Level::Global, ""};

    auto goal = parse_formula("library <+ {b |-> c} : BOOKS --> NAT");
    std::vector<FormulaPtr> hyps = {parse_formula("library : BOOKS --> NAT")};
    ScoreParams params;
    auto suggestions = suggest_lemmas(goal, hyps, {override_lemma(), broad}, params);
    REQUIRE(suggestions.size() >= 2);
    CHECK(suggestions[0].lemma.name == "override_tfun");

    // ordering agrees with from-scratch scores
    std::vector<refimpl::RefProfile> pool;
    for (const auto& h : hyps) pool.push_back(refimpl::ref_profile(h, 3));
    for (const auto& s : suggestions) pool.push_back(refimpl::ref_profile(s.instantiated, 3));
    auto counts = refimpl::ref_pool_counts(pool);
    auto gp = refimpl::ref_profile(goal, 3);
    for (std::size_t i = 0; i + 1 < suggestions.size(); ++i) {
        double a = refimpl::ref_score(gp, pool[hyps.size() + i], counts, 1.0);
        double b = refimpl::ref_score(gp, pool[hyps.size() + i + 1], counts, 1.0);
        CHECK(a >= b);
    }
}

TEST_CASE("matching soundness: applied trigger occurs in the matched formula") {
    auto goal = parse_formula("library <+ {b |-> c} : BOOKS --> NAT");
    std::vector<FormulaPtr> hyps = {parse_formula("library : BOOKS --> NAT"),
                                    parse_formula("g <+ {u |-> v} : S --> T")};
    ScoreParams params;
    auto suggestions = suggest_lemmas(goal, hyps, {override_lemma()}, params);
    REQUIRE(!suggestions.empty());
    for (const auto& s : suggestions) {
        Substitution subst(s.binding.begin(), s.binding.end());
        auto applied = substitute_metavars(s.lemma.trigger, subst);
        CHECK(metavars_of(applied).empty());
        bool in_goal = occurs_as_subterm(applied, goal);
        bool in_hyp = std::any_of(hyps.begin(), hyps.end(), [&](const FormulaPtr& h) {
            return occurs_as_subterm(applied, h);
        });
        CHECK((in_goal || in_hyp));
    }
}

TEST_CASE("suggest_lemmas is deterministic") {
    auto goal = parse_formula("library <+ {b |-> c} : BOOKS --> NAT");
    std::vector<FormulaPtr> hyps = {parse_formula("library : BOOKS --> NAT")};
    ScoreParams params;
    auto a = suggest_lemmas(goal, hyps, {override_lemma()}, params);
    auto b = suggest_lemmas(goal, hyps, {override_lemma()}, params);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].lemma.name == b[i].lemma.name);
        CHECK(*a[i].instantiated == *b[i].instantiated);
        CHECK(a[i].score == b[i].score);
    }
}
