#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "obsel/ledger.hpp"
#include "obsel/machine.hpp"
#include "obsel/obligation.hpp"
#include "obsel/prover.hpp"
#include "obsel/translate.hpp"
#include "support/formula_gen.hpp"

using namespace obsel;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ProofObligation library_po() {
    auto text = read_file(std::string(OBSEL_FIXTURE_DIR) + "/library.machine");
    auto pos = generate_inv_pos(parse_machine(text));
    REQUIRE(pos.size() == 1);
    return pos[0];
}

ProofObligation bare_po(std::vector<FormulaPtr> hyps, FormulaPtr goal) {
    ProofObligation po;
    po.id = "test/e/i/INV";
    po.machine = "test";
    po.project = "p";
    for (std::size_t i = 0; i < hyps.size(); ++i)
        po.hypotheses.push_back(
            {HypOrigin::Invariant, "h" + std::to_string(i + 1), std::move(hyps[i])});
    po.goal = std::move(goal);
    po.hash = sequent_hash(po.hypotheses, po.goal);
    return po;
}

FormulaPtr instantiated_override() {
    return parse_formula(
        "!f. f : BOOKS --> NAT => (!x,y. x : BOOKS & y : NAT => f <+ {x |-> y} : BOOKS --> NAT)");
}

// Which prelude blocks of `map` appear verbatim in the theory text.
std::set<std::string> blocks_in(const std::string& theory, const TranslationMap& map) {
    std::set<std::string> out;
    for (const auto& block : map.blocks)
        if (theory.find(block.text) != std::string::npos) out.insert(block.name);
    return out;
}

}  // namespace

// ── Translation ─────────────────────────────────────────────────────────────

TEST_CASE("translate: trivial arithmetic goal pulls only the arithmetic prelude") {
    auto po = bare_po({}, parse_formula("1 = 1"));
    const auto& map = default_translation_map();
    auto theory = translate_sequent(po, map);
    CHECK(blocks_in(theory, map) == std::set<std::string>{"arith"});
    CHECK(theory.find("  goal g : (1 = 1)\n") != std::string::npos);
    // no hypotheses, so no hypothesis axioms (the prelude's own axioms remain)
    CHECK(theory.find("invariant_") == std::string::npos);
    CHECK(theory.find("constant BOOKS") == std::string::npos);
}

TEST_CASE("translate: library PO pulls exactly the supporting blocks") {
    auto po = library_po();
    const auto& map = default_translation_map();
    auto theory = translate_sequent(po, map);
    std::set<std::string> expected = {"membership", "functions", "override",
                                      "maplet",     "set_extension", "nat_int"};
    CHECK(blocks_in(theory, map) == expected);
    // primed and unprimed are distinct constants
    CHECK(theory.find("  constant library : u\n") != std::string::npos);
    CHECK(theory.find("  constant library' : u\n") != std::string::npos);
}

TEST_CASE("translate: identical input gives identical bytes") {
    auto po = library_po();
    const auto& map = default_translation_map();
    CHECK(translate_sequent(po, map) == translate_sequent(po, map));
}

TEST_CASE("translate: golden file for the library PO") {
    auto theory = translate_sequent(library_po(), default_translation_map());
    auto golden = read_file(std::string(OBSEL_GOLDEN_DIR) + "/library_inv.theory");
    CHECK(theory == golden);
}

TEST_CASE("translate: unmapped operator is reported") {
    TranslationMap map = default_translation_map();
    map.ops.erase(Kind::Override);
    CHECK_THROWS_AS(translate_sequent(library_po(), map), UnmappedOperatorError);
}

TEST_CASE("translate: totality of the default map over generated POs, minimal prelude") {
    testgen::FormulaGen gen(0x7AB1Eu);
    const auto& map = default_translation_map();
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<FormulaPtr> hyps;
        for (int j = 0; j < 4; ++j) hyps.push_back(gen.formula(5));
        auto po = bare_po(std::move(hyps), gen.formula(5));
        auto theory = translate_sequent(po, map);
        std::set<Kind> present = sequent_kinds(po);
        std::set<std::string> expected;
        for (const auto& block : map.blocks)
            for (Kind k : block.supports)
                if (present.count(k)) expected.insert(block.name);
        REQUIRE(blocks_in(theory, map) == expected);
    }
}

TEST_CASE("translate: map files round-trip") {
    const auto& map = default_translation_map();
    auto parsed = parse_translation_map(serialize_translation_map(map));
    auto po = library_po();
    CHECK(translate_sequent(po, parsed) == translate_sequent(po, map));
}

// ── External prover runs ────────────────────────────────────────────────────

TEST_CASE("run_prover: verdict patterns classify output by priority") {
    ProverConfig cfg;
    cfg.id = "mock";
    cfg.command = "echo unsat; cat {file} > /dev/null";
    cfg.patterns = {{Verdict::Valid, "unsat"}, {Verdict::Invalid, "sat"}};
    auto result = run_prover("theory T\nend\n", cfg);
    CHECK(result.verdict == Verdict::Valid);
    CHECK(result.output.find("unsat") != std::string::npos);
}

TEST_CASE("run_prover: no matching pattern is a tool error; catch-all gives Unknown") {
    ProverConfig cfg;
    cfg.id = "silent";
    cfg.command = "cat {file} > /dev/null";
    cfg.patterns = {{Verdict::Valid, "unsat"}};
    CHECK(run_prover("theory T\nend\n", cfg).verdict == Verdict::ToolError);

    cfg.patterns.push_back({Verdict::Unknown, ""});  // catch-all
    CHECK(run_prover("theory T\nend\n", cfg).verdict == Verdict::Unknown);
}

TEST_CASE("run_prover: timeout kills the run") {
    ProverConfig cfg;
    cfg.id = "sleepy";
    cfg.command = "sleep 3; cat {file} > /dev/null; echo done";
    cfg.timeout_seconds = 1.0;
    cfg.patterns = {{Verdict::Valid, "done"}};
    auto result = run_prover("theory T\nend\n", cfg);
    CHECK(result.verdict == Verdict::Timeout);
    CHECK(result.duration_ms >= 500);
    CHECK(result.duration_ms <= 2000);
}

TEST_CASE("run_prover: failing command surfaces as tool error with output") {
    ProverConfig cfg;
    cfg.id = "missing";
    cfg.command = "/no/such/binary {file}";
    cfg.patterns = {{Verdict::Valid, "unsat"}};
    auto result = run_prover("theory T\nend\n", cfg);
    CHECK(result.verdict == Verdict::ToolError);
    CHECK(!result.output.empty());
}

TEST_CASE("prover config parsing") {
    auto cfg = parse_prover_config(
        "prover z3\ncommand z3 -T:{timeout} {file}\ntimeout 2.5\n"
        "verdict Valid unsat\nverdict Invalid ^sat\nverdict Unknown\n");
    CHECK(cfg.id == "z3");
    CHECK(cfg.timeout_seconds == 2.5);
    REQUIRE(cfg.patterns.size() == 3);
    CHECK(cfg.patterns[0].verdict == Verdict::Valid);
    CHECK(cfg.patterns[2].regex_text.empty());

    CHECK_THROWS_AS(parse_prover_config("prover x\ncommand echo hi\n"), Error);  // no {file}
    CHECK_THROWS_AS(parse_prover_config("prover x\ncommand {file}\nverdict Timeout x\n"),
                    ParseError);
}

// ── Stub prover ─────────────────────────────────────────────────────────────

TEST_CASE("stub: goal equal to a hypothesis") {
    auto po = bare_po({parse_formula("x : NAT")}, parse_formula("x : NAT"));
    CHECK(stub_prove(po) == Verdict::Valid);
    // alpha-equality counts
    auto po2 = bare_po({parse_formula("!u. u : S")}, parse_formula("!v. v : S"));
    CHECK(stub_prove(po2) == Verdict::Valid);
}

TEST_CASE("stub: plain modus ponens and forall instantiation") {
    auto mp = bare_po({parse_formula("a : S => b : T"), parse_formula("a : S")},
                      parse_formula("b : T"));
    CHECK(stub_prove(mp) == Verdict::Valid);

    auto inst = bare_po({parse_formula("!x. x : NAT")}, parse_formula("5 : NAT"));
    CHECK(stub_prove(inst) == Verdict::Valid);

    auto missing_premise =
        bare_po({parse_formula("a : S => b : T")}, parse_formula("b : T"));
    CHECK(stub_prove(missing_premise) == Verdict::Unknown);
}

TEST_CASE("stub: the override scenario needs the lemma") {
    auto po = library_po();
    CHECK(stub_prove(po) == Verdict::Unknown);

    auto with_lemma =
        assemble_sequent(po, select_all(po), {instantiated_override()}, {"override_tfun"});
    CHECK(stub_prove(with_lemma) == Verdict::Valid);
}

TEST_CASE("stub: skip events discharge through frame equalities") {
    auto m = parse_machine(
        "machine m2 project p\nvariables x y\ninvariants\n  @i1 x = y\nevents\n"
        "  event idle\n  end\n");
    auto pos = generate_inv_pos(m);
    REQUIRE(pos.size() == 1);
    CHECK(stub_prove(pos[0]) == Verdict::Valid);
}

TEST_CASE("stub: soundness on a deliberately invalid corpus") {
    testgen::FormulaGen gen(0x1BAD5EEDu);
    int checked = 0;
    for (int trial = 0; checked < 50; ++trial) {
        REQUIRE(trial < 500);
        // atomic, quantifier-free hypotheses
        std::vector<FormulaPtr> hyps;
        for (int j = 0; j < 5; ++j) {
            auto f = gen.formula(2);
            if (f->is_predicate() && f->kind() != Kind::Not && f->kind() != Kind::Implies &&
                f->kind() != Kind::Forall && f->kind() != Kind::True)
                hyps.push_back(f);
        }
        if (hyps.size() < 2) continue;
        FormulaPtr goal;
        if (checked % 2 == 0) {
            // goal mentions a fresh identifier
            goal = parse_formula("zz_fresh : S_fresh");
        } else {
            // negated hypothesis
            goal = Formula::node(Kind::Not, {hyps[0]});
        }
        auto po = bare_po(hyps, goal);
        REQUIRE(stub_prove(po) == Verdict::Unknown);
        ++checked;
    }
}

// ── Ledger ──────────────────────────────────────────────────────────────────

namespace {

AttemptRecord sample_record(const std::string& prover, Verdict verdict,
                            std::vector<std::string> lemmas, std::int64_t ms = 17) {
    AttemptRecord rec;
    rec.ts = "2026-08-11T10:00:00Z";
    rec.po_id = "lib0/lend/inv1/INV";
    rec.po_hash = 0x0123456789abcdefull;
    rec.prover = prover;
    rec.params = ScoreParams{};
    rec.n_hyps = 4;
    rec.lemmas = std::move(lemmas);
    rec.verdict = verdict;
    rec.ms = ms;
    return rec;
}

std::string temp_ledger(const std::string& name) {
    namespace fs = std::filesystem;
    auto path = fs::temp_directory_path() / name;
    fs::remove(path);
    return path.string();
}

}  // namespace

TEST_CASE("ledger: append then read back") {
    auto path = temp_ledger("obsel_ledger_roundtrip.jsonl");
    auto rec = sample_record("z3", Verdict::Valid, {"override_tfun"});
    record_attempt(path, rec);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    auto back = record_from_line(line);
    CHECK(back.ts == rec.ts);
    CHECK(back.po_id == rec.po_id);
    CHECK(back.po_hash == rec.po_hash);
    CHECK(back.prover == rec.prover);
    CHECK(back.n_hyps == rec.n_hyps);
    CHECK(back.lemmas == rec.lemmas);
    CHECK(back.verdict == rec.verdict);
    CHECK(back.ms == rec.ms);
    CHECK(back.params.structure_coeff == rec.params.structure_coeff);
    std::filesystem::remove(path);
}

TEST_CASE("ledger: field names are exactly the nine required") {
    auto line = record_to_line(sample_record("z3", Verdict::Valid, {}));
    auto j = nlohmann::json::parse(line);
    std::set<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
    CHECK(keys == std::set<std::string>{"ts", "po_id", "po_hash", "prover", "params", "n_hyps",
                                        "lemmas", "verdict", "ms"});
}

TEST_CASE("ledger: concurrent appenders produce intact lines") {
    auto path = temp_ledger("obsel_ledger_concurrent.jsonl");
    constexpr int kWriters = 8;
    constexpr int kPerWriter = 100;
    std::vector<std::thread> writers;
    for (int w = 0; w < kWriters; ++w) {
        writers.emplace_back([&, w] {
            for (int i = 0; i < kPerWriter; ++i) {
                auto rec = sample_record("w" + std::to_string(w), Verdict::Valid, {},
                                         w * 1000 + i);
                record_attempt(path, rec);
            }
        });
    }
    for (auto& t : writers) t.join();

    std::ifstream in(path);
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        REQUIRE_NOTHROW(record_from_line(line));
        ++count;
    }
    CHECK(count == kWriters * kPerWriter);
    auto stats = ledger_stats(path);
    CHECK(stats.total == kWriters * kPerWriter);
    for (int w = 0; w < kWriters; ++w)
        CHECK(stats.per_prover.at("w" + std::to_string(w)).attempts == kPerWriter);
    std::filesystem::remove(path);
}

TEST_CASE("ledger: success rates") {
    auto path = temp_ledger("obsel_ledger_rates.jsonl");
    record_attempt(path, sample_record("z3", Verdict::Valid, {}));
    record_attempt(path, sample_record("z3", Verdict::Valid, {}));
    record_attempt(path, sample_record("z3", Verdict::Timeout, {}));
    auto stats = ledger_stats(path);
    CHECK(stats.per_prover.at("z3").attempts == 3);
    CHECK(stats.per_prover.at("z3").valid == 2);
    CHECK(stats.per_prover.at("z3").success_rate() == doctest::Approx(2.0 / 3.0));
    std::filesystem::remove(path);
}

TEST_CASE("ledger: ten-record fixture aggregates match hand counts") {
    auto path = temp_ledger("obsel_ledger_fixture.jsonl");
    // z3: 4 Valid + 1 Unknown + 1 Timeout; spass: 2 Valid + 2 ToolError
    // override_tfun on 5 (4 Valid, 1 Unknown); nat_lb on 2 (1 Valid, 1 ToolError)
    record_attempt(path, sample_record("z3", Verdict::Valid, {"override_tfun"}));
    record_attempt(path, sample_record("z3", Verdict::Valid, {"override_tfun"}));
    record_attempt(path, sample_record("z3", Verdict::Valid, {"override_tfun"}));
    record_attempt(path, sample_record("z3", Verdict::Valid, {}));
    record_attempt(path, sample_record("z3", Verdict::Unknown, {"override_tfun"}));
    record_attempt(path, sample_record("z3", Verdict::Timeout, {}));
    record_attempt(path, sample_record("spass", Verdict::Valid, {"override_tfun"}));
    record_attempt(path, sample_record("spass", Verdict::Valid, {"nat_lb"}));
    record_attempt(path, sample_record("spass", Verdict::ToolError, {"nat_lb"}));
    record_attempt(path, sample_record("spass", Verdict::ToolError, {}));

    auto stats = ledger_stats(path);
    CHECK(stats.total == 10);
    CHECK(stats.per_prover.at("z3").attempts == 6);
    CHECK(stats.per_prover.at("z3").valid == 4);
    CHECK(stats.per_prover.at("spass").attempts == 4);
    CHECK(stats.per_prover.at("spass").valid == 2);
    CHECK(stats.per_lemma.at("override_tfun").attempts == 5);
    CHECK(stats.per_lemma.at("override_tfun").valid == 4);
    CHECK(stats.per_lemma.at("nat_lb").attempts == 2);
    CHECK(stats.per_lemma.at("nat_lb").valid == 1);
    std::filesystem::remove(path);
}

TEST_CASE("ledger: malformed records are rejected with a line number") {
    auto path = temp_ledger("obsel_ledger_bad.jsonl");
    record_attempt(path, sample_record("z3", Verdict::Valid, {}));
    {
        std::ofstream out(path, std::ios::app);
        out << "{\"ts\":\"x\",\"verdict\":\"Maybe\"}\n";
    }
    try {
        ledger_stats(path);
        FAIL("expected MalformedRecordError");
    } catch (const MalformedRecordError& e) {
        CHECK(e.line() == 2);
    }
    std::filesystem::remove(path);
}

TEST_CASE("ledger: aggregates are order-insensitive; empty ledger is empty") {
    auto a = temp_ledger("obsel_ledger_a.jsonl");
    auto b = temp_ledger("obsel_ledger_b.jsonl");
    auto r1 = sample_record("z3", Verdict::Valid, {"l1"});
    auto r2 = sample_record("spass", Verdict::Unknown, {"l1", "l2"});
    auto r3 = sample_record("z3", Verdict::Timeout, {});
    for (const auto& r : {r1, r2, r3}) record_attempt(a, r);
    for (const auto& r : {r3, r1, r2}) record_attempt(b, r);
    auto sa = ledger_stats(a);
    auto sb = ledger_stats(b);
    CHECK(sa.total == sb.total);
    CHECK(sa.per_prover.at("z3").valid == sb.per_prover.at("z3").valid);
    CHECK(sa.per_lemma.at("l1").attempts == sb.per_lemma.at("l1").attempts);

    auto empty = temp_ledger("obsel_ledger_empty.jsonl");
    {
        std::ofstream touch(empty);
    }
    auto se = ledger_stats(empty);
    CHECK(se.total == 0);
    CHECK(se.per_prover.empty());
    CHECK(se.per_lemma.empty());
    for (const auto& p : {a, b, empty}) std::filesystem::remove(p);
}
