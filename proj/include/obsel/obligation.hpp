// obsel/obligation.hpp — invariant-preservation proof obligations.
//
// One PO per (event, invariant) pair.  Hypotheses are the axioms, all
// invariants, the event's guards, the before-after predicates of its actions
// (x := E contributes x' = E, x :| P contributes P verbatim) and explicit
// frame equalities v' = v for untouched variables.  The goal is the
// invariant over primed variables.  Frame equalities are real hypotheses so
// selection can drop them and tests can notice when it drops too much.

#ifndef OBSEL_OBLIGATION_HPP
#define OBSEL_OBLIGATION_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "obsel/errors.hpp"
#include "obsel/formula.hpp"
#include "obsel/machine.hpp"
#include "obsel/similarity.hpp"

namespace obsel {

enum class HypOrigin { Axiom, Invariant, Guard, BeforeAfter, Frame, Lemma };

inline const char* origin_name(HypOrigin o) {
    switch (o) {
        case HypOrigin::Axiom: return "axiom";
        case HypOrigin::Invariant: return "invariant";
        case HypOrigin::Guard: return "guard";
        case HypOrigin::BeforeAfter: return "ba";
        case HypOrigin::Frame: return "frame";
        case HypOrigin::Lemma: return "lemma";
    }
    return "?";
}

inline HypOrigin origin_from(const std::string& s) {
    if (s == "axiom") return HypOrigin::Axiom;
    if (s == "invariant") return HypOrigin::Invariant;
    if (s == "guard") return HypOrigin::Guard;
    if (s == "ba") return HypOrigin::BeforeAfter;
    if (s == "frame") return HypOrigin::Frame;
    if (s == "lemma") return HypOrigin::Lemma;
    throw Error("unknown hypothesis origin '" + s + "'");
}

struct Hypothesis {
    HypOrigin origin = HypOrigin::Invariant;
    std::string label;
    FormulaPtr formula;
};

struct ProofObligation {
    std::string id;  // machine/event/invariant/INV
    std::string machine;
    std::string project;
    std::vector<Hypothesis> hypotheses;
    FormulaPtr goal;
    std::uint64_t hash = 0;
};

// Hash over the hypothesis formulas (in order) and the goal; labels and
// origins do not contribute.
inline std::uint64_t sequent_hash(const std::vector<Hypothesis>& hypotheses,
                                  const FormulaPtr& goal) {
    detail::Fnv1a64 h;
    for (const auto& hyp : hypotheses) h.feed_u64(formula_hash(hyp.formula));
    h.feed_byte(0xff);
    h.feed_u64(formula_hash(goal));
    return h.state;
}

// ── Generation ──────────────────────────────────────────────────────────────

inline std::vector<ProofObligation> generate_inv_pos(const MachineModel& m) {
    std::vector<ProofObligation> out;
    std::set<std::string> all_vars(m.variables.begin(), m.variables.end());
    for (const auto& event : m.events) {
        std::set<std::string> assigned = event.assigned();
        for (const auto& inv : m.invariants) {
            ProofObligation po;
            po.id = m.name + "/" + event.name + "/" + inv.label + "/INV";
            po.machine = m.name;
            po.project = m.project;
            for (const auto& ax : m.axioms)
                po.hypotheses.push_back({HypOrigin::Axiom, ax.label, ax.formula});
            for (const auto& i : m.invariants)
                po.hypotheses.push_back({HypOrigin::Invariant, i.label, i.formula});
            for (const auto& g : event.guards)
                po.hypotheses.push_back({HypOrigin::Guard, g.label, g.formula});
            for (const auto& a : event.actions) {
                FormulaPtr ba = a.kind == ActionKind::Becomes
                                    ? Formula::node(Kind::Equal,
                                                    {Formula::ident(a.variable + "'"), a.body})
                                    : a.body;
                po.hypotheses.push_back({HypOrigin::BeforeAfter, a.label, std::move(ba)});
            }
            for (const auto& v : m.variables) {
                if (assigned.count(v)) continue;
                po.hypotheses.push_back(
                    {HypOrigin::Frame, v,
                     Formula::node(Kind::Equal, {Formula::ident(v + "'"), Formula::ident(v)})});
            }
            po.goal = prime(inv.formula, all_vars);
            po.hash = sequent_hash(po.hypotheses, po.goal);
            out.push_back(std::move(po));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const ProofObligation& a, const ProofObligation& b) { return a.id < b.id; });
    return out;
}

// ── Assembly ────────────────────────────────────────────────────────────────

// New PO with hypotheses restricted to the selected ones plus instantiated
// lemmas appended; goal and id unchanged, hash recomputed.  lemma_names, when
// given, label the appended hypotheses (default lemma1, lemma2, ...).
inline ProofObligation assemble_sequent(const ProofObligation& po,
                                        const std::vector<RankedCandidate>& selection,
                                        const std::vector<FormulaPtr>& lemma_formulas,
                                        const std::vector<std::string>& lemma_names = {}) {
    std::set<std::size_t> keep;
    for (const auto& c : selection) {
        if (c.source != CandidateSource::Hypothesis) continue;
        if (c.index >= po.hypotheses.size())
            throw IndexOutOfRangeError(c.index, po.hypotheses.size());
        keep.insert(c.index);
    }
    ProofObligation out;
    out.id = po.id;
    out.machine = po.machine;
    out.project = po.project;
    out.goal = po.goal;
    for (std::size_t i = 0; i < po.hypotheses.size(); ++i)
        if (keep.count(i)) out.hypotheses.push_back(po.hypotheses[i]);
    for (std::size_t i = 0; i < lemma_formulas.size(); ++i) {
        if (contains_metavar(lemma_formulas[i]))
            throw Error("lemma hypothesis still contains metavariables");
        std::string label =
            i < lemma_names.size() ? lemma_names[i] : "lemma" + std::to_string(i + 1);
        out.hypotheses.push_back({HypOrigin::Lemma, std::move(label), lemma_formulas[i]});
    }
    out.hash = sequent_hash(out.hypotheses, out.goal);
    return out;
}

// Convenience selection covering every hypothesis.
inline std::vector<RankedCandidate> select_all(const ProofObligation& po) {
    std::vector<RankedCandidate> out;
    for (std::size_t i = 0; i < po.hypotheses.size(); ++i)
        out.push_back({i, CandidateSource::Hypothesis, 0.0, SelectionRoute::Structural});
    return out;
}

// ── Before-after rewriting ──────────────────────────────────────────────────

// Substitutes hypothesis equalities of shape x' = E into the goal, each used
// at most once, until no primed left-hand side of an unused equality remains
// free in the goal.  This is how the goal of an invariant-preservation PO
// recovers its equality-free conjecture form.
inline FormulaPtr apply_equalities(const FormulaPtr& goal,
                                   const std::vector<Hypothesis>& hypotheses) {
    std::vector<std::pair<std::string, FormulaPtr>> equalities;
    for (const auto& hyp : hypotheses) {
        const Formula& f = *hyp.formula;
        if (f.kind() != Kind::Equal) continue;
        const Formula& lhs = *f.child(0);
        if (lhs.kind() != Kind::Ident) continue;
        if (lhs.name().empty() || lhs.name().back() != '\'') continue;
        equalities.emplace_back(lhs.name(), f.child(1));
    }
    FormulaPtr current = goal;
    std::vector<bool> used(equalities.size(), false);
    bool changed = true;
    while (changed) {
        changed = false;
        std::set<std::string> fv = free_identifiers(current);
        for (std::size_t i = 0; i < equalities.size(); ++i) {
            if (used[i] || !fv.count(equalities[i].first)) continue;
            try {
                current = substitute(current, {{equalities[i].first, equalities[i].second}});
            } catch (const CaptureError&) {
                used[i] = true;  // cannot rewrite under a capturing binder
                continue;
            }
            used[i] = true;
            changed = true;
            fv = free_identifiers(current);
        }
    }
    return current;
}

// ── Obfuscation ─────────────────────────────────────────────────────────────

namespace detail {

struct Obfuscator {
    std::map<std::string, std::string> names;

    std::string rename(const std::string& name) {
        std::string base = name;
        std::size_t primes = 0;
        while (!base.empty() && base.back() == '\'') {
            base.pop_back();
            ++primes;
        }
        auto it = names.find(base);
        if (it == names.end())
            it = names.emplace(base, "i" + std::to_string(names.size() + 1)).first;
        return it->second + std::string(primes, '\'');
    }

    FormulaPtr walk(const FormulaPtr& f) {
        switch (f->kind()) {
            case Kind::Ident:
                return Formula::ident(rename(f->name()));
            case Kind::MetaVar:
                return f;
            case Kind::Forall:
            case Kind::Exists: {
                std::vector<std::string> bound;
                for (const auto& v : f->bound()) bound.push_back(rename(v));
                return Formula::quantifier(f->kind(), std::move(bound), walk(f->child(0)));
            }
            default: {
                if (f->children().empty()) return f;
                std::vector<FormulaPtr> children;
                for (const auto& c : f->children()) children.push_back(walk(c));
                return Formula::node(f->kind(), std::move(children));
            }
        }
    }
};

}  // namespace detail

// Consistently renames every identifier across the sequent (i1, i2, ... in
// first-occurrence order); structure and hence profiles are unchanged.
inline ProofObligation obfuscate_po(const ProofObligation& po) {
    detail::Obfuscator ob;
    ProofObligation out = po;
    for (auto& hyp : out.hypotheses) hyp.formula = ob.walk(hyp.formula);
    out.goal = ob.walk(out.goal);
    out.hash = sequent_hash(out.hypotheses, out.goal);
    return out;
}

// ── PO files ────────────────────────────────────────────────────────────────
//
//   po <id>
//   machine <id>
//   project <id>
//   hyp <origin> <label> : <formula>
//   goal : <formula>

inline std::string po_to_string(const ProofObligation& po) {
    std::string out;
    out += "po " + po.id + "\n";
    out += "machine " + po.machine + "\n";
    out += "project " + po.project + "\n";
    for (const auto& hyp : po.hypotheses)
        out += "hyp " + std::string(origin_name(hyp.origin)) + " " + hyp.label + " : " +
               print_formula(hyp.formula) + "\n";
    out += "goal : " + print_formula(po.goal) + "\n";
    return out;
}

inline ProofObligation po_from_string(const std::string& text) {
    ProofObligation po;
    std::istringstream in(text);
    std::string line;
    bool saw_goal = false;
    ParseOptions opts;
    opts.allow_primed = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        auto rest_after = [&](int tokens) {
            std::istringstream scan(line);
            std::string tok;
            for (int i = 0; i < tokens; ++i) scan >> tok;
            std::string rest;
            std::getline(scan, rest);
            std::size_t b = rest.find_first_not_of(" \t");
            return b == std::string::npos ? std::string() : rest.substr(b);
        };
        if (head == "po") {
            po.id = rest_after(1);
        } else if (head == "machine") {
            ls >> po.machine;
        } else if (head == "project") {
            ls >> po.project;
        } else if (head == "hyp") {
            std::string origin, label, colon;
            ls >> origin >> label >> colon;
            if (colon != ":")
                throw ParseError("po line " + std::to_string(lineno) +
                                     ": expected 'hyp <origin> <label> : <formula>'",
                                 {0, 0});
            po.hypotheses.push_back(
                {origin_from(origin), label, parse_formula(rest_after(4), opts)});
        } else if (head == "goal") {
            std::string colon;
            ls >> colon;
            if (colon != ":")
                throw ParseError("po line " + std::to_string(lineno) + ": expected 'goal : <formula>'",
                                 {0, 0});
            po.goal = parse_formula(rest_after(2), opts);
            saw_goal = true;
        } else {
            throw ParseError("po line " + std::to_string(lineno) + ": unexpected '" + head + "'",
                             {0, 0});
        }
    }
    if (po.id.empty() || !saw_goal) throw ParseError("incomplete proof obligation file", {0, 0});
    po.hash = sequent_hash(po.hypotheses, po.goal);
    return po;
}

// Writes <out_dir>/<id>.po, creating intermediate directories (ids contain
// slashes). Returns the path written.
inline std::string write_po_file(const ProofObligation& po, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::path path = fs::path(out_dir) / (po.id + ".po");
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out << po_to_string(po);
    if (!out) throw IoError(path.string(), "write failed");
    return path.string();
}

inline ProofObligation read_po_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    return po_from_string(buf.str());
}

}  // namespace obsel

#endif  // OBSEL_OBLIGATION_HPP
