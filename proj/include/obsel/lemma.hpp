// obsel/lemma.hpp — schematic lemmas: storage with visibility scoping,
// first-order trigger matching, and instantiation into ordinary hypotheses.
//
// A schematic lemma carries a closed statement whose type-set parameters are
// MetaVar holes, plus a trigger pattern matched against proof-obligation
// formulas.  Matching is purely syntactic first-order matching over subterms
// (no unification, no AC); bound variables in patterns match verbatim.
// Lemmas are trusted inputs: nothing here proves them.

#ifndef OBSEL_LEMMA_HPP
#define OBSEL_LEMMA_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "obsel/errors.hpp"
#include "obsel/formula.hpp"
#include "obsel/similarity.hpp"

namespace obsel {

struct Visibility {
    enum class Level { Global, Project, Machine };

    Level level = Level::Global;
    std::string id;  // project or machine id; empty for Global

    bool applies_to(const std::string& machine, const std::string& project) const {
        switch (level) {
            case Level::Global: return true;
            case Level::Project: return id == project;
            case Level::Machine: return id == machine;
        }
        return false;
    }

    std::string to_string() const {
        switch (level) {
            case Level::Global: return "global";
            case Level::Project: return "project " + id;
            case Level::Machine: return "machine " + id;
        }
        return "?";
    }

    friend bool operator==(const Visibility&, const Visibility&) = default;
};

struct SchematicLemma {
    std::string name;
    FormulaPtr statement;                 // may contain MetaVar parameters
    FormulaPtr trigger;                   // pattern with MetaVar holes
    std::vector<std::string> parameters;  // set metavariables needing a binding
    Visibility visibility;
};

using Binding = std::map<std::string, FormulaPtr>;

// ── Pattern matching ────────────────────────────────────────────────────────

namespace detail {

inline void collect_metavars(const Formula& f, std::set<std::string>& out) {
    if (f.kind() == Kind::MetaVar) {
        out.insert(f.name());
        return;
    }
    for (const auto& c : f.children()) collect_metavars(*c, out);
}

}  // namespace detail

inline std::set<std::string> metavars_of(const FormulaPtr& f) {
    std::set<std::string> out;
    detail::collect_metavars(*f, out);
    return out;
}

// Matches pattern against the whole of target, extending binding. Each
// metavariable binds one expression and must bind consistently.
inline bool match_root(const FormulaPtr& pattern, const FormulaPtr& target, Binding& binding) {
    const Formula& p = *pattern;
    const Formula& t = *target;
    if (p.kind() == Kind::MetaVar) {
        if (!t.is_expression() || t.kind() == Kind::MetaVar) return false;
        auto it = binding.find(p.name());
        if (it != binding.end()) return *it->second == t;
        binding.emplace(p.name(), target);
        return true;
    }
    if (p.kind() != t.kind()) return false;
    switch (p.kind()) {
        case Kind::Ident:
            return p.name() == t.name();
        case Kind::IntLit:
            return p.value() == t.value();
        case Kind::Forall:
        case Kind::Exists:
            if (p.bound() != t.bound()) return false;
            break;
        default:
            break;
    }
    if (p.children().size() != t.children().size()) return false;
    for (std::size_t i = 0; i < p.children().size(); ++i)
        if (!match_root(p.child(i), t.child(i), binding)) return false;
    return true;
}

namespace detail {

inline void match_scan(const FormulaPtr& trigger, const FormulaPtr& node,
                       std::vector<Binding>& out) {
    Binding b;
    if (match_root(trigger, node, b)) out.push_back(std::move(b));
    for (const auto& c : node->children()) match_scan(trigger, c, out);
}

inline bool same_binding(const Binding& a, const Binding& b) {
    if (a.size() != b.size()) return false;
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first) return false;
        if (!(*ia->second == *ib->second)) return false;
    }
    return true;
}

}  // namespace detail

// All bindings under which the trigger matches some subterm of target;
// top-down, left-to-right, duplicates removed.
inline std::vector<Binding> match_trigger(const FormulaPtr& trigger, const FormulaPtr& target) {
    std::vector<Binding> raw;
    detail::match_scan(trigger, target, raw);
    std::vector<Binding> out;
    for (auto& b : raw) {
        bool dup = std::any_of(out.begin(), out.end(),
                               [&](const Binding& seen) { return detail::same_binding(seen, b); });
        if (!dup) out.push_back(std::move(b));
    }
    return out;
}

// ── Instantiation ───────────────────────────────────────────────────────────

// Statement with parameters substituted (capture-avoiding). The binding must
// cover every declared parameter; extra trigger bindings are ignored.
inline FormulaPtr instantiate(const SchematicLemma& lemma, const Binding& binding) {
    std::set<std::string> missing;
    Substitution subst;
    for (const auto& param : lemma.parameters) {
        auto it = binding.find(param);
        if (it == binding.end()) missing.insert(param);
        else subst.emplace(param, it->second);
    }
    if (!missing.empty()) throw IncompleteBindingError(std::move(missing));
    return substitute_metavars(lemma.statement, subst);
}

// ── Store ───────────────────────────────────────────────────────────────────

struct LemmaStore {
    std::vector<SchematicLemma> lemmas;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

}  // namespace detail

// Parses the line-oriented lemma format:
//   name: override_tfun
//   scope: global | project <id> | machine <id>
//   params: A B
//   trigger: ?f <+ {?x |-> ?y} : ?A --> ?B
//   statement: !f. f : ?A --> ?B => ...
inline SchematicLemma parse_lemma(const std::string& text, const std::string& source = "lemma") {
    std::map<std::string, std::string> fields;
    std::istringstream in(text);
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        std::size_t line_start = offset;
        offset += line.size() + 1;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t colon = t.find(':');
        if (colon == std::string::npos)
            throw ParseError(source + ": expected 'key: value'", {line_start, offset});
        std::string key = detail::trim(t.substr(0, colon));
        std::string value = detail::trim(t.substr(colon + 1));
        if (fields.count(key))
            throw ParseError(source + ": duplicate key '" + key + "'", {line_start, offset});
        fields[key] = value;
    }
    for (const char* required : {"name", "scope", "trigger", "statement"})
        if (!fields.count(required))
            throw ParseError(source + ": missing key '" + std::string(required) + "'", {0, 0});

    SchematicLemma lemma;
    lemma.name = fields["name"];
    if (lemma.name.empty()) throw ParseError(source + ": empty name", {0, 0});

    auto scope_words = detail::split_words(fields["scope"]);
    if (scope_words.size() == 1 && scope_words[0] == "global") {
        lemma.visibility = {Visibility::Level::Global, ""};
    } else if (scope_words.size() == 2 && scope_words[0] == "project") {
        lemma.visibility = {Visibility::Level::Project, scope_words[1]};
    } else if (scope_words.size() == 2 && scope_words[0] == "machine") {
        lemma.visibility = {Visibility::Level::Machine, scope_words[1]};
    } else {
        throw ParseError(source + ": scope must be 'global', 'project <id>' or 'machine <id>'",
                         {0, 0});
    }

    if (fields.count("params")) lemma.parameters = detail::split_words(fields["params"]);

    ParseOptions opts;
    opts.allow_metavars = true;
    lemma.trigger = parse_formula(fields["trigger"], opts);
    lemma.statement = parse_formula(fields["statement"], opts);

    auto trigger_vars = metavars_of(lemma.trigger);
    for (const auto& param : lemma.parameters)
        if (!trigger_vars.count(param))
            throw ParseError(source + ": parameter '" + param + "' does not occur in the trigger",
                             {0, 0});
    std::set<std::string> param_set(lemma.parameters.begin(), lemma.parameters.end());
    for (const auto& mv : metavars_of(lemma.statement))
        if (!param_set.count(mv))
            throw ParseError(
                source + ": statement metavariable '?" + mv + "' is not a declared parameter",
                {0, 0});
    return lemma;
}

inline std::string serialize_lemma(const SchematicLemma& lemma) {
    PrintOptions pat;
    pat.metavars = true;
    std::string out;
    out += "name: " + lemma.name + "\n";
    out += "scope: " + lemma.visibility.to_string() + "\n";
    if (!lemma.parameters.empty()) {
        out += "params:";
        for (const auto& p : lemma.parameters) out += " " + p;
        out += "\n";
    }
    out += "trigger: " + print_formula(lemma.trigger, pat) + "\n";
    out += "statement: " + print_formula(lemma.statement, pat) + "\n";
    return out;
}

// Loads every *.lemma file (sorted by filename). Names must be unique per
// scope.
inline LemmaStore load_lemma_store(const std::string& dir) {
    namespace fs = std::filesystem;
    LemmaStore store;
    if (!fs::exists(dir)) throw IoError(dir, "lemma directory does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".lemma")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path);
        if (!in) throw IoError(path.string(), "cannot open");
        std::stringstream buf;
        buf << in.rdbuf();
        SchematicLemma lemma = parse_lemma(buf.str(), path.filename().string());
        for (const auto& existing : store.lemmas)
            if (existing.name == lemma.name && existing.visibility == lemma.visibility)
                throw DuplicateNameError(lemma.name, "scope " + lemma.visibility.to_string());
        store.lemmas.push_back(std::move(lemma));
    }
    return store;
}

// Global, then Project(project), then Machine(machine); by name within each
// group.
inline std::vector<SchematicLemma> lemmas_in_scope(const LemmaStore& store,
                                                   const std::string& machine,
                                                   const std::string& project) {
    auto by_level = [&](Visibility::Level level) {
        std::vector<SchematicLemma> group;
        for (const auto& lemma : store.lemmas)
            if (lemma.visibility.level == level && lemma.visibility.applies_to(machine, project))
                group.push_back(lemma);
        std::sort(group.begin(), group.end(),
                  [](const SchematicLemma& a, const SchematicLemma& b) { return a.name < b.name; });
        return group;
    };
    std::vector<SchematicLemma> out = by_level(Visibility::Level::Global);
    auto proj = by_level(Visibility::Level::Project);
    out.insert(out.end(), proj.begin(), proj.end());
    auto mach = by_level(Visibility::Level::Machine);
    out.insert(out.end(), mach.begin(), mach.end());
    return out;
}

// ── Suggestion ──────────────────────────────────────────────────────────────

struct LemmaSuggestion {
    SchematicLemma lemma;
    Binding binding;
    FormulaPtr instantiated;
    double score = 0.0;
};

// Matches each in-scope lemma's trigger against the goal and every
// hypothesis, instantiates per binding, deduplicates identical
// instantiations, and ranks by weighted score against the goal.
inline std::vector<LemmaSuggestion> suggest_lemmas(const FormulaPtr& goal,
                                                   const std::vector<FormulaPtr>& hypotheses,
                                                   const std::vector<SchematicLemma>& in_scope,
                                                   const ScoreParams& params) {
    std::vector<LemmaSuggestion> found;
    for (const auto& lemma : in_scope) {
        std::vector<FormulaPtr> targets;
        targets.push_back(goal);
        targets.insert(targets.end(), hypotheses.begin(), hypotheses.end());
        for (const auto& target : targets) {
            for (auto& binding : match_trigger(lemma.trigger, target)) {
                FormulaPtr inst = instantiate(lemma, binding);
                bool dup = std::any_of(found.begin(), found.end(), [&](const LemmaSuggestion& s) {
                    return *s.instantiated == *inst;
                });
                if (!dup)
                    found.push_back({lemma, std::move(binding), std::move(inst), 0.0});
            }
        }
    }
    if (found.empty()) return found;

    std::vector<ShingleProfile> pool;
    pool.reserve(hypotheses.size() + found.size());
    for (const auto& h : hypotheses) pool.push_back(profile(h, params.shingle_size));
    for (const auto& s : found) pool.push_back(profile(s.instantiated, params.shingle_size));
    WeightTable table = build_weight_table(pool, params.prune_threshold);
    ShingleProfile goal_profile = profile(goal, params.shingle_size);
    for (std::size_t i = 0; i < found.size(); ++i)
        found[i].score =
            weighted_score(goal_profile, pool[hypotheses.size() + i], table, params);

    std::stable_sort(found.begin(), found.end(),
                     [](const LemmaSuggestion& a, const LemmaSuggestion& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.lemma.name < b.lemma.name;
                     });
    return found;
}

}  // namespace obsel

#endif  // OBSEL_LEMMA_HPP
