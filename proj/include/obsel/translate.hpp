// obsel/translate.hpp — sequent-to-theory translation through a configurable
// operator/axiom mapping.
//
// The target is a minimal theory text format:
//
//   theory <Id>
//     type <id>
//     constant <id> : <type>
//     axiom <id> : <formula>
//     goal g : <formula>
//   end
//
// with formulas rendered per the operator entries (fully parenthesized, so
// the target needs no precedence rules).  Prelude blocks carry the
// axiomatization of the set-theoretic operators; a theory includes exactly
// the blocks supporting the operator kinds that actually occur, which is
// what keeps prover input small.  Axiomatization style is a property of the
// block text alone, so swapping a definition style means editing one block.

#ifndef OBSEL_TRANSLATE_HPP
#define OBSEL_TRANSLATE_HPP

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "obsel/errors.hpp"
#include "obsel/formula.hpp"
#include "obsel/obligation.hpp"

namespace obsel {

enum class Fixity { Prefix, Infix };

struct OperatorEntry {
    std::string symbol;
    Fixity fixity = Fixity::Prefix;
};

struct PreludeBlock {
    std::string name;
    std::vector<Kind> supports;
    std::string text;  // verbatim, already indented
};

struct TranslationMap {
    std::map<Kind, OperatorEntry> ops;
    std::vector<PreludeBlock> blocks;
    std::string header;  // verbatim declarations emitted in every theory
};

namespace detail {

inline const std::vector<Kind>& all_kinds() {
    static const std::vector<Kind> kinds = [] {
        std::vector<Kind> out;
        for (int i = 0; i <= static_cast<int>(Kind::MetaVar); ++i)
            out.push_back(static_cast<Kind>(i));
        return out;
    }();
    return kinds;
}

inline Kind kind_from_name(const std::string& name) {
    for (Kind k : all_kinds())
        if (name == kind_name(k)) return k;
    throw Error("unknown operator kind '" + name + "'");
}

inline void collect_kinds(const Formula& f, std::set<Kind>& out) {
    out.insert(f.kind());
    for (const auto& c : f.children()) collect_kinds(*c, out);
}

}  // namespace detail

inline std::set<Kind> sequent_kinds(const ProofObligation& po) {
    std::set<Kind> out;
    for (const auto& hyp : po.hypotheses) detail::collect_kinds(*hyp.formula, out);
    detail::collect_kinds(*po.goal, out);
    return out;
}

// ── Term rendering ──────────────────────────────────────────────────────────

namespace detail {

inline const OperatorEntry& entry_for(const TranslationMap& map, Kind k) {
    auto it = map.ops.find(k);
    if (it == map.ops.end()) throw UnmappedOperatorError(kind_name(k));
    return it->second;
}

inline std::string render_term(const FormulaPtr& f, const TranslationMap& map) {
    switch (f->kind()) {
        case Kind::Ident:
            return f->name();
        case Kind::IntLit:
            return std::to_string(f->value());
        case Kind::MetaVar:
            throw UnmappedOperatorError("MetaVar");
        default:
            break;
    }
    const OperatorEntry& entry = entry_for(map, f->kind());
    if (is_quantifier_kind(f->kind())) {
        std::string out = "(" + entry.symbol + " ";
        bool first = true;
        for (const auto& v : f->bound()) {
            if (!first) out += ' ';
            first = false;
            out += v;
        }
        out += ". " + render_term(f->child(0), map) + ")";
        return out;
    }
    if (f->kind() == Kind::SetExtension) {
        // right fold: {a,b,c} -> (add a (add b (singleton c)))
        std::string out = "(" + entry.symbol + " " +
                          render_term(f->children().back(), map) + ")";
        for (std::size_t i = f->children().size() - 1; i-- > 0;)
            out = "(add " + render_term(f->child(i), map) + " " + out + ")";
        return out;
    }
    if (f->children().empty()) return entry.symbol;
    if (entry.fixity == Fixity::Infix && f->children().size() == 2)
        return "(" + render_term(f->child(0), map) + " " + entry.symbol + " " +
               render_term(f->child(1), map) + ")";
    std::string out = "(" + entry.symbol;
    for (const auto& c : f->children()) out += " " + render_term(c, map);
    out += ")";
    return out;
}

inline std::string theory_name(const std::string& po_id) {
    std::string out;
    for (char c : po_id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_';
        out += ok ? c : '_';
    }
    if (out.empty() || (out[0] >= '0' && out[0] <= '9')) out = "T_" + out;
    return out;
}

}  // namespace detail

// ── Translation ─────────────────────────────────────────────────────────────

// Deterministic theory text: header, the prelude blocks supporting exactly
// the operator kinds present, one constant per free identifier (primed and
// unprimed are distinct), one named axiom per hypothesis, one goal.
inline std::string translate_sequent(const ProofObligation& po, const TranslationMap& map) {
    std::set<Kind> present = sequent_kinds(po);
    for (Kind k : present) {
        if (k == Kind::Ident || k == Kind::IntLit) continue;
        if (!map.ops.count(k)) throw UnmappedOperatorError(kind_name(k));
    }

    std::string out = "theory " + detail::theory_name(po.id) + "\n";
    if (!map.header.empty()) {
        out += map.header;
        if (map.header.back() != '\n') out += '\n';
    }
    for (const auto& block : map.blocks) {
        bool needed = std::any_of(block.supports.begin(), block.supports.end(),
                                  [&](Kind k) { return present.count(k) > 0; });
        if (!needed) continue;
        out += block.text;
        if (!block.text.empty() && block.text.back() != '\n') out += '\n';
    }

    std::set<std::string> idents;
    for (const auto& hyp : po.hypotheses) {
        auto fv = free_identifiers(hyp.formula);
        idents.insert(fv.begin(), fv.end());
    }
    auto fv = free_identifiers(po.goal);
    idents.insert(fv.begin(), fv.end());
    for (const auto& name : idents) out += "  constant " + name + " : u\n";

    std::set<std::string> used_names;
    for (const auto& hyp : po.hypotheses) {
        std::string base = std::string(origin_name(hyp.origin)) + "_" + hyp.label;
        std::string name = base;
        for (int i = 2; used_names.count(name); ++i) name = base + "_" + std::to_string(i);
        used_names.insert(name);
        out += "  axiom " + name + " : " + detail::render_term(hyp.formula, map) + "\n";
    }
    out += "  goal g : " + detail::render_term(po.goal, map) + "\n";
    out += "end\n";
    return out;
}

// ── Map files ───────────────────────────────────────────────────────────────
//
//   op <Kind> -> <symbol> <infix|prefix>
//   header
//     <indented verbatim text>
//   block <name> supports <Kind,...>
//     <indented verbatim text>

inline TranslationMap parse_translation_map(const std::string& text) {
    TranslationMap map;
    std::istringstream in(text);
    std::string line;
    enum class Capture { None, Header, Block } capture = Capture::None;
    std::size_t lineno = 0;
    auto end_capture = [&]() { capture = Capture::None; };
    while (std::getline(in, line)) {
        ++lineno;
        bool indented = !line.empty() && (line[0] == ' ' || line[0] == '\t');
        if (capture != Capture::None && (indented || line.empty())) {
            std::string& target =
                capture == Capture::Header ? map.header : map.blocks.back().text;
            target += line;
            target += '\n';
            continue;
        }
        end_capture();
        std::string trimmed = line;
        if (!trimmed.empty() && trimmed.back() == '\r') trimmed.pop_back();
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::istringstream ls(trimmed);
        std::string head;
        ls >> head;
        if (head == "op") {
            std::string kind_str, arrow, symbol, fixity;
            ls >> kind_str >> arrow >> symbol >> fixity;
            if (arrow != "->" || symbol.empty() || (fixity != "infix" && fixity != "prefix"))
                throw ParseError("map line " + std::to_string(lineno) +
                                     ": expected 'op <Kind> -> <symbol> <infix|prefix>'",
                                 {0, 0});
            Kind k = detail::kind_from_name(kind_str);
            map.ops[k] = {symbol, fixity == "infix" ? Fixity::Infix : Fixity::Prefix};
        } else if (head == "header") {
            capture = Capture::Header;
        } else if (head == "block") {
            PreludeBlock block;
            std::string supports_kw, list;
            ls >> block.name >> supports_kw;
            std::getline(ls, list);
            if (block.name.empty() || supports_kw != "supports")
                throw ParseError("map line " + std::to_string(lineno) +
                                     ": expected 'block <name> supports <Kind,...>'",
                                 {0, 0});
            for (const auto& existing : map.blocks)
                if (existing.name == block.name)
                    throw DuplicateNameError(block.name, "prelude blocks");
            std::string item;
            for (char c : list) {
                if (c == ',' || c == ' ' || c == '\t') {
                    if (!item.empty()) block.supports.push_back(detail::kind_from_name(item));
                    item.clear();
                } else {
                    item += c;
                }
            }
            if (!item.empty()) block.supports.push_back(detail::kind_from_name(item));
            map.blocks.push_back(std::move(block));
            capture = Capture::Block;
        } else {
            throw ParseError("map line " + std::to_string(lineno) + ": unexpected '" + head + "'",
                             {0, 0});
        }
    }
    return map;
}

inline std::string serialize_translation_map(const TranslationMap& map) {
    std::string out;
    for (const auto& [kind, entry] : map.ops)
        out += std::string("op ") + kind_name(kind) + " -> " + entry.symbol + " " +
               (entry.fixity == Fixity::Infix ? "infix" : "prefix") + "\n";
    if (!map.header.empty()) {
        out += "header\n" + map.header;
        if (map.header.back() != '\n') out += '\n';
    }
    for (const auto& block : map.blocks) {
        out += "block " + block.name + " supports ";
        for (std::size_t i = 0; i < block.supports.size(); ++i) {
            if (i) out += ',';
            out += kind_name(block.supports[i]);
        }
        out += '\n';
        out += block.text;
        if (!block.text.empty() && block.text.back() != '\n') out += '\n';
    }
    return out;
}

// ── Default map ─────────────────────────────────────────────────────────────

inline const TranslationMap& default_translation_map() {
    static const TranslationMap map = [] {
        TranslationMap m;
        auto infix = [&](Kind k, const char* sym) { m.ops[k] = {sym, Fixity::Infix}; };
        auto prefix = [&](Kind k, const char* sym) { m.ops[k] = {sym, Fixity::Prefix}; };
        prefix(Kind::True, "true");
        prefix(Kind::False, "false");
        prefix(Kind::Not, "not");
        infix(Kind::And, "/\\");
        infix(Kind::Or, "\\/");
        infix(Kind::Implies, "->");
        infix(Kind::Iff, "<->");
        prefix(Kind::Forall, "forall");
        prefix(Kind::Exists, "exists");
        infix(Kind::Equal, "=");
        infix(Kind::NotEqual, "<>");
        prefix(Kind::In, "mem");
        prefix(Kind::SubsetEq, "subset");
        infix(Kind::Lt, "<");
        infix(Kind::Le, "<=");
        infix(Kind::Gt, ">");
        infix(Kind::Ge, ">=");
        infix(Kind::Add, "+");
        infix(Kind::Sub, "-");
        infix(Kind::Mul, "*");
        prefix(Kind::Div, "div");
        prefix(Kind::Mod, "mod");
        prefix(Kind::Union, "union");
        prefix(Kind::Inter, "inter");
        prefix(Kind::SetMinus, "diff");
        prefix(Kind::CartProd, "times");
        prefix(Kind::Pow, "power");
        prefix(Kind::Maplet, "pair");
        prefix(Kind::SetExtension, "singleton");
        prefix(Kind::Dom, "dom");
        prefix(Kind::Ran, "ran");
        prefix(Kind::Image, "image");
        prefix(Kind::Override, "ovr");
        prefix(Kind::TotalFun, "tfun");
        prefix(Kind::PartialFun, "pfun");
        prefix(Kind::Relation, "rel");
        prefix(Kind::FunApp, "apply");
        prefix(Kind::Nat, "nat");
        prefix(Kind::Int, "integer");

        m.header = "  type u\n";

        auto block = [&](const char* name, std::vector<Kind> supports, const char* text) {
            m.blocks.push_back({name, std::move(supports), text});
        };
        block("arith",
              {Kind::IntLit, Kind::Add, Kind::Sub, Kind::Mul, Kind::Div, Kind::Mod, Kind::Lt,
               Kind::Le, Kind::Gt, Kind::Ge},
              "  constant div : u\n"
              "  constant mod : u\n"
              "  axiom div_mod : (forall a b. ((b <> 0) -> (a = ((b * (div a b)) + (mod a b)))))\n"
              "  axiom le_trans : (forall a b c. (((a <= b) /\\ (b <= c)) -> (a <= c)))\n");
        block("nat_int", {Kind::Nat, Kind::Int},
              "  constant nat : u\n"
              "  constant integer : u\n"
              "  axiom nat_def : (forall x. ((mem x nat) <-> (0 <= x)))\n"
              "  axiom int_universal : (forall x. (mem x integer))\n");
        block("membership", {Kind::In, Kind::SubsetEq},
              "  constant mem : u\n"
              "  constant subset : u\n"
              "  axiom subset_def : (forall s t. ((subset s t) <-> (forall x. ((mem x s) -> "
              "(mem x t)))))\n");
        block("union_inter", {Kind::Union, Kind::Inter, Kind::SetMinus},
              "  constant union : u\n"
              "  constant inter : u\n"
              "  constant diff : u\n"
              "  axiom union_mem : (forall x s t. ((mem x (union s t)) <-> ((mem x s) \\/ (mem "
              "x t))))\n"
              "  axiom inter_mem : (forall x s t. ((mem x (inter s t)) <-> ((mem x s) /\\ (mem "
              "x t))))\n"
              "  axiom diff_mem : (forall x s t. ((mem x (diff s t)) <-> ((mem x s) /\\ (not "
              "(mem x t)))))\n");
        block("cartprod", {Kind::CartProd},
              "  constant times : u\n"
              "  axiom times_mem : (forall x y s t. ((mem (pair x y) (times s t)) <-> ((mem x "
              "s) /\\ (mem y t))))\n");
        block("powerset", {Kind::Pow},
              "  constant power : u\n"
              "  axiom power_mem : (forall s t. ((mem s (power t)) <-> (subset s t)))\n");
        block("maplet", {Kind::Maplet},
              "  constant pair : u\n"
              "  axiom pair_eq : (forall x y a b. (((pair x y) = (pair a b)) <-> ((x = a) /\\ "
              "(y = b))))\n");
        block("set_extension", {Kind::SetExtension},
              "  constant singleton : u\n"
              "  constant add : u\n"
              "  axiom singleton_mem : (forall x y. ((mem x (singleton y)) <-> (x = y)))\n"
              "  axiom add_mem : (forall x y s. ((mem x (add y s)) <-> ((x = y) \\/ (mem x "
              "s))))\n");
        block("relations", {Kind::Relation, Kind::Dom, Kind::Ran, Kind::Image},
              "  constant rel : u\n"
              "  constant dom : u\n"
              "  constant ran : u\n"
              "  constant image : u\n"
              "  axiom dom_mem : (forall x r. ((mem x (dom r)) <-> (exists y. (mem (pair x y) "
              "r))))\n"
              "  axiom ran_mem : (forall y r. ((mem y (ran r)) <-> (exists x. (mem (pair x y) "
              "r))))\n"
              "  axiom image_mem : (forall y r s. ((mem y (image r s)) <-> (exists x. ((mem x "
              "s) /\\ (mem (pair x y) r)))))\n");
        block("functions", {Kind::TotalFun, Kind::PartialFun, Kind::FunApp},
              "  constant tfun : u\n"
              "  constant pfun : u\n"
              "  constant apply : u\n"
              "  axiom tfun_pfun : (forall f a b. ((mem f (tfun a b)) -> (mem f (pfun a b))))\n"
              "  axiom pfun_functional : (forall f a b x y z. (((mem f (pfun a b)) /\\ ((mem "
              "(pair x y) f) /\\ (mem (pair x z) f))) -> (y = z)))\n"
              "  axiom tfun_total : (forall f a b x. (((mem f (tfun a b)) /\\ (mem x a)) -> "
              "(mem (pair x (apply f x)) f)))\n");
        block("override", {Kind::Override},
              "  constant ovr : u\n"
              "  axiom ovr_mem : (forall x y f g. ((mem (pair x y) (ovr f g)) <-> ((mem (pair "
              "x y) g) \\/ ((not (exists z. (mem (pair x z) g))) /\\ (mem (pair x y) f)))))\n");
        return m;
    }();
    return map;
}

}  // namespace obsel

#endif  // OBSEL_TRANSLATE_HPP
