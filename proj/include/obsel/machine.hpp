// obsel/machine.hpp — the minimal machine/context model format.
//
// One file holds a whole model: carrier sets, constants and axioms (the
// context part) folded in with variables, invariants and events.  Events are
// guarded atomic updates; an action is either a direct assignment (:=) or a
// before-after predicate (:|) that may mention primed assigned variables.

#ifndef OBSEL_MACHINE_HPP
#define OBSEL_MACHINE_HPP

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "obsel/errors.hpp"
#include "obsel/formula.hpp"

namespace obsel {

struct NamedFormula {
    std::string label;
    FormulaPtr formula;
};

enum class ActionKind { Becomes, BecomesSuchThat };

struct Action {
    std::string label;
    std::string variable;
    ActionKind kind = ActionKind::Becomes;
    FormulaPtr body;  // expression for :=, predicate over primed variables for :|
};

struct Event {
    std::string name;
    std::vector<std::string> params;
    std::vector<NamedFormula> guards;
    std::vector<Action> actions;

    std::set<std::string> assigned() const {
        std::set<std::string> out;
        for (const auto& a : actions) out.insert(a.variable);
        return out;
    }
};

struct MachineModel {
    std::string name;
    std::string project;
    std::vector<std::string> sets;
    std::vector<std::string> constants;
    std::vector<NamedFormula> axioms;
    std::vector<std::string> variables;
    std::vector<NamedFormula> invariants;
    std::vector<Event> events;
};

namespace detail {

inline bool valid_plain_ident(const std::string& s) {
    if (s.empty() || !ident_start(s[0])) return false;
    for (char c : s)
        if (!ident_char(c) || c == '\'') return false;
    static const std::set<std::string> reserved = {"not", "or",  "mod",  "dom",  "ran",
                                                   "POW", "NAT", "INT",  "true", "false"};
    return !reserved.count(s);
}

class MachineParser {
public:
    explicit MachineParser(const std::string& text) : text_(text) {}

    MachineModel parse() {
        std::istringstream in(text_);
        std::string raw;
        while (std::getline(in, raw)) {
            line_start_ = offset_;
            offset_ += raw.size() + 1;
            std::string line = strip(raw);
            if (line.empty()) continue;
            handle(line);
        }
        if (!saw_machine_) err("missing 'machine <name> project <id>' header");
        if (state_ == State::EventGuards || state_ == State::EventActions ||
            state_ == State::EventHead)
            err("unterminated event '" + current_.name + "'");
        validate();
        return model_;
    }

private:
    enum class State { Top, Axioms, Invariants, Events, EventHead, EventGuards, EventActions };

    [[noreturn]] void err(const std::string& msg) {
        throw ParseError(msg, {line_start_, offset_});
    }

    static std::string strip(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static std::vector<std::string> words(const std::string& s) {
        std::vector<std::string> out;
        std::istringstream in(s);
        std::string w;
        while (in >> w) out.push_back(w);
        return out;
    }

    void handle(const std::string& line) {
        auto ws = words(line);
        const std::string& head = ws[0];
        if (head == "machine") {
            if (saw_machine_) err("duplicate machine header");
            if (ws.size() != 4 || ws[2] != "project")
                err("expected 'machine <name> project <id>'");
            model_.name = ws[1];
            model_.project = ws[3];
            saw_machine_ = true;
            return;
        }
        if (!saw_machine_) err("model must start with the machine header");
        if (head == "sets" || head == "constants" || head == "variables") {
            require_top(head);
            auto& target = head == "sets" ? model_.sets
                         : head == "constants" ? model_.constants
                                               : model_.variables;
            for (std::size_t i = 1; i < ws.size(); ++i) {
                if (!valid_plain_ident(ws[i])) err("bad identifier '" + ws[i] + "' in " + head);
                target.push_back(ws[i]);
            }
            return;
        }
        if (head == "axioms" || head == "invariants" || head == "events") {
            require_top(head);
            if (ws.size() != 1) err("'" + head + "' takes no arguments");
            state_ = head == "axioms" ? State::Axioms
                   : head == "invariants" ? State::Invariants
                                          : State::Events;
            return;
        }
        if (head == "event") {
            if (state_ != State::Events) err("'event' outside the events section");
            begin_event(ws);
            return;
        }
        if (head == "where") {
            if (state_ != State::EventHead || ws.size() != 1) err("unexpected 'where'");
            state_ = State::EventGuards;
            return;
        }
        if (head == "then") {
            if ((state_ != State::EventHead && state_ != State::EventGuards) || ws.size() != 1)
                err("unexpected 'then'");
            state_ = State::EventActions;
            return;
        }
        if (head == "end") {
            if (state_ != State::EventHead && state_ != State::EventGuards &&
                state_ != State::EventActions)
                err("unexpected 'end'");
            if (ws.size() != 1) err("'end' takes no arguments");
            finish_event();
            state_ = State::Events;
            return;
        }
        if (head[0] == '@') {
            handle_labeled(line, ws);
            return;
        }
        err("unexpected line '" + line + "'");
    }

    void require_top(const std::string& head) {
        if (state_ != State::Top && state_ != State::Axioms && state_ != State::Invariants &&
            state_ != State::Events)
            err("'" + head + "' inside an event");
        state_ = State::Top;
    }

    void check_unique(const std::vector<std::string>& names, const std::string& where) {
        std::set<std::string> seen;
        for (const auto& n : names)
            if (!seen.insert(n).second) throw DuplicateNameError(n, where);
    }

    void begin_event(const std::vector<std::string>& ws) {
        current_ = Event{};
        if (ws.size() < 2 || !valid_plain_ident(ws[1])) err("expected 'event <name>'");
        current_.name = ws[1];
        std::size_t i = 2;
        if (i < ws.size() && ws[i] == "any") {
            ++i;
            while (i < ws.size() && ws[i] != "where" && ws[i] != "then") {
                if (!valid_plain_ident(ws[i])) err("bad parameter '" + ws[i] + "'");
                current_.params.push_back(ws[i]);
                ++i;
            }
            if (current_.params.empty()) err("'any' needs at least one parameter");
        }
        state_ = State::EventHead;
        if (i < ws.size()) {
            if (ws[i] == "where") state_ = State::EventGuards;
            else if (ws[i] == "then") state_ = State::EventActions;
            else err("unexpected '" + ws[i] + "' in event header");
            if (i + 1 < ws.size()) err("trailing tokens after '" + ws[i] + "'");
        }
    }

    void handle_labeled(const std::string& line, const std::vector<std::string>& ws) {
        std::string label = ws[0].substr(1);
        if (!valid_plain_ident(label)) err("bad label '" + ws[0] + "'");
        std::size_t body_pos = line.find(ws[0]) + ws[0].size();
        std::string rest = strip(line.substr(body_pos));
        if (rest.empty()) err("label '" + ws[0] + "' without a formula");
        switch (state_) {
            case State::Axioms:
                model_.axioms.push_back({label, parse_pred(rest)});
                return;
            case State::Invariants:
                model_.invariants.push_back({label, parse_pred(rest)});
                return;
            case State::EventGuards:
                current_.guards.push_back({label, parse_pred(rest)});
                return;
            case State::EventActions:
                current_.actions.push_back(parse_action(label, rest));
                return;
            default:
                err("labeled formula outside a section");
        }
    }

    FormulaPtr parse_pred(const std::string& text) {
        try {
            return parse_predicate(text);
        } catch (ParseError& e) {
            throw ParseError(e.what(), shift(e.span()), e.expected());
        }
    }

    Action parse_action(const std::string& label, const std::string& rest) {
        auto ws = words(rest);
        if (ws.size() < 3 || !valid_plain_ident(ws[0]))
            err("expected '<variable> := <expr>' or '<variable> :| <predicate>'");
        Action action;
        action.label = label;
        action.variable = ws[0];
        std::size_t op_pos = rest.find(ws[0]) + ws[0].size();
        std::string tail = strip(rest.substr(op_pos));
        try {
            if (tail.rfind(":=", 0) == 0) {
                action.kind = ActionKind::Becomes;
                action.body = parse_expression(strip(tail.substr(2)));
            } else if (tail.rfind(":|", 0) == 0) {
                action.kind = ActionKind::BecomesSuchThat;
                ParseOptions opts;
                opts.allow_primed = true;
                action.body = parse_predicate(strip(tail.substr(2)), opts);
            } else {
                err("action needs ':=' or ':|'");
            }
        } catch (ParseError& e) {
            throw ParseError(e.what(), shift(e.span()), e.expected());
        }
        return action;
    }

    SourceSpan shift(SourceSpan s) const {
        return {line_start_ + s.start, line_start_ + s.end};
    }

    void finish_event() {
        for (const auto& e : model_.events)
            if (e.name == current_.name) throw DuplicateNameError(current_.name, "events");
        model_.events.push_back(current_);
    }

    // section invariants, checked once the whole file is read
    void validate() {
        check_unique(model_.sets, "sets");
        check_unique(model_.constants, "constants");
        check_unique(model_.variables, "variables");
        std::set<std::string> declared;
        for (const auto& group : {model_.sets, model_.constants, model_.variables})
            for (const auto& n : group)
                if (!declared.insert(n).second) throw DuplicateNameError(n, "declarations");

        check_labels(model_.axioms, "axioms");
        check_labels(model_.invariants, "invariants");

        std::set<std::string> context(model_.sets.begin(), model_.sets.end());
        context.insert(model_.constants.begin(), model_.constants.end());
        for (const auto& ax : model_.axioms)
            check_idents(ax.formula, context, "axiom " + ax.label);

        std::set<std::string> machine_scope = context;
        machine_scope.insert(model_.variables.begin(), model_.variables.end());
        for (const auto& inv : model_.invariants)
            check_idents(inv.formula, machine_scope, "invariant " + inv.label);

        for (const auto& event : model_.events) validate_event(event, declared, machine_scope);
    }

    void validate_event(const Event& event, const std::set<std::string>& declared,
                        const std::set<std::string>& machine_scope) {
        std::set<std::string> params;
        for (const auto& p : event.params) {
            if (declared.count(p))
                throw DuplicateNameError(p, "event " + event.name + " (shadows a declaration)");
            if (!params.insert(p).second)
                throw DuplicateNameError(p, "parameters of event " + event.name);
        }
        check_labels(event.guards, "guards of event " + event.name);
        std::set<std::string> guard_scope = machine_scope;
        guard_scope.insert(params.begin(), params.end());
        for (const auto& g : event.guards)
            check_idents(g.formula, guard_scope, "guard " + g.label);

        std::set<std::string> assigned;
        std::set<std::string> action_labels;
        const std::set<std::string> vars(model_.variables.begin(), model_.variables.end());
        for (const auto& a : event.actions) {
            if (!action_labels.insert(a.label).second)
                throw DuplicateNameError(a.label, "actions of event " + event.name);
            if (!vars.count(a.variable))
                throw UndeclaredIdentifierError(a.variable, "action " + a.label);
            if (!assigned.insert(a.variable).second)
                throw DuplicateNameError(a.variable,
                                         "assignments of event " + event.name);
        }
        std::set<std::string> action_scope = guard_scope;
        std::set<std::string> primed_scope = action_scope;
        for (const auto& v : event.assigned()) primed_scope.insert(v + "'");
        for (const auto& a : event.actions) {
            const auto& scope =
                a.kind == ActionKind::BecomesSuchThat ? primed_scope : action_scope;
            check_idents(a.body, scope, "action " + a.label);
        }
    }

    template <typename Seq>
    void check_labels(const Seq& seq, const std::string& where) {
        std::set<std::string> seen;
        for (const auto& item : seq)
            if (!seen.insert(item.label).second) throw DuplicateNameError(item.label, where);
    }

    void check_idents(const FormulaPtr& f, const std::set<std::string>& scope,
                      const std::string& where) {
        for (const auto& name : free_identifiers(f))
            if (!scope.count(name)) throw UndeclaredIdentifierError(name, where);
    }

    const std::string& text_;
    MachineModel model_;
    Event current_;
    State state_ = State::Top;
    bool saw_machine_ = false;
    std::size_t offset_ = 0;
    std::size_t line_start_ = 0;
};

}  // namespace detail

inline MachineModel parse_machine(const std::string& text) {
    return detail::MachineParser(text).parse();
}

}  // namespace obsel

#endif  // OBSEL_MACHINE_HPP
