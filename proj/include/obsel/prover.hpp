// obsel/prover.hpp — external prover dispatch and the built-in stub prover.
//
// External provers are arbitrary commands: the theory text goes to a temp
// file, the command template runs under /bin/sh with {file}/{timeout}
// substituted, stdout+stderr are captured, and the configured verdict
// patterns classify the output (first match wins).  A run past its deadline
// is killed (whole process group) and reported as Timeout.
//
// The stub prover discharges desk-scale obligations with three sound rules:
//   (a) the goal is alpha-equal to a hypothesis;
//   (b) the goal matches the conclusion of a hypothesis of shape
//       forall xs . premises => conclusion under a binding whose
//       instantiated premises each equal another hypothesis;
//   (c) a or b holds after rewriting the goal with hypothesis equalities
//       x' = E (each used at most once).
// It never returns Valid on anything the rules cannot justify.

#ifndef OBSEL_PROVER_HPP
#define OBSEL_PROVER_HPP

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "obsel/errors.hpp"
#include "obsel/formula.hpp"
#include "obsel/ledger.hpp"
#include "obsel/lemma.hpp"
#include "obsel/obligation.hpp"

namespace obsel {

// ── External provers ────────────────────────────────────────────────────────

struct VerdictPattern {
    Verdict verdict = Verdict::Unknown;
    std::string regex_text;
};

struct ProverConfig {
    std::string id;
    std::string command;  // template with {file} and optional {timeout}
    double timeout_seconds = 5.0;
    std::vector<VerdictPattern> patterns;  // priority order, first match wins

    void validate() const {
        if (id.empty()) throw Error("prover config needs an id");
        if (command.find("{file}") == std::string::npos)
            throw Error("prover command template must contain {file}");
        if (timeout_seconds <= 0) throw Error("prover timeout must be positive");
    }
};

// Line-oriented config:
//   prover <id>
//   command <template>
//   timeout <seconds>
//   verdict <Valid|Invalid|Unknown> <regex>
inline ProverConfig parse_prover_config(const std::string& text) {
    ProverConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        auto rest = [&]() {
            std::string r;
            std::getline(ls, r);
            std::size_t b = r.find_first_not_of(" \t");
            return b == std::string::npos ? std::string() : r.substr(b);
        };
        if (head == "prover") cfg.id = rest();
        else if (head == "command") cfg.command = rest();
        else if (head == "timeout") {
            try {
                cfg.timeout_seconds = std::stod(rest());
            } catch (const std::exception&) {
                throw ParseError("prover config line " + std::to_string(lineno) +
                                     ": bad timeout",
                                 {0, 0});
            }
        } else if (head == "verdict") {
            std::string v;
            ls >> v;
            std::string pattern;
            std::getline(ls, pattern);
            std::size_t b = pattern.find_first_not_of(" \t");
            pattern = b == std::string::npos ? std::string() : pattern.substr(b);
            Verdict verdict = verdict_from(v);
            if (verdict == Verdict::Timeout || verdict == Verdict::ToolError)
                throw ParseError("prover config line " + std::to_string(lineno) +
                                     ": only Valid/Invalid/Unknown patterns are configurable",
                                 {0, 0});
            cfg.patterns.push_back({verdict, pattern});
        } else {
            throw ParseError(
                "prover config line " + std::to_string(lineno) + ": unexpected '" + head + "'",
                {0, 0});
        }
    }
    cfg.validate();
    return cfg;
}

inline ProverConfig read_prover_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_prover_config(buf.str());
}

struct ProverResult {
    Verdict verdict = Verdict::ToolError;
    std::int64_t duration_ms = 0;
    std::string output;
};

namespace detail {

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

inline std::string format_seconds(double s) {
    std::ostringstream out;
    out << s;
    return out.str();
}

}  // namespace detail

// Writes the theory to a temp file, runs the command, enforces the timeout,
// classifies the output.  Setup failures throw ToolError; a run whose output
// matches no pattern yields verdict ToolError with the output preserved.
inline ProverResult run_prover(const std::string& theory_text, const ProverConfig& cfg) {
    cfg.validate();
    char path[] = "/tmp/obsel_theory_XXXXXX";
    int tfd = ::mkstemp(path);
    if (tfd < 0) throw ToolError(std::string("mkstemp: ") + std::strerror(errno));
    {
        std::size_t off = 0;
        while (off < theory_text.size()) {
            ssize_t n = ::write(tfd, theory_text.data() + off, theory_text.size() - off);
            if (n < 0) {
                ::close(tfd);
                ::unlink(path);
                throw ToolError(std::string("write: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
        ::close(tfd);
    }
    std::string cmd = detail::replace_all(cfg.command, "{file}", path);
    cmd = detail::replace_all(cmd, "{timeout}", detail::format_seconds(cfg.timeout_seconds));

    int pipefd[2];
    if (::pipe(pipefd) != 0) {
        ::unlink(path);
        throw ToolError(std::string("pipe: ") + std::strerror(errno));
    }
    auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        ::unlink(path);
        throw ToolError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(pipefd[1], STDOUT_FILENO);
        ::dup2(pipefd[1], STDERR_FILENO);
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    ::close(pipefd[1]);
    ::fcntl(pipefd[0], F_SETFL, O_NONBLOCK);

    const auto deadline =
        start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    std::chrono::duration<double>(cfg.timeout_seconds));
    std::string output;
    constexpr std::size_t kOutputCap = 1 << 20;
    bool timed_out = false;
    bool child_done = false;
    int status = 0;
    auto drain = [&]() {
        char buf[4096];
        while (true) {
            ssize_t n = ::read(pipefd[0], buf, sizeof(buf));
            if (n > 0) {
                if (output.size() < kOutputCap)
                    output.append(buf, static_cast<std::size_t>(
                                           std::min<ssize_t>(n, kOutputCap - output.size())));
            } else {
                return n == 0;  // true at EOF
            }
        }
    };
    while (true) {
        drain();
        if (!child_done && ::waitpid(pid, &status, WNOHANG) == pid) child_done = true;
        if (child_done) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            timed_out = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    // pick up output that raced the exit; bounded in case a grandchild still
    // holds the pipe
    for (int i = 0; i < 10 && !drain(); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    ::close(pipefd[0]);
    ::unlink(path);

    ProverResult result;
    result.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    result.output = std::move(output);
    if (timed_out) {
        result.verdict = Verdict::Timeout;
        return result;
    }
    for (const auto& pattern : cfg.patterns) {
        if (std::regex_search(result.output, std::regex(pattern.regex_text))) {
            result.verdict = pattern.verdict;
            return result;
        }
    }
    result.verdict = Verdict::ToolError;
    return result;
}

// ── Stub prover ─────────────────────────────────────────────────────────────

namespace detail {

inline void flatten_conjuncts(const FormulaPtr& f, std::vector<FormulaPtr>& out) {
    if (f->kind() == Kind::And) {
        flatten_conjuncts(f->child(0), out);
        flatten_conjuncts(f->child(1), out);
        return;
    }
    out.push_back(f);
}

inline FormulaPtr idents_to_metavars(const FormulaPtr& f, const std::set<std::string>& holes) {
    switch (f->kind()) {
        case Kind::Ident:
            return holes.count(f->name()) ? Formula::meta_var(f->name()) : f;
        case Kind::Forall:
        case Kind::Exists: {
            std::set<std::string> inner = holes;
            for (const auto& v : f->bound()) inner.erase(v);
            auto body = idents_to_metavars(f->child(0), inner);
            if (body == f->child(0)) return f;
            return Formula::quantifier(f->kind(), f->bound(), std::move(body));
        }
        default: {
            if (f->children().empty()) return f;
            std::vector<FormulaPtr> children;
            bool changed = false;
            for (const auto& c : f->children()) {
                children.push_back(idents_to_metavars(c, holes));
                changed = changed || children.back() != c;
            }
            if (!changed) return f;
            return Formula::node(f->kind(), std::move(children));
        }
    }
}

inline bool stub_rule_axiom(const FormulaPtr& goal, const std::vector<FormulaPtr>& hyps) {
    for (const auto& h : hyps)
        if (alpha_equal(h, goal)) return true;
    return false;
}

inline bool discharge_premises(const std::vector<FormulaPtr>& premise_patterns, std::size_t idx,
                               const Binding& binding, const std::vector<FormulaPtr>& hyps,
                               std::size_t rule_hyp) {
    if (idx == premise_patterns.size()) return true;
    for (std::size_t j = 0; j < hyps.size(); ++j) {
        if (j == rule_hyp) continue;
        Binding extended = binding;
        if (match_root(premise_patterns[idx], hyps[j], extended) &&
            discharge_premises(premise_patterns, idx + 1, extended, hyps, rule_hyp))
            return true;
    }
    return false;
}

// One modus-ponens step with matching against a (possibly nested)
// forall/implication hypothesis.
inline bool stub_rule_forall_mp(const FormulaPtr& goal, const std::vector<FormulaPtr>& hyps) {
    for (std::size_t hi = 0; hi < hyps.size(); ++hi) {
        std::vector<std::string> bound;
        std::vector<FormulaPtr> premises;
        FormulaPtr concl = hyps[hi];
        while (true) {
            if (concl->kind() == Kind::Forall) {
                bound.insert(bound.end(), concl->bound().begin(), concl->bound().end());
                concl = concl->child(0);
            } else if (concl->kind() == Kind::Implies) {
                flatten_conjuncts(concl->child(0), premises);
                concl = concl->child(1);
            } else {
                break;
            }
            std::set<std::string> holes(bound.begin(), bound.end());
            Binding binding;
            if (!match_root(idents_to_metavars(concl, holes), goal, binding)) continue;
            std::vector<FormulaPtr> premise_patterns;
            premise_patterns.reserve(premises.size());
            for (const auto& p : premises)
                premise_patterns.push_back(idents_to_metavars(p, holes));
            if (discharge_premises(premise_patterns, 0, binding, hyps, hi)) return true;
        }
    }
    return false;
}

// Goal variants reachable by substituting hypothesis equalities x' = E, each
// equality applied at most once.
inline std::vector<FormulaPtr> stub_goal_stages(const FormulaPtr& goal,
                                                const std::vector<Hypothesis>& hypotheses) {
    std::vector<std::pair<std::string, FormulaPtr>> equalities;
    for (const auto& hyp : hypotheses) {
        const Formula& f = *hyp.formula;
        if (f.kind() != Kind::Equal) continue;
        const Formula& lhs = *f.child(0);
        if (lhs.kind() == Kind::Ident && !lhs.name().empty() && lhs.name().back() == '\'')
            equalities.emplace_back(lhs.name(), f.child(1));
    }
    std::vector<FormulaPtr> stages{goal};
    std::vector<bool> used(equalities.size(), false);
    FormulaPtr current = goal;
    bool changed = true;
    while (changed) {
        changed = false;
        auto fv = free_identifiers(current);
        for (std::size_t i = 0; i < equalities.size(); ++i) {
            if (used[i] || !fv.count(equalities[i].first)) continue;
            used[i] = true;
            try {
                current = substitute(current, {{equalities[i].first, equalities[i].second}});
            } catch (const CaptureError&) {
                continue;
            }
            stages.push_back(current);
            changed = true;
            fv = free_identifiers(current);
        }
    }
    return stages;
}

}  // namespace detail

// Valid iff one of the three rules (or a rule after equality rewriting)
// applies; Unknown otherwise.
inline Verdict stub_prove(const ProofObligation& po) {
    std::vector<FormulaPtr> hyps;
    hyps.reserve(po.hypotheses.size());
    for (const auto& h : po.hypotheses) hyps.push_back(h.formula);
    for (const auto& goal : detail::stub_goal_stages(po.goal, po.hypotheses)) {
        if (detail::stub_rule_axiom(goal, hyps)) return Verdict::Valid;
        if (detail::stub_rule_forall_mp(goal, hyps)) return Verdict::Valid;
    }
    return Verdict::Unknown;
}

}  // namespace obsel

#endif  // OBSEL_PROVER_HPP
