// obsel — proof-obligation preparation toolkit.
//
// Subcommands: shingle, select, lemma (list|check|match), po gen, prove,
// run, stats.  See README.md for the formats involved.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "obsel/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw obsel::IoError(path, "cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

obsel::FormulaPtr read_formula_file(const std::string& path) {
    return obsel::parse_formula(trim(read_file(path)));
}

// one formula per line; blank lines and # comments skipped
std::vector<obsel::FormulaPtr> read_formula_lines(const std::string& path) {
    std::vector<obsel::FormulaPtr> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        out.push_back(obsel::parse_formula(t));
    }
    return out;
}

ordered_json shingle_json(const obsel::ShingleMultiset& ms) {
    ordered_json arr = ordered_json::array();
    for (const auto& [shingle, count] : ms) {
        ordered_json labels = ordered_json::array();
        for (obsel::Kind k : shingle.labels) labels.push_back(obsel::kind_symbol(k));
        arr.push_back({{"labels", labels}, {"count", count}});
    }
    return arr;
}

void add_score_options(CLI::App* cmd, obsel::ScoreParams& params) {
    cmd->add_option("--c", params.structure_coeff, "structure-term coefficient");
    cmd->add_option("--n", params.shingle_size, "shingle size")->check(CLI::Range(2, 5));
    cmd->add_option("--tau", params.prune_threshold, "shingle prune threshold");
    cmd->add_option("--cap", params.profile_cap, "per-profile shingle cap");
    cmd->add_option("--theta", params.score_threshold, "selection score threshold");
    cmd->add_option("--top", params.max_candidates, "max structural candidates");
    cmd->add_option("--depth", params.ident_depth, "free-identifier closure depth");
}

const char* source_name(obsel::CandidateSource s) {
    return s == obsel::CandidateSource::Hypothesis ? "hyp" : "lemma";
}

const char* via_name(obsel::SelectionRoute v) {
    return v == obsel::SelectionRoute::FreeIdent ? "free_ident" : "structural";
}

int exit_code_for(obsel::Verdict v) {
    switch (v) {
        case obsel::Verdict::Valid: return 0;
        case obsel::Verdict::Unknown:
        case obsel::Verdict::Timeout:
        case obsel::Verdict::Invalid: return 2;
        case obsel::Verdict::ToolError: return 1;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"obsel — proof-obligation preparation toolkit"};
    app.require_subcommand(1);

    // ── shingle ─────────────────────────────────────────────────────────
    auto* shingle_cmd = app.add_subcommand("shingle", "print a formula's shingle profile");
    std::string shingle_file;
    std::size_t shingle_n = 3;
    bool shingle_json_out = false;
    shingle_cmd->add_option("file", shingle_file, "formula file")->required();
    shingle_cmd->add_option("--n", shingle_n, "shingle size")->check(CLI::Range(2, 5));
    shingle_cmd->add_flag("--json", shingle_json_out, "JSON output");

    // ── select ──────────────────────────────────────────────────────────
    auto* select_cmd = app.add_subcommand("select", "rank hypotheses and lemmas for a goal");
    std::string select_goal, select_hyps, select_lemmas;
    obsel::ScoreParams select_params;
    bool select_json_out = false;
    select_cmd->add_option("--goal", select_goal, "goal formula file")->required();
    select_cmd->add_option("--hyps", select_hyps, "hypotheses, one formula per line")->required();
    select_cmd->add_option("--lemmas", select_lemmas, "lemma store directory");
    add_score_options(select_cmd, select_params);
    select_cmd->add_flag("--json", select_json_out, "JSON output");

    // ── lemma ───────────────────────────────────────────────────────────
    auto* lemma_cmd = app.add_subcommand("lemma", "lemma store utilities");
    lemma_cmd->require_subcommand(1);
    auto* lemma_list = lemma_cmd->add_subcommand("list", "list lemmas in a store");
    auto* lemma_check = lemma_cmd->add_subcommand("check", "validate every lemma file");
    auto* lemma_match = lemma_cmd->add_subcommand("match", "match triggers against a goal");
    std::string lemma_store_dir, lemma_goal;
    for (auto* sub : {lemma_list, lemma_check, lemma_match})
        sub->add_option("--store", lemma_store_dir, "lemma store directory")->required();
    lemma_match->add_option("--goal", lemma_goal, "goal formula file")->required();

    // ── po ──────────────────────────────────────────────────────────────
    auto* po_cmd = app.add_subcommand("po", "proof obligation utilities");
    po_cmd->require_subcommand(1);
    auto* po_gen = po_cmd->add_subcommand("gen", "generate invariant-preservation obligations");
    std::string po_machine, po_out;
    bool po_json_out = false;
    po_gen->add_option("machine", po_machine, "machine file")->required();
    po_gen->add_option("--out", po_out, "directory for <id>.po files");
    po_gen->add_flag("--json", po_json_out, "JSON output");

    // ── prove ───────────────────────────────────────────────────────────
    auto* prove_cmd = app.add_subcommand("prove", "run provers on one obligation");
    std::string prove_po, prove_prover, prove_store, prove_ledger, prove_map, prove_out;
    bool prove_stub = false, prove_select = false, prove_obfuscate = false;
    obsel::ScoreParams prove_params;
    prove_cmd->add_option("po-file", prove_po, "obligation file")->required();
    prove_cmd->add_option("--prover", prove_prover, "prover config file");
    prove_cmd->add_flag("--stub", prove_stub, "use the built-in stub prover");
    prove_cmd->add_option("--store", prove_store, "lemma store directory");
    prove_cmd->add_flag("--select", prove_select, "filter hypotheses before proving");
    add_score_options(prove_cmd, prove_params);
    prove_cmd->add_option("--ledger", prove_ledger, "attempt ledger to append to");
    prove_cmd->add_option("--map", prove_map, "translation map file");
    prove_cmd->add_option("--out", prove_out, "directory for assembled obligation and theory");
    prove_cmd->add_flag("--obfuscate", prove_obfuscate, "also write an identifier-renamed copy");

    // ── run ─────────────────────────────────────────────────────────────
    auto* run_cmd = app.add_subcommand("run", "full pipeline over a machine");
    std::string run_machine, run_store, run_ledger, run_map, run_out, run_provers;
    bool run_stub = false, run_json_out = false, run_obfuscate = false;
    std::size_t run_jobs = 1;
    obsel::ScoreParams run_params;
    run_cmd->add_option("--machine", run_machine, "machine file")->required();
    run_cmd->add_option("--store", run_store, "lemma store directory");
    run_cmd->add_flag("--stub", run_stub, "use the built-in stub prover");
    run_cmd->add_option("--provers", run_provers, "comma-separated prover config files");
    run_cmd->add_option("--ledger", run_ledger, "attempt ledger to append to");
    run_cmd->add_option("--map", run_map, "translation map file");
    run_cmd->add_option("--out", run_out, "directory for obligations and theories");
    run_cmd->add_option("--jobs", run_jobs, "parallel obligations");
    run_cmd->add_flag("--obfuscate", run_obfuscate, "also write identifier-renamed copies");
    add_score_options(run_cmd, run_params);
    run_cmd->add_flag("--json", run_json_out, "JSON summary");

    // ── stats ───────────────────────────────────────────────────────────
    auto* stats_cmd = app.add_subcommand("stats", "aggregate an attempt ledger");
    std::string stats_ledger;
    bool stats_json_out = false;
    stats_cmd->add_option("--ledger", stats_ledger, "ledger file")->required();
    stats_cmd->add_flag("--json", stats_json_out, "JSON output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(shingle_cmd)) {
            auto f = read_formula_file(shingle_file);
            auto p = obsel::profile(f, shingle_n);
            if (shingle_json_out) {
                ordered_json j;
                j["depth"] = shingle_json(p.depth);
                j["structure"] = shingle_json(p.structure);
                std::cout << j.dump(2) << "\n";
            } else {
                for (const auto& [s, count] : p.depth)
                    std::cout << "depth " << s.to_string() << " x" << count << "\n";
                for (const auto& [s, count] : p.structure)
                    std::cout << "structure " << s.to_string() << " x" << count << "\n";
            }
            return 0;
        }

        if (app.got_subcommand(select_cmd)) {
            auto goal = read_formula_file(select_goal);
            auto hyps = read_formula_lines(select_hyps);
            std::vector<obsel::FormulaPtr> bodies;
            std::vector<std::string> body_names;
            if (!select_lemmas.empty()) {
                auto store = obsel::load_lemma_store(select_lemmas);
                for (const auto& lemma : store.lemmas) {
                    bodies.push_back(lemma.statement);
                    body_names.push_back(lemma.name);
                }
            }
            auto ranked = obsel::select(goal, hyps, bodies, select_params);
            if (select_json_out) {
                ordered_json arr = ordered_json::array();
                for (const auto& c : ranked)
                    arr.push_back({{"index", c.index},
                                   {"source", source_name(c.source)},
                                   {"score", c.score},
                                   {"via", via_name(c.via)}});
                std::cout << arr.dump(2) << "\n";
            } else {
                for (const auto& c : ranked) {
                    std::cout << source_name(c.source) << " " << c.index << " score=" << c.score
                              << " via=" << via_name(c.via);
                    if (c.source == obsel::CandidateSource::Lemma && c.index < body_names.size())
                        std::cout << " (" << body_names[c.index] << ")";
                    std::cout << "\n";
                }
            }
            return 0;
        }

        if (app.got_subcommand(lemma_cmd)) {
            if (lemma_cmd->got_subcommand(lemma_check)) {
                // report every broken file, not just the first
                std::size_t bad = 0, total = 0;
                std::vector<fs::path> files;
                for (const auto& entry : fs::directory_iterator(lemma_store_dir))
                    if (entry.is_regular_file() && entry.path().extension() == ".lemma")
                        files.push_back(entry.path());
                std::sort(files.begin(), files.end());
                for (const auto& path : files) {
                    ++total;
                    try {
                        obsel::parse_lemma(read_file(path.string()), path.filename().string());
                        std::cout << "ok   " << path.filename().string() << "\n";
                    } catch (const std::exception& e) {
                        ++bad;
                        std::cout << "FAIL " << path.filename().string() << ": " << e.what()
                                  << "\n";
                    }
                }
                std::cout << total - bad << "/" << total << " lemma files are well-formed\n";
                return bad == 0 ? 0 : 1;
            }
            auto store = obsel::load_lemma_store(lemma_store_dir);
            if (lemma_cmd->got_subcommand(lemma_list)) {
                for (const auto& lemma : store.lemmas) {
                    std::cout << lemma.name << " [" << lemma.visibility.to_string() << "]";
                    if (!lemma.parameters.empty()) {
                        std::cout << " params:";
                        for (const auto& p : lemma.parameters) std::cout << " " << p;
                    }
                    std::cout << "\n";
                }
                return 0;
            }
            // match
            auto goal = read_formula_file(lemma_goal);
            obsel::PrintOptions pat;
            pat.metavars = true;
            for (const auto& lemma : store.lemmas) {
                auto bindings = obsel::match_trigger(lemma.trigger, goal);
                for (const auto& binding : bindings) {
                    std::cout << lemma.name << ":";
                    for (const auto& [name, value] : binding)
                        std::cout << " ?" << name << "=" << obsel::print_formula(value);
                    std::cout << "\n  " << obsel::print_formula(obsel::instantiate(lemma, binding))
                              << "\n";
                }
                if (bindings.empty()) std::cout << lemma.name << ": no match\n";
            }
            return 0;
        }

        if (app.got_subcommand(po_cmd)) {
            auto model = obsel::parse_machine(read_file(po_machine));
            auto pos = obsel::generate_inv_pos(model);
            ordered_json arr = ordered_json::array();
            for (const auto& po : pos) {
                if (!po_out.empty()) obsel::write_po_file(po, po_out);
                if (po_json_out)
                    arr.push_back({{"id", po.id},
                                   {"hash", obsel::hash_hex(po.hash)},
                                   {"n_hyps", po.hypotheses.size()}});
                else
                    std::cout << po.id << " hyps=" << po.hypotheses.size() << " hash="
                              << obsel::hash_hex(po.hash) << "\n";
            }
            if (po_json_out) std::cout << arr.dump(2) << "\n";
            return 0;
        }

        if (app.got_subcommand(prove_cmd)) {
            if (prove_stub ? !prove_prover.empty() : prove_prover.empty()) {
                std::cerr << "prove: need exactly one of --stub or --prover\n";
                return 1;
            }
            auto po = obsel::read_po_file(prove_po);
            obsel::PipelineConfig cfg;
            cfg.machine_path = prove_po;  // unused by prove_obligation
            cfg.params = prove_params;
            cfg.use_selection = prove_select;
            cfg.stub = prove_stub;
            if (!prove_prover.empty())
                cfg.provers.push_back(obsel::read_prover_config(prove_prover));
            cfg.ledger_path = prove_ledger;
            cfg.out_dir = prove_out;
            cfg.obfuscate = prove_obfuscate;
            if (!prove_map.empty()) cfg.map = obsel::parse_translation_map(read_file(prove_map));
            obsel::LemmaStore store;
            const obsel::LemmaStore* store_ptr = nullptr;
            if (!prove_store.empty()) {
                store = obsel::load_lemma_store(prove_store);
                store_ptr = &store;
            }
            auto run = obsel::prove_obligation(po, store_ptr, cfg);
            std::cout << run.outcome.po_id << " " << obsel::verdict_name(run.outcome.verdict)
                      << " prover=" << run.outcome.prover << " ms=" << run.outcome.ms;
            if (!run.outcome.lemmas.empty()) {
                std::cout << " lemmas=";
                for (std::size_t i = 0; i < run.outcome.lemmas.size(); ++i)
                    std::cout << (i ? "," : "") << run.outcome.lemmas[i];
            }
            std::cout << "\n";
            return exit_code_for(run.outcome.verdict);
        }

        if (app.got_subcommand(run_cmd)) {
            obsel::PipelineConfig cfg;
            cfg.machine_path = run_machine;
            cfg.store_dir = run_store;
            cfg.params = run_params;
            cfg.stub = run_stub;
            cfg.ledger_path = run_ledger;
            cfg.out_dir = run_out;
            cfg.obfuscate = run_obfuscate;
            cfg.parallelism = run_jobs;
            if (!run_map.empty()) cfg.map = obsel::parse_translation_map(read_file(run_map));
            if (!run_provers.empty()) {
                std::istringstream in(run_provers);
                std::string item;
                while (std::getline(in, item, ','))
                    if (!item.empty()) cfg.provers.push_back(obsel::read_prover_config(item));
            }
            auto summary = obsel::run_pipeline(cfg);
            if (run_json_out) {
                ordered_json arr = ordered_json::array();
                for (const auto& o : summary.outcomes) {
                    ordered_json entry = {{"po_id", o.po_id},
                                          {"verdict", obsel::verdict_name(o.verdict)},
                                          {"prover", o.prover},
                                          {"lemmas", o.lemmas},
                                          {"ms", o.ms}};
                    if (!o.error.empty()) entry["error"] = o.error;
                    arr.push_back(entry);
                }
                std::cout << arr.dump(2) << "\n";
            } else {
                for (const auto& o : summary.outcomes) {
                    if (!o.error.empty()) {
                        std::cout << o.po_id << " ERROR " << o.error << "\n";
                        continue;
                    }
                    std::cout << o.po_id << " " << obsel::verdict_name(o.verdict)
                              << " prover=" << o.prover << " ms=" << o.ms;
                    if (!o.lemmas.empty()) {
                        std::cout << " lemmas=";
                        for (std::size_t i = 0; i < o.lemmas.size(); ++i)
                            std::cout << (i ? "," : "") << o.lemmas[i];
                    }
                    std::cout << "\n";
                }
                std::cout << summary.outcomes.size() << " obligation(s), "
                          << summary.ledger_lines << " ledger line(s)\n";
            }
            return summary.had_errors ? 1 : 0;
        }

        if (app.got_subcommand(stats_cmd)) {
            auto stats = obsel::ledger_stats(stats_ledger);
            if (stats_json_out) {
                ordered_json j;
                j["total"] = stats.total;
                ordered_json provers = ordered_json::object();
                for (const auto& [name, agg] : stats.per_prover)
                    provers[name] = {{"attempts", agg.attempts},
                                     {"valid", agg.valid},
                                     {"success_rate", agg.success_rate()}};
                j["per_prover"] = provers;
                ordered_json lemmas = ordered_json::object();
                for (const auto& [name, agg] : stats.per_lemma)
                    lemmas[name] = {{"attempts", agg.attempts},
                                    {"valid", agg.valid},
                                    {"success_rate", agg.success_rate()}};
                j["per_lemma"] = lemmas;
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "records: " << stats.total << "\n";
                for (const auto& [name, agg] : stats.per_prover)
                    std::cout << "prover " << name << ": " << agg.valid << "/" << agg.attempts
                              << " valid (" << agg.success_rate() << ")\n";
                for (const auto& [name, agg] : stats.per_lemma)
                    std::cout << "lemma " << name << ": " << agg.valid << "/" << agg.attempts
                              << " valid (" << agg.success_rate() << ")\n";
            }
            return 0;
        }
    } catch (const obsel::ParseError& e) {
        std::cerr << "error: " << e.what() << " (bytes " << e.span().start << ".." << e.span().end
                  << ")\n";
        if (!e.expected().empty()) {
            std::cerr << "expected:";
            for (const auto& t : e.expected()) std::cerr << " " << t;
            std::cerr << "\n";
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
