// obsel/pipeline.hpp — the end-to-end flow: model -> proof obligations ->
// hypothesis/lemma selection -> lemma instantiation -> translation -> prover
// -> ledger.
//
// Matching and scoring run against the goal with before-after equalities
// substituted in, which restores the conjecture form the trigger patterns
// are written against.  Provers run in configured order until the first
// Valid verdict; every run is recorded.  Per-obligation failures never abort
// the batch.

#ifndef OBSEL_PIPELINE_HPP
#define OBSEL_PIPELINE_HPP

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "obsel/errors.hpp"
#include "obsel/ledger.hpp"
#include "obsel/lemma.hpp"
#include "obsel/machine.hpp"
#include "obsel/obligation.hpp"
#include "obsel/prover.hpp"
#include "obsel/similarity.hpp"
#include "obsel/translate.hpp"

namespace obsel {

struct PipelineConfig {
    std::string machine_path;
    std::string store_dir;  // empty: no lemma store
    ScoreParams params;
    bool use_selection = true;
    bool stub = false;
    std::vector<ProverConfig> provers;
    std::string ledger_path;  // empty: no ledger
    std::string out_dir;      // empty: nothing written per obligation
    bool obfuscate = false;
    std::size_t parallelism = 1;
    TranslationMap map = default_translation_map();

    void validate() const {
        if (machine_path.empty()) throw Error("pipeline needs a machine file");
        if (!stub && provers.empty()) throw Error("pipeline needs --stub or at least one prover");
        params.validate();
    }
};

struct PoOutcome {
    std::string po_id;
    Verdict verdict = Verdict::Unknown;
    std::string prover;
    std::vector<std::string> lemmas;
    std::int64_t ms = 0;
    std::string error;  // nonempty when this obligation failed to process
};

struct PipelineSummary {
    std::vector<PoOutcome> outcomes;  // in obligation id order
    std::size_t ledger_lines = 0;
    bool had_errors = false;
};

namespace detail {

struct ObligationRun {
    ProofObligation assembled;
    std::string theory;
    PoOutcome outcome;
    std::size_t ledger_lines = 0;
};

inline ObligationRun process_obligation(const ProofObligation& po, const LemmaStore* store,
                                        const PipelineConfig& cfg) {
    ObligationRun run;
    run.outcome.po_id = po.id;

    std::vector<FormulaPtr> hyps;
    hyps.reserve(po.hypotheses.size());
    for (const auto& h : po.hypotheses) hyps.push_back(h.formula);
    FormulaPtr goal = apply_equalities(po.goal, po.hypotheses);

    std::vector<SchematicLemma> in_scope;
    if (store) in_scope = lemmas_in_scope(*store, po.machine, po.project);

    std::vector<RankedCandidate> selection;
    if (cfg.use_selection) {
        std::vector<FormulaPtr> bodies;
        bodies.reserve(in_scope.size());
        for (const auto& lemma : in_scope) bodies.push_back(lemma.statement);
        selection = select(goal, hyps, bodies, cfg.params);
    } else {
        selection = select_all(po);
    }

    auto suggestions = suggest_lemmas(goal, hyps, in_scope, cfg.params);
    std::vector<FormulaPtr> instantiations;
    std::vector<std::string> names;
    for (const auto& s : suggestions) {
        instantiations.push_back(s.instantiated);
        names.push_back(s.lemma.name);
    }

    run.assembled = assemble_sequent(po, selection, instantiations, names);
    run.outcome.lemmas = names;
    run.theory = translate_sequent(run.assembled, cfg.map);

    if (!cfg.out_dir.empty()) {
        write_po_file(run.assembled, cfg.out_dir);
        namespace fs = std::filesystem;
        fs::path tpath = fs::path(cfg.out_dir) / (po.id + ".theory");
        fs::create_directories(tpath.parent_path());
        std::ofstream out(tpath);
        out << run.theory;
        if (cfg.obfuscate) {
            fs::path opath = fs::path(cfg.out_dir) / "obfuscated" /
                             (hash_hex(run.assembled.hash) + ".po");
            fs::create_directories(opath.parent_path());
            std::ofstream oout(opath);
            oout << po_to_string(obfuscate_po(run.assembled));
        }
    }

    auto record = [&](const std::string& prover, Verdict verdict, std::int64_t ms) {
        if (cfg.ledger_path.empty()) return;
        AttemptRecord rec;
        rec.ts = now_rfc3339();
        rec.po_id = po.id;
        rec.po_hash = run.assembled.hash;
        rec.prover = prover;
        rec.params = cfg.params;
        rec.n_hyps = run.assembled.hypotheses.size();
        rec.lemmas = names;
        rec.verdict = verdict;
        rec.ms = ms;
        record_attempt(cfg.ledger_path, rec);
        ++run.ledger_lines;
    };

    if (cfg.stub) {
        auto t0 = std::chrono::steady_clock::now();
        Verdict verdict = stub_prove(run.assembled);
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
        record("stub", verdict, ms);
        run.outcome.verdict = verdict;
        run.outcome.prover = "stub";
        run.outcome.ms = ms;
        return run;
    }

    for (const auto& prover : cfg.provers) {
        ProverResult result = run_prover(run.theory, prover);
        record(prover.id, result.verdict, result.duration_ms);
        run.outcome.verdict = result.verdict;
        run.outcome.prover = prover.id;
        run.outcome.ms = result.duration_ms;
        if (result.verdict == Verdict::Valid) break;
    }
    return run;
}

}  // namespace detail

inline PipelineSummary run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    std::ifstream in(cfg.machine_path);
    if (!in) throw IoError(cfg.machine_path, "cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    MachineModel model = parse_machine(buf.str());
    std::vector<ProofObligation> pos = generate_inv_pos(model);

    LemmaStore store;
    const LemmaStore* store_ptr = nullptr;
    if (!cfg.store_dir.empty()) {
        store = load_lemma_store(cfg.store_dir);
        store_ptr = &store;
    }

    PipelineSummary summary;
    summary.outcomes.resize(pos.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> ledger_lines{0};
    std::size_t workers = std::max<std::size_t>(1, std::min(cfg.parallelism, pos.size()));

    auto work = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= pos.size()) return;
            try {
                auto run = detail::process_obligation(pos[i], store_ptr, cfg);
                ledger_lines += run.ledger_lines;
                summary.outcomes[i] = std::move(run.outcome);
            } catch (const std::exception& e) {
                summary.outcomes[i].po_id = pos[i].id;
                summary.outcomes[i].error = e.what();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    summary.ledger_lines = ledger_lines;
    for (const auto& outcome : summary.outcomes)
        summary.had_errors = summary.had_errors || !outcome.error.empty();
    return summary;
}

// Single-obligation entry used by the prove command.
inline detail::ObligationRun prove_obligation(const ProofObligation& po, const LemmaStore* store,
                                              const PipelineConfig& cfg) {
    return detail::process_obligation(po, store, cfg);
}

}  // namespace obsel

#endif  // OBSEL_PIPELINE_HPP
