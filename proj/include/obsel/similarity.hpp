// obsel/similarity.hpp — Jaccard similarity, weighted shingle scoring, the
// free-identifier selection baseline, and the combined candidate selection.
//
// The weighted score of two profiles is
//
//     s(P, Q) = sum of w(i) over I1  +  c * sum of w(i) over I2
//
// where I1/I2 are the set intersections of the depth/structure shingles
// retained after pruning and the per-profile cap, and w(i) = 1/cnt(i) over
// the candidate pool.  Summation runs in shingle order so scores are
// reproducible bit for bit.

#ifndef OBSEL_SIMILARITY_HPP
#define OBSEL_SIMILARITY_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <set>
#include <vector>

#include "obsel/errors.hpp"
#include "obsel/formula.hpp"
#include "obsel/shingle.hpp"

namespace obsel {

struct ScoreParams {
    double structure_coeff = 1.0;      // c
    std::size_t shingle_size = 3;      // n
    long long prune_threshold = 1000;  // tau
    std::size_t profile_cap = 64;      // K, per profile and shingle kind
    double score_threshold = 0.0;      // theta
    std::size_t max_candidates = 50;   // N
    std::size_t ident_depth = 1;       // d, free-identifier closure rounds

    void validate() const {
        if (structure_coeff < 0) throw Error("structure coefficient must be nonnegative");
        if (shingle_size < 2) throw Error("shingle size must be at least 2");
    }
};

enum class CandidateSource { Hypothesis, Lemma };
enum class SelectionRoute { FreeIdent, Structural };

struct RankedCandidate {
    std::size_t index = 0;  // into the hypothesis or lemma sequence per source
    CandidateSource source = CandidateSource::Hypothesis;
    double score = 0.0;
    SelectionRoute via = SelectionRoute::Structural;
};

// |P ∩ Q| / |P ∪ Q|. Throws UndefinedSimilarityError when both sets are
// empty (structureless inputs).
template <typename T>
double jaccard(const std::set<T>& p, const std::set<T>& q) {
    if (p.empty() && q.empty()) throw UndefinedSimilarityError();
    std::size_t inter = 0;
    for (const auto& x : p) inter += q.count(x);
    std::size_t uni = p.size() + q.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

// Distinct shingles that survive pruning, capped to the highest-weight K
// (ties broken by shingle order); returned in shingle order.
inline std::vector<Shingle> retained_shingles(const ShingleMultiset& ms, const WeightTable& w,
                                              std::size_t cap) {
    std::vector<std::pair<double, const Shingle*>> items;
    items.reserve(ms.size());
    for (const auto& [s, count] : ms) {
        double wt = w.weight(s);
        if (wt > 0.0) items.emplace_back(wt, &s);
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) {
                         if (a.first != b.first) return a.first > b.first;
                         return *a.second < *b.second;
                     });
    if (items.size() > cap) items.resize(cap);
    std::vector<Shingle> out;
    out.reserve(items.size());
    for (const auto& [wt, sp] : items) out.push_back(*sp);
    std::sort(out.begin(), out.end());
    return out;
}

inline double intersection_weight(const std::vector<Shingle>& a, const std::vector<Shingle>& b,
                                  const WeightTable& w) {
    double sum = 0.0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) ++ia;
        else if (*ib < *ia) ++ib;
        else {
            sum += w.weight(*ia);
            ++ia;
            ++ib;
        }
    }
    return sum;
}

}  // namespace detail

// Symmetric in P and Q for a fixed table. Empty intersections score 0.
inline double weighted_score(const ShingleProfile& p, const ShingleProfile& q,
                             const WeightTable& w, const ScoreParams& params) {
    auto pd = detail::retained_shingles(p.depth, w, params.profile_cap);
    auto qd = detail::retained_shingles(q.depth, w, params.profile_cap);
    auto pw = detail::retained_shingles(p.structure, w, params.profile_cap);
    auto qw = detail::retained_shingles(q.structure, w, params.profile_cap);
    return detail::intersection_weight(pd, qd, w) +
           params.structure_coeff * detail::intersection_weight(pw, qw, w);
}

// Iteratively selects hypotheses sharing a free identifier with the goal or
// with an already-selected hypothesis; depth bounds the number of rounds.
inline std::set<std::size_t> free_ident_closure(const FormulaPtr& goal,
                                                const std::vector<FormulaPtr>& hypotheses,
                                                std::size_t depth) {
    std::set<std::size_t> selected;
    std::set<std::string> reached = free_identifiers(goal);
    std::vector<std::set<std::string>> hyp_idents;
    hyp_idents.reserve(hypotheses.size());
    for (const auto& h : hypotheses) hyp_idents.push_back(free_identifiers(h));

    for (std::size_t round = 0; round < depth; ++round) {
        std::vector<std::size_t> added;
        for (std::size_t i = 0; i < hypotheses.size(); ++i) {
            if (selected.count(i)) continue;
            bool shares = std::any_of(hyp_idents[i].begin(), hyp_idents[i].end(),
                                      [&](const std::string& v) { return reached.count(v); });
            if (shares) added.push_back(i);
        }
        if (added.empty()) break;
        for (std::size_t i : added) {
            selected.insert(i);
            reached.insert(hyp_idents[i].begin(), hyp_idents[i].end());
        }
    }
    return selected;
}

// Union of the free-identifier closure (hypotheses only) and the top-N
// structurally scored candidates over hypotheses and lemma bodies, with the
// weight table built over that candidate pool.  Output sorted by score
// descending, ties by candidate ordinal ascending.
inline std::vector<RankedCandidate> select(const FormulaPtr& goal,
                                           const std::vector<FormulaPtr>& hypotheses,
                                           const std::vector<FormulaPtr>& lemma_bodies,
                                           const ScoreParams& params) {
    params.validate();
    const std::size_t hyp_count = hypotheses.size();
    const std::size_t total = hyp_count + lemma_bodies.size();

    std::vector<ShingleProfile> pool;
    pool.reserve(total);
    for (const auto& h : hypotheses) pool.push_back(profile(h, params.shingle_size));
    for (const auto& l : lemma_bodies) pool.push_back(profile(l, params.shingle_size));
    WeightTable table = build_weight_table(pool, params.prune_threshold);
    ShingleProfile goal_profile = profile(goal, params.shingle_size);

    std::vector<double> scores(total);
    for (std::size_t i = 0; i < total; ++i)
        scores[i] = weighted_score(goal_profile, pool[i], table, params);

    std::set<std::size_t> closure = free_ident_closure(goal, hypotheses, params.ident_depth);

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::set<std::size_t> chosen(closure.begin(), closure.end());
    std::size_t structural_taken = 0;
    for (std::size_t ordinal : order) {
        if (structural_taken >= params.max_candidates) break;
        if (scores[ordinal] < params.score_threshold) break;  // order is by score
        ++structural_taken;
        chosen.insert(ordinal);
    }

    std::vector<RankedCandidate> out;
    out.reserve(chosen.size());
    for (std::size_t ordinal : chosen) {
        RankedCandidate c;
        c.source = ordinal < hyp_count ? CandidateSource::Hypothesis : CandidateSource::Lemma;
        c.index = ordinal < hyp_count ? ordinal : ordinal - hyp_count;
        c.score = scores[ordinal];
        c.via = (ordinal < hyp_count && closure.count(ordinal)) ? SelectionRoute::FreeIdent
                                                                : SelectionRoute::Structural;
        out.push_back(c);
    }
    std::stable_sort(out.begin(), out.end(), [&](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        std::size_t oa = (a.source == CandidateSource::Hypothesis ? a.index : hyp_count + a.index);
        std::size_t ob = (b.source == CandidateSource::Hypothesis ? b.index : hyp_count + b.index);
        return oa < ob;
    });
    return out;
}

}  // namespace obsel

#endif  // OBSEL_SIMILARITY_HPP
