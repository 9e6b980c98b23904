// obsel/shingle.hpp — operator skeletons, depth (path) shingles, structure
// (parent-children) shingles, and pool-wide weight tables.
//
// A skeleton is the formula's operator tree after erasing identifier and
// literal leaves; child order is preserved.  Depth shingles are the length-n
// windows over root-to-leaf label paths, enumerated per tree node so windows
// in the shared prefix of sibling paths count once.  Structure shingles are
// the length-n windows over [parent, child1, ..., childm] sequences.
// Weights are inverse occurrence counts over a formula pool; shingles more
// common than the prune threshold weigh nothing.

#ifndef OBSEL_SHINGLE_HPP
#define OBSEL_SHINGLE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "obsel/errors.hpp"
#include "obsel/formula.hpp"

namespace obsel {

enum class ShingleKind : std::uint8_t { Depth, Structure };

struct Shingle {
    ShingleKind kind = ShingleKind::Depth;
    std::vector<Kind> labels;

    friend bool operator==(const Shingle& a, const Shingle& b) {
        return a.kind == b.kind && a.labels == b.labels;
    }
    friend bool operator<(const Shingle& a, const Shingle& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.labels < b.labels;
    }

    std::string to_string() const {
        std::string out = "[";
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (i) out += ',';
            out += kind_symbol(labels[i]);
        }
        out += ']';
        return out;
    }
};

using ShingleMultiset = std::map<Shingle, long long>;

struct ShingleProfile {
    ShingleMultiset depth;
    ShingleMultiset structure;
    std::uint64_t source_hash = 0;

    bool empty() const { return depth.empty() && structure.empty(); }
};

// ── Skeleton extraction ─────────────────────────────────────────────────────

struct SkeletonNode {
    Kind label{};
    std::vector<SkeletonNode> children;

    std::size_t node_count() const {
        std::size_t n = 1;
        for (const auto& c : children) n += c.node_count();
        return n;
    }
};

namespace detail {

inline bool erased_in_skeleton(Kind k) {
    switch (k) {
        case Kind::Ident:
        case Kind::IntLit:
        case Kind::Nat:
        case Kind::Int:
        case Kind::MetaVar:
            return true;
        default:
            return false;
    }
}

inline bool build_skeleton(const Formula& f, SkeletonNode& out) {
    if (erased_in_skeleton(f.kind())) return false;
    out.label = f.kind();
    out.children.clear();
    for (const auto& c : f.children()) {
        SkeletonNode child;
        if (build_skeleton(*c, child)) out.children.push_back(std::move(child));
    }
    return true;
}

}  // namespace detail

// Operator tree with identifier/literal leaves removed; quantifiers keep
// their label and drop the bound list. Throws EmptySkeletonError when the
// formula is a bare identifier or literal.
inline SkeletonNode skeleton(const FormulaPtr& f) {
    SkeletonNode root;
    if (!detail::build_skeleton(*f, root)) throw EmptySkeletonError();
    return root;
}

// ── Shingle extraction ──────────────────────────────────────────────────────

namespace detail {

inline void depth_visit(const SkeletonNode& node, std::vector<Kind>& path, std::size_t n,
                        ShingleMultiset& out) {
    path.push_back(node.label);
    if (path.size() >= n) {
        Shingle s{ShingleKind::Depth,
                  std::vector<Kind>(path.end() - static_cast<std::ptrdiff_t>(n), path.end())};
        ++out[std::move(s)];
    }
    for (const auto& c : node.children) depth_visit(c, path, n, out);
    path.pop_back();
}

inline void structure_visit(const SkeletonNode& node, std::size_t n, ShingleMultiset& out) {
    if (!node.children.empty()) {
        std::vector<Kind> seq;
        seq.reserve(node.children.size() + 1);
        seq.push_back(node.label);
        for (const auto& c : node.children) seq.push_back(c.label);
        if (seq.size() >= n) {
            for (std::size_t i = 0; i + n <= seq.size(); ++i) {
                Shingle s{ShingleKind::Structure,
                          std::vector<Kind>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                            seq.begin() + static_cast<std::ptrdiff_t>(i + n))};
                ++out[std::move(s)];
            }
        }
    }
    for (const auto& c : node.children) structure_visit(c, n, out);
}

inline void check_shingle_size(std::size_t n) {
    if (n < 2) throw Error("shingle size must be at least 2");
}

}  // namespace detail

// Windows of length n over root-to-leaf label paths; paths shorter than n
// emit nothing. Multiset semantics with windows enumerated per node, so a
// window shared by sibling paths counts once.
inline ShingleMultiset depth_shingles(const SkeletonNode& skel, std::size_t n) {
    detail::check_shingle_size(n);
    ShingleMultiset out;
    std::vector<Kind> path;
    detail::depth_visit(skel, path, n, out);
    return out;
}

// Windows of length n over [parent, children...] sequences; sequences
// shorter than n emit nothing.
inline ShingleMultiset structure_shingles(const SkeletonNode& skel, std::size_t n) {
    detail::check_shingle_size(n);
    ShingleMultiset out;
    detail::structure_visit(skel, n, out);
    return out;
}

// Both shingle multisets of a formula. A structureless formula (bare
// identifier or literal) yields an empty profile, not an error. Runtime is
// linear in the formula's node count for fixed n.
inline ShingleProfile profile(const FormulaPtr& f, std::size_t n = 3) {
    detail::check_shingle_size(n);
    ShingleProfile p;
    p.source_hash = formula_hash(f);
    SkeletonNode root;
    if (!detail::build_skeleton(*f, root)) return p;
    std::vector<Kind> path;
    detail::depth_visit(root, path, n, p.depth);
    detail::structure_visit(root, n, p.structure);
    return p;
}

// ── Weight table ────────────────────────────────────────────────────────────

struct WeightTable {
    std::map<Shingle, long long> counts;
    std::size_t pool_size = 0;
    long long prune_threshold = 1000;  // tau

    // 1/cnt for shingles at or below the prune threshold, else 0.
    double weight(const Shingle& s) const {
        auto it = counts.find(s);
        if (it == counts.end()) return 0.0;
        if (it->second > prune_threshold) return 0.0;
        return 1.0 / static_cast<double>(it->second);
    }

    // Associative, commutative merge; prune thresholds must agree.
    static WeightTable merge(const WeightTable& a, const WeightTable& b) {
        if (a.prune_threshold != b.prune_threshold)
            throw Error("cannot merge weight tables with different prune thresholds");
        WeightTable out = a;
        out.pool_size += b.pool_size;
        for (const auto& [shingle, count] : b.counts) out.counts[shingle] += count;
        return out;
    }
};

// Sums multiset multiplicities across the pool.
inline WeightTable build_weight_table(const std::vector<ShingleProfile>& pool,
                                      long long prune_threshold = 1000) {
    WeightTable t;
    t.prune_threshold = prune_threshold;
    t.pool_size = pool.size();
    for (const auto& p : pool) {
        for (const auto& [shingle, count] : p.depth) t.counts[shingle] += count;
        for (const auto& [shingle, count] : p.structure) t.counts[shingle] += count;
    }
    return t;
}

}  // namespace obsel

#endif  // OBSEL_SHINGLE_HPP
