#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ebsp/alphabet.hpp"
#include "ebsp/automaton.hpp"
#include "ebsp/composition.hpp"
#include "ebsp/error.hpp"
#include "ebsp/evaluate.hpp"
#include "ebsp/optree.hpp"

namespace ebsp {

/// Counters and certificate flags of one reduction run.
struct ReductionReport {
    std::size_t input_nodes = 0, output_nodes = 0;
    std::size_t input_height = 0, output_height = 0;
    std::size_t input_degree = 0, output_degree = 0;
    std::size_t height_steps = 0, degree_steps = 0, passes = 0;
    /// Distinct eligible (δ1, δ2) keys and prefix keys realized at the end:
    /// the run's empirical η1, η2.
    std::size_t eta1 = 0, eta2 = 0;
    bool accepted = false;
    bool delta1_preserved = false;
};

namespace detail {

struct TripleHash {
    std::size_t operator()(const std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>& k) const noexcept {
        auto [a, b, c] = k;
        std::uint64_t h = a * 0x9E3779B97F4A7C15ull;
        h ^= b + 0x632BE59BD9B4E019ull + (h << 6) + (h >> 2);
        h ^= c + 0x94D049BB133111EBull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};
using Triple = std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>;

/// Protected nodes (by key) in each subtree, counting the node itself.
inline std::vector<std::size_t> protected_counts(const OpTree& t, const std::unordered_set<std::uint64_t>& prot) {
    std::vector<std::size_t> pc(t.size(), 0);
    for (std::size_t v = t.size(); v-- > 0;) {
        pc[v] = prot.count(t[v].key) ? 1 : 0;
        for (auto c : t[v].children) pc[v] += pc[c];
    }
    return pc;
}

inline void check_accepted(const Annotation& ann, const TreeAutomaton& aut) {
    if (!aut.accepting(ann.delta2.at(0))) throw RejectedTreeError("tree is not accepted by the automaton");
}

inline void check_shape(const OpTree& t, const Alphabet& alpha) {
    for (std::size_t v = 0; v < t.size(); ++v) {
        if (t[v].is_leaf()) continue;
        const auto& op = alpha.op(t[v].symbol.index);
        if (!op.ranked && op.rho > 2)
            throw UnsupportedShapeError("degree reduction supports unranked ops of base rank 2 only; '" + op.name +
                                        "' has rank " + std::to_string(op.rho) + " (at " + to_string(t.address_of(v)) + ")");
    }
}

/// Rebuilds `t` in preorder, following `replace` (node -> node standing in
/// for it) and keeping only the children listed in `keep` when present.
inline OpTree rebuild(const OpTree& t, const std::vector<std::size_t>& replace,
                      const std::unordered_map<std::size_t, std::vector<std::size_t>>& keep) {
    std::vector<TreeNode> out;
    out.reserve(t.size());
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, SIZE_MAX}};
    while (!stack.empty()) {
        auto [v, parent] = stack.back();
        stack.pop_back();
        while (replace[v] != SIZE_MAX) v = replace[v];
        const std::size_t at = out.size();
        out.push_back({t[v].symbol, {}, t[v].key});
        if (parent != SIZE_MAX) out[parent].children.push_back(at);
        auto it = keep.find(v);
        const auto& ch = it == keep.end() ? t[v].children : it->second;
        for (auto c = ch.rbegin(); c != ch.rend(); ++c) stack.push_back({*c, at});
    }
    return OpTree::from_nodes(std::move(out), t.next_key());
}

/// One height pass. For nodes a in preorder, b is the deepest descendant
/// with the same (δ1, δ2) and the same protected count (so the discarded
/// region holds no protected node); t_{≥a} is replaced by t_{≥b}.
inline std::optional<OpTree> height_pass(const OpTree& t, const Annotation& ann, const std::vector<std::size_t>& pc,
                                         std::size_t& steps) {
    const std::size_t n = t.size();
    const auto sizes = t.subtree_sizes();
    const auto depth = t.depths();
    std::unordered_map<Triple, std::uint32_t, TripleHash> bucketOf;
    std::vector<std::uint32_t> bucket(n);
    for (std::size_t v = 0; v < n; ++v) {
        Triple k{ann.delta1[v], static_cast<std::uint64_t>(ann.delta2[v] + 1), pc[v]};
        auto [it, fresh] = bucketOf.emplace(k, static_cast<std::uint32_t>(bucketOf.size()));
        bucket[v] = it->second;
    }
    const std::size_t B = bucketOf.size();
    if (B == n) return std::nullopt;  // all keys distinct
    // nodes grouped by bucket, preorder within a bucket (counting sort)
    std::vector<std::size_t> start(B + 1, 0);
    for (auto b : bucket) ++start[b + 1];
    for (std::size_t b = 0; b < B; ++b) start[b + 1] += start[b];
    std::vector<std::size_t> order(n), fill(start.begin(), start.end() - 1);
    for (std::size_t v = 0; v < n; ++v) order[fill[bucket[v]]++] = v;
    // sparse table of the deepest node (earliest in preorder on ties)
    auto better = [&](std::size_t x, std::size_t y) {
        if (depth[x] != depth[y]) return depth[x] > depth[y] ? x : y;
        return std::min(x, y);
    };
    std::vector<std::vector<std::size_t>> table{order};
    for (std::size_t w = 1; 2 * w <= n; w *= 2) {
        const auto& prev = table.back();
        std::vector<std::size_t> next(n - 2 * w + 1);
        for (std::size_t i = 0; i + 2 * w <= n; ++i) next[i] = better(prev[i], prev[i + w]);
        table.push_back(std::move(next));
    }
    auto deepest = [&](std::size_t lo, std::size_t hi) {  // positions [lo, hi)
        std::size_t len = hi - lo, lvl = 0;
        while ((std::size_t{2} << lvl) <= len) ++lvl;
        return better(table[lvl][lo], table[lvl][hi - (std::size_t{1} << lvl)]);
    };

    std::vector<std::size_t> replace(n, SIZE_MAX);
    std::vector<std::pair<std::size_t, std::size_t>> pending;  // (end of b's subtree, end of a's subtree)
    std::size_t i = 0;
    bool changed = false;
    while (true) {
        while (!pending.empty() && i >= pending.back().first) {
            i = std::max(i, pending.back().second);
            pending.pop_back();
        }
        if (i >= n) break;
        const std::size_t a = i;
        const auto b0 = bucket[a];
        auto first = order.begin() + static_cast<std::ptrdiff_t>(start[b0]);
        auto last = order.begin() + static_cast<std::ptrdiff_t>(start[b0 + 1]);
        auto lo = std::upper_bound(first, last, a);
        auto hi = std::lower_bound(lo, last, a + sizes[a]);
        if (lo == hi) {
            ++i;
            continue;
        }
        const std::size_t b = deepest(static_cast<std::size_t>(lo - order.begin()), static_cast<std::size_t>(hi - order.begin()));
        replace[a] = b;
        ++steps;
        changed = true;
        pending.push_back({b + sizes[b], a + sizes[a]});
        i = b;
    }
    if (!changed) return std::nullopt;
    return rebuild(t, replace, {});
}

/// One degree pass over every unranked rank-2 node: at prefix length l the
/// children up to the last prefix with the same (χ, horizontal state,
/// protected count) are dropped.
inline std::optional<OpTree> degree_pass(const OpTree& t, const Alphabet& alpha, const Annotation& ann,
                                         const std::vector<std::size_t>& pc, std::size_t& steps) {
    std::unordered_map<std::size_t, std::vector<std::size_t>> keep;
    std::unordered_map<Triple, std::size_t, TripleHash> lastAt;
    std::vector<std::size_t> prefixPc;
    for (std::size_t v = 0; v < t.size(); ++v) {
        const auto& node = t[v];
        if (node.is_leaf() || alpha.op(node.symbol.index).ranked) continue;
        const auto& ch = node.children;
        const std::size_t n = ch.size();
        if (n < 3) continue;
        prefixPc.assign(n + 1, 0);
        for (std::size_t l = 1; l <= n; ++l) prefixPc[l] = prefixPc[l - 1] + pc[ch[l - 1]];
        auto key = [&](std::size_t l) {
            return Triple{ann.prefix[v][l], static_cast<std::uint64_t>(ann.hstate[v][l] + 1), prefixPc[l]};
        };
        lastAt.clear();
        for (std::size_t l = 2; l <= n; ++l) lastAt[key(l)] = l;
        std::vector<std::size_t> kept{ch[0], ch[1]};
        std::size_t l = 2;
        bool cut = false;
        while (true) {
            std::size_t k = lastAt[key(l)];
            if (k > l) {
                ++steps;
                cut = true;
                l = k;
            }
            if (l == n) break;
            kept.push_back(ch[l]);
            ++l;
        }
        if (cut) keep.emplace(v, std::move(kept));
    }
    if (keep.empty()) return std::nullopt;
    return rebuild(t, std::vector<std::size_t>(t.size(), SIZE_MAX), keep);
}

inline std::pair<std::size_t, std::size_t> realized_classes(const OpTree& t, const Alphabet& alpha, const Annotation& ann,
                                                             const std::vector<std::size_t>& pc) {
    std::unordered_set<Triple, TripleHash> nodes, prefixes;
    for (std::size_t v = 0; v < t.size(); ++v) {
        nodes.insert({ann.delta1[v], static_cast<std::uint64_t>(ann.delta2[v] + 1), pc[v]});
        if (t[v].is_leaf() || alpha.op(t[v].symbol.index).ranked) continue;
        std::size_t p = 0;
        const auto& ch = t[v].children;
        for (std::size_t l = 1; l <= ch.size(); ++l) {
            p += pc[ch[l - 1]];
            if (l >= 2) prefixes.insert({ann.prefix[v][l], static_cast<std::uint64_t>(ann.hstate[v][l] + 1), p});
        }
    }
    return {nodes.size(), prefixes.size()};
}

}  // namespace detail

struct ReduceResult {
    OpTree tree;
    ReductionReport report;
};

enum class ReduceMode { Height, Degree, Both };

/// Height and/or degree reduction to a fixpoint. `protectedKeys` are node
/// keys whose subtrees must never be discarded.
inline ReduceResult reduce_tree(const OpTree& t, Composer& comp, const TreeAutomaton& aut, ReduceMode mode,
                                const std::unordered_set<std::uint64_t>& protectedKeys = {}) {
    const auto& alpha = comp.alphabet();
    t.validate(alpha);
    if (mode != ReduceMode::Height) detail::check_shape(t, alpha);
    for (auto k : protectedKeys)
        if (!t.find_key(k)) throw DomainError("protected node key " + std::to_string(k) + " is not in the tree");
    ReduceResult r{t, {}};
    auto& rep = r.report;
    rep.input_nodes = t.size();
    rep.input_height = t.height();
    rep.input_degree = t.max_degree();
    auto ann = annotate(t, comp, aut);
    detail::check_accepted(ann, aut);
    const TypeId root = ann.root();
    while (true) {
        ++rep.passes;
        auto pc = detail::protected_counts(r.tree, protectedKeys);
        std::optional<OpTree> next;
        if (mode != ReduceMode::Degree) next = detail::height_pass(r.tree, ann, pc, rep.height_steps);
        if (!next && mode != ReduceMode::Height) next = detail::degree_pass(r.tree, alpha, ann, pc, rep.degree_steps);
        if (!next) {
            auto [e1, e2] = detail::realized_classes(r.tree, alpha, ann, pc);
            rep.eta1 = e1;
            rep.eta2 = e2;
            break;
        }
        r.tree = std::move(*next);
        ann = annotate(r.tree, comp, aut);
    }
    rep.output_nodes = r.tree.size();
    rep.output_height = r.tree.height();
    rep.output_degree = r.tree.max_degree();
    rep.accepted = aut.accepting(ann.delta2[0]);
    rep.delta1_preserved = ann.root() == root;
    return r;
}

inline ReduceResult height_reduce(const OpTree& t, Composer& comp, const TreeAutomaton& aut,
                                  const std::unordered_set<std::uint64_t>& protectedKeys = {}) {
    return reduce_tree(t, comp, aut, ReduceMode::Height, protectedKeys);
}

inline ReduceResult degree_reduce(const OpTree& t, Composer& comp, const TreeAutomaton& aut,
                                  const std::unordered_set<std::uint64_t>& protectedKeys = {}) {
    return reduce_tree(t, comp, aut, ReduceMode::Degree, protectedKeys);
}

// ---------------------------------------------------------------------------
// Postcondition checks (used by reports and tests)
// ---------------------------------------------------------------------------

/// No root-to-leaf path carries two nodes with equal (δ1, δ2) and equal
/// protected count.
inline bool height_fixpoint(const OpTree& t, const Annotation& ann, const std::unordered_set<std::uint64_t>& prot = {}) {
    auto pc = detail::protected_counts(t, prot);
    std::unordered_map<detail::Triple, std::size_t, detail::TripleHash> onPath;
    // iterative DFS with enter/exit events
    std::vector<std::pair<std::size_t, bool>> stack{{0, true}};
    while (!stack.empty()) {
        auto [v, enter] = stack.back();
        stack.pop_back();
        detail::Triple k{ann.delta1[v], static_cast<std::uint64_t>(ann.delta2[v] + 1), pc[v]};
        if (!enter) {
            if (--onPath[k] == 0) onPath.erase(k);
            continue;
        }
        if (onPath[k]++ > 0) return false;
        stack.push_back({v, false});
        for (auto c : t[v].children) stack.push_back({c, true});
    }
    return true;
}

/// Every unranked node's eligible prefix keys are pairwise distinct.
inline bool degree_fixpoint(const OpTree& t, const Alphabet& alpha, const Annotation& ann,
                            const std::unordered_set<std::uint64_t>& prot = {}) {
    auto pc = detail::protected_counts(t, prot);
    for (std::size_t v = 0; v < t.size(); ++v) {
        if (t[v].is_leaf() || alpha.op(t[v].symbol.index).ranked) continue;
        std::set<detail::Triple> seen;
        std::size_t p = 0;
        const auto& ch = t[v].children;
        for (std::size_t l = 1; l <= ch.size(); ++l) {
            p += pc[ch[l - 1]];
            if (l < 2) continue;
            if (!seen.insert({ann.prefix[v][l], static_cast<std::uint64_t>(ann.hstate[v][l] + 1), p}).second) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Conditions (i)-(v) of an equivalent bounded substructure.
struct KernelCertificate {
    bool accepted = false;          // (i) built by an accepted tree
    bool substructure = false;      // (ii) induced substructure, by element id
    bool contains_w = false;        // (iii)
    bool within_bound = false;      // (iv) |B| <= witness bound of the run
    bool delta1_preserved = false;  // (v) compositional
    bool oracle_checked = false;    // (v) by the oracle, when |A| fits the cap
    bool oracle_equal = false;
    double witness_bound = 0;
    std::size_t size_a = 0, size_b = 0;

    bool ok() const {
        return accepted && substructure && contains_w && within_bound && delta1_preserved &&
               (!oracle_checked || oracle_equal);
    }
};

struct KernelResult {
    Structure kernel;  // over the original vocabulary
    OpTree tree;       // reduced tree over `alphabet`
    std::shared_ptr<const Alphabet> alphabet;  // input alphabet plus marked clones
    KernelCertificate certificate;
    ReductionReport report;
};

struct KernelOptions {
    OracleLimits limits;
    /// Check (v) with the oracle when |A| fits the cap.
    bool oracle = true;
    /// Reused for unmarked runs (W empty) when it matches the alphabet, rank and logic.
    Composer* composer = nullptr;
};

namespace detail {

inline std::string mark_name(std::size_t i) { return "_w" + std::to_string(i + 1); }

/// Drops relations the target vocabulary lacks.
inline Structure reduct(const Structure& s, const VocabularyPtr& voc) {
    StructureBuilder b(voc);
    for (std::size_t i = 0; i < s.size(); ++i) b.add_element(s.id(i), s.label(i));
    for (std::size_t r = 0; r < s.relation_count(); ++r) {
        auto t = voc->find(s.vocabulary().relations()[r].name);
        if (!t) continue;
        for (std::size_t k = 0; k < s.relation(r).size(); ++k) b.add_tuple(*t, s.relation(r).tuple(k));
    }
    return std::move(b).build();
}

/// Marked copy of `alpha` and `t`: the node introducing the i-th element of
/// W gets a clone of its symbol whose structure carries the unary relation
/// _w<i> on that element. Returns the marked alphabet, tree and node keys.
inline std::tuple<std::shared_ptr<const Alphabet>, OpTree, std::unordered_set<std::uint64_t>>
mark_elements(const OpTree& t, const Alphabet& alpha, const Evaluation& ev, const ElementSet& w) {
    if (w.empty()) return {std::make_shared<const Alphabet>(alpha), t, {}};
    std::map<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>> marks;  // node -> (local, mark)
    std::size_t i = 0;
    for (auto e : w) {
        auto node = ev.provenance(e);
        if (!node) throw DomainError("kernelize: element " + std::to_string(e.value) + " has no provenance");
        const auto local = static_cast<std::size_t>(e.value & 0xFFFF);
        marks[*node].push_back({local, i++});
    }
    std::vector<LeafSymbol> leaves = alpha.leaves();
    std::vector<OpSymbol> ops = alpha.ops();
    std::vector<TreeNode> nodes;
    for (std::size_t v = 0; v < t.size(); ++v) nodes.push_back(t[v]);
    std::unordered_set<std::uint64_t> prot;
    for (auto& [v, list] : marks) {
        auto& node = nodes[v];
        prot.insert(node.key);
        const std::string suffix = "@" + std::to_string(node.key);
        if (node.is_leaf()) {
            const auto& src = alpha.leaf(node.symbol.index);
            auto voc = src.structure.vocabulary_ptr();
            for (auto& [local, mark] : list) voc = std::make_shared<const Vocabulary>(voc->with_relation({mark_name(mark), 1}));
            StructureBuilder b(voc);
            copy_into(b, *voc, src.structure, 0);
            for (auto& [local, mark] : list) b.add_tuple(voc->index_of(mark_name(mark)), {static_cast<std::uint32_t>(local)});
            leaves.push_back({src.name + suffix, std::move(b).build(), src.base});
            node.symbol = SymbolRef{true, leaves.size() - 1};
        } else {
            auto op = alpha.op(node.symbol.index);
            if (list.size() != 1 || op.kind.tag != OpKind::Tag::TreeBuild || !op.kind.root_mark.empty())
                throw DomainError("kernelize: cannot mark elements introduced by '" + op.name + "'");
            op.kind.root_mark = mark_name(list[0].second);
            op.name += suffix;
            ops.push_back(std::move(op));
            node.symbol = SymbolRef{false, ops.size() - 1};
        }
    }
    auto marked = std::make_shared<const Alphabet>(std::move(leaves), std::move(ops), alpha.vocabulary()->label_count());
    return {marked, OpTree::from_nodes(std::move(nodes), t.next_key()), prot};
}

/// Size bound implied by the realized key counts: height below eta1 and
/// degree at most eta2 + 1.
inline double witness_bound(const Alphabet& alpha, std::size_t eta1, std::size_t eta2) {
    std::size_t maxLeaf = 1, maxIntro = 0;
    for (auto& l : alpha.leaves()) maxLeaf = std::max(maxLeaf, l.structure.size());
    for (auto& o : alpha.ops()) maxIntro = std::max(maxIntro, o.kind.introduced());
    std::size_t maxRank = 1;
    for (auto& o : alpha.ops()) maxRank = std::max(maxRank, static_cast<std::size_t>(o.rho));
    const double degree = static_cast<double>(std::max(eta2 + 1, maxRank));
    const double height = static_cast<double>(eta1 > 0 ? eta1 - 1 : 0);
    const double leaves = std::pow(degree, height);
    return leaves * static_cast<double>(maxLeaf) + leaves * static_cast<double>(maxIntro);
}

}  // namespace detail

/// EBSP kernel: B ⊆ Str(t) with W ⊆ B, B built by an accepted tree and
/// B ≡m Str(t) (in the expansion marking W).
inline KernelResult kernelize(const OpTree& t, const Alphabet& alpha, int m, LogicMode mode, const TreeAutomaton& aut,
                              const ElementSet& w = {}, const KernelOptions& opt = {}) {
    t.validate(alpha);
    auto ev = evaluate(t, alpha);
    for (auto e : w)
        if (!ev.structure.contains(e)) throw DomainError("kernelize: W contains an element outside Str(t)");
    auto [marked, mt, prot] = detail::mark_elements(t, alpha, ev, w);
    std::optional<Composer> own;
    Composer* comp = opt.composer;
    if (!comp || !w.empty() || &comp->alphabet() != &alpha || comp->rank() != m || comp->mode() != mode) {
        own.emplace(*marked, m, mode, opt.limits);
        comp = &*own;
    }
    const Alphabet& ma = comp->alphabet();
    auto reduced = reduce_tree(mt, *comp, aut, ReduceMode::Both, prot);

    KernelResult res;
    res.alphabet = marked;
    res.report = reduced.report;
    auto& cert = res.certificate;
    auto markedB = evaluate(reduced.tree, ma).structure;
    res.kernel = detail::reduct(markedB, alpha.vocabulary());
    res.tree = std::move(reduced.tree);
    cert.accepted = reduced.report.accepted;
    cert.substructure = is_induced_substructure_by_id(res.kernel, ev.structure);
    cert.contains_w = std::all_of(w.begin(), w.end(), [&](ElementId e) { return res.kernel.contains(e); });
    cert.size_a = ev.structure.size();
    cert.size_b = res.kernel.size();
    cert.witness_bound = detail::witness_bound(ma, reduced.report.eta1, reduced.report.eta2);
    cert.within_bound = static_cast<double>(cert.size_b) <= cert.witness_bound;
    cert.delta1_preserved = reduced.report.delta1_preserved;
    if (opt.oracle && cert.size_a <= oracle_cap(mode, opt.limits)) {
        auto markedA = evaluate(mt, ma).structure;
        cert.oracle_checked = true;
        cert.oracle_equal = type_of(markedA, m, mode, opt.limits) == type_of(markedB, m, mode, opt.limits);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

enum class ScaleDirection { Up, Down, Auto };

struct ScaleRequest {
    int m = 1;
    LogicMode mode = LogicMode::FO;
    std::size_t lo = 1, hi = 1;
    ScaleDirection direction = ScaleDirection::Auto;
};

struct ScaleReport {
    std::size_t input_size = 0, output_size = 0;
    std::size_t input_nodes = 0, output_nodes = 0;
    std::size_t steps = 0;
    /// Smallest size change among the moves found at the start.
    std::size_t granularity = 0;
    std::vector<std::size_t> increments;  // size change of each applied move
    ScaleDirection direction = ScaleDirection::Auto;
    bool accepted = false;
    bool delta1_preserved = false;
    bool embedding = false;  // Str(t) ⊆ Str(t') when growing, the converse when shrinking
    bool oracle_checked = false, oracle_equal = false;

    bool ok() const { return accepted && delta1_preserved && embedding && (!oracle_checked || oracle_equal); }
};

struct ScaleResult {
    OpTree tree;
    ScaleReport report;
};

namespace detail {

/// A size-changing move. Vertical: nodes a above b with equal (δ1, δ2).
/// Horizontal: at `node`, children l+1..k (1-based) with equal prefix keys
/// at l and k.
struct Move {
    bool vertical = true;
    std::size_t a = 0, b = 0;
    std::size_t node = 0, l = 0, k = 0;
    std::size_t delta = 0;
};

inline std::vector<std::size_t> element_counts(const OpTree& t, const Alphabet& alpha) {
    std::vector<std::size_t> n(t.size(), 0);
    for (std::size_t v = t.size(); v-- > 0;) {
        if (t[v].is_leaf()) {
            n[v] = alpha.leaf(t[v].symbol.index).structure.size();
            continue;
        }
        n[v] = alpha.op(t[v].symbol.index).kind.introduced();
        for (auto c : t[v].children) n[v] += n[c];
    }
    return n;
}

/// Nearest equal-pair ancestor of every node, and nearest equal prefix key
/// to the right of every prefix position.
inline std::vector<Move> find_moves(const OpTree& t, const Alphabet& alpha, const Annotation& ann) {
    const auto size = element_counts(t, alpha);
    std::vector<Move> moves;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> onPath;
    auto pairKey = [&](std::size_t v) { return (std::uint64_t{ann.delta1[v]} << 32) | static_cast<std::uint32_t>(ann.delta2[v]); };
    std::vector<std::pair<std::size_t, bool>> stack{{0, true}};
    while (!stack.empty()) {
        auto [v, enter] = stack.back();
        stack.pop_back();
        auto& path = onPath[pairKey(v)];
        if (!enter) {
            path.pop_back();
            continue;
        }
        if (!path.empty() && size[path.back()] > size[v]) {
            Move mv;
            mv.a = path.back();
            mv.b = v;
            mv.delta = size[mv.a] - size[v];
            moves.push_back(mv);
        }
        path.push_back(v);
        stack.push_back({v, false});
        const auto& ch = t[v].children;
        for (auto c = ch.rbegin(); c != ch.rend(); ++c) stack.push_back({*c, true});
    }
    std::unordered_map<std::uint64_t, std::size_t> seen;
    for (std::size_t v = 0; v < t.size(); ++v) {
        if (t[v].is_leaf() || alpha.op(t[v].symbol.index).ranked) continue;
        const auto& ch = t[v].children;
        std::vector<std::size_t> acc(ch.size() + 1, 0);
        for (std::size_t i = 0; i < ch.size(); ++i) acc[i + 1] = acc[i] + size[ch[i]];
        seen.clear();
        for (std::size_t l = 1; l <= ch.size(); ++l) {
            if (ann.prefix[v][l] == kNoType) continue;
            const std::uint64_t key = (std::uint64_t{ann.prefix[v][l]} << 32) | static_cast<std::uint32_t>(ann.hstate[v][l]);
            auto [it, fresh] = seen.emplace(key, l);
            if (!fresh) {
                if (acc[l] > acc[it->second]) {
                    Move mv;
                    mv.vertical = false;
                    mv.node = v;
                    mv.l = it->second;
                    mv.k = l;
                    mv.delta = acc[l] - acc[it->second];
                    moves.push_back(mv);
                }
                it->second = l;
            }
        }
    }
    return moves;
}

/// Copies `t` with one move applied upward: C[t≥b] becomes C[C[t≥b]], or
/// the block l+1..k is repeated once. Copies get fresh keys; original
/// nodes keep theirs.
inline OpTree pump(const OpTree& t, const Move& mv) {
    std::vector<TreeNode> out;
    out.reserve(t.size() * 2);
    std::uint64_t next = t.next_key();
    struct Item {
        std::size_t v, parent;
        bool fresh;
        int subst;  // vertical: 0 before the hole, 1 inside the copied context, 2 done
    };
    std::vector<Item> stack{{0, SIZE_MAX, false, 0}};
    while (!stack.empty()) {
        auto it = stack.back();
        stack.pop_back();
        if (mv.vertical && it.v == mv.b && it.subst < 2) {
            it = it.subst == 0 ? Item{mv.a, it.parent, true, 1} : Item{mv.b, it.parent, false, 2};
        }
        const auto& node = t[it.v];
        const std::size_t at = out.size();
        out.push_back({node.symbol, {}, it.fresh ? next++ : node.key});
        if (it.parent != SIZE_MAX) out[it.parent].children.push_back(at);
        std::vector<Item> kids;
        for (auto c : node.children) kids.push_back({c, at, it.fresh, it.subst});
        if (!mv.vertical && it.v == mv.node && !it.fresh) {
            std::vector<Item> block(kids.begin() + static_cast<std::ptrdiff_t>(mv.l), kids.begin() + static_cast<std::ptrdiff_t>(mv.k));
            for (auto& b : block) b.fresh = true;
            kids.insert(kids.begin() + static_cast<std::ptrdiff_t>(mv.k), block.begin(), block.end());
        }
        for (auto c = kids.rbegin(); c != kids.rend(); ++c) stack.push_back(*c);
    }
    return OpTree::from_nodes(std::move(out), next);
}

inline OpTree cut(const OpTree& t, const Move& mv) {
    std::vector<std::size_t> replace(t.size(), SIZE_MAX);
    std::unordered_map<std::size_t, std::vector<std::size_t>> keep;
    if (mv.vertical) {
        replace[mv.a] = mv.b;
    } else {
        auto ch = t[mv.node].children;
        ch.erase(ch.begin() + static_cast<std::ptrdiff_t>(mv.l), ch.begin() + static_cast<std::ptrdiff_t>(mv.k));
        keep.emplace(mv.node, std::move(ch));
    }
    return rebuild(t, replace, keep);
}

/// Size changes in [need_lo, need_hi] reachable from `deltas`, each usable
/// any number of times (`unbounded`) or once. Returns the plan (multiset
/// of indices into deltas) for the smallest reachable change, or nullopt.
inline std::optional<std::vector<std::size_t>> plan_moves(const std::vector<std::size_t>& deltas, std::size_t needLo,
                                                          std::size_t needHi, bool unbounded,
                                                          std::vector<std::size_t>* reachable) {
    std::vector<std::size_t> from(needHi + 1, SIZE_MAX), coin(needHi + 1, SIZE_MAX);
    from[0] = 0;
    std::vector<char> ok(needHi + 1, 0);
    ok[0] = 1;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const auto d = deltas[i];
        if (d == 0 || d > needHi) continue;
        if (unbounded) {
            for (std::size_t x = d; x <= needHi; ++x)
                if (!ok[x] && ok[x - d]) ok[x] = 1, from[x] = x - d, coin[x] = i;
        } else {
            for (std::size_t x = needHi; x >= d; --x)
                if (!ok[x] && ok[x - d]) ok[x] = 1, from[x] = x - d, coin[x] = i;
        }
    }
    if (reachable)
        for (std::size_t x = 0; x <= needHi; ++x)
            if (ok[x]) reachable->push_back(x);
    for (std::size_t x = needLo; x <= needHi; ++x) {
        if (!ok[x]) continue;
        std::vector<std::size_t> plan;
        for (std::size_t y = x; y != 0; y = from[y]) plan.push_back(coin[y]);
        return plan;
    }
    return std::nullopt;
}

}  // namespace detail

/// Moves t to a tree of the same root δ1 and automaton state whose
/// structure size lies in [lo, hi]: upward by pumping equal-pair contexts
/// and prefix blocks, downward by cutting them.
inline ScaleResult scale_generate(const OpTree& t, Composer& comp, const TreeAutomaton& aut, const ScaleRequest& req,
                                  const KernelOptions& opt = {}) {
    if (req.lo < 1 || req.lo > req.hi) throw DomainError("scale: need 1 <= lo <= hi");
    if (comp.rank() != req.m || comp.mode() != req.mode) throw DomainError("scale: composer rank or logic differs from the request");
    const auto& alpha = comp.alphabet();
    t.validate(alpha);
    ScaleResult r{t, {}};
    auto& rep = r.report;
    auto ann = annotate(t, comp, aut);
    detail::check_accepted(ann, aut);
    const TypeId root = ann.root();
    const int rootState = ann.delta2[0];
    rep.input_nodes = t.size();
    std::size_t size = detail::element_counts(t, alpha)[0];
    rep.input_size = size;
    bool up = size < req.lo;
    if (req.direction == ScaleDirection::Up && size > req.hi)
        throw InfeasibleError("scale: structure has " + std::to_string(size) + " elements, above the interval, and direction is up", {size});
    if (req.direction == ScaleDirection::Down && size < req.lo)
        throw InfeasibleError("scale: structure has " + std::to_string(size) + " elements, below the interval, and direction is down", {size});
    rep.direction = size >= req.lo && size <= req.hi ? req.direction : (up ? ScaleDirection::Up : ScaleDirection::Down);
    bool first = true;
    while (size < req.lo || size > req.hi) {
        auto moves = detail::find_moves(r.tree, alpha, ann);
        if (moves.empty()) throw InfeasibleError("scale: no pumpable repeat found", {size});
        std::vector<std::size_t> deltas;
        for (auto& mv : moves) deltas.push_back(mv.delta);
        if (first) {
            rep.granularity = *std::min_element(deltas.begin(), deltas.end());
            first = false;
        }
        const std::size_t needLo = up ? req.lo - size : size - req.hi;
        const std::size_t needHi = up ? req.hi - size : size - req.lo;
        std::vector<std::size_t> reach;
        auto plan = detail::plan_moves(deltas, needLo, needHi, up, &reach);
        if (!plan) {
            std::vector<std::size_t> sizes;
            for (auto x : reach) sizes.push_back(up ? size + x : size - x);
            std::sort(sizes.begin(), sizes.end());
            throw InfeasibleError("scale: no combination of moves (granularity " + std::to_string(rep.granularity) +
                                      ") reaches [" + std::to_string(req.lo) + ", " + std::to_string(req.hi) + "]",
                                  std::move(sizes));
        }
        // apply the largest planned move, then look again
        std::size_t best = (*plan)[0];
        for (auto i : *plan)
            if (deltas[i] > deltas[best]) best = i;
        const auto& mv = moves[best];
        r.tree = up ? detail::pump(r.tree, mv) : detail::cut(r.tree, mv);
        size = up ? size + mv.delta : size - mv.delta;
        rep.increments.push_back(mv.delta);
        ++rep.steps;
        ann = annotate(r.tree, comp, aut);
    }
    rep.output_nodes = r.tree.size();
    rep.output_size = size;
    rep.accepted = aut.accepting(ann.delta2[0]) && ann.delta2[0] == rootState;
    rep.delta1_preserved = ann.root() == root;
    auto before = evaluate(t, alpha).structure;
    auto after = evaluate(r.tree, alpha).structure;
    rep.embedding = up || rep.steps == 0 ? is_induced_substructure_by_id(before, after)
                                         : is_induced_substructure_by_id(after, before);
    if (opt.oracle && std::max(before.size(), after.size()) <= oracle_cap(req.mode, opt.limits)) {
        rep.oracle_checked = true;
        rep.oracle_equal = type_of(before, req.m, req.mode, opt.limits) == type_of(after, req.m, req.mode, opt.limits);
    }
    return r;
}

}  // namespace ebsp
