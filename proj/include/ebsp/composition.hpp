#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ebsp/alphabet.hpp"
#include "ebsp/automaton.hpp"
#include "ebsp/corpus.hpp"
#include "ebsp/embedding.hpp"
#include "ebsp/evaluate.hpp"
#include "ebsp/error.hpp"
#include "ebsp/optree.hpp"
#include "ebsp/types.hpp"

namespace ebsp {

/// Index of an interned fingerprint inside one Composer.
using TypeId = std::uint32_t;
inline constexpr TypeId kNoType = ~TypeId{0};

/// Lazily realized composition functions f_{m,O} for every op of an
/// alphabet. Each type that occurs is stored with a representative
/// structure; a table miss applies the op to representatives and asks the
/// oracle for the type of the (small) result.
class Composer {
public:
    enum class Step : std::uint32_t { Base = 0, Fold = 1, Finish = 2 };

    Composer(const Alphabet& alpha, int m, LogicMode mode, OracleLimits limits = {})
        : alpha_(&alpha), m_(m), mode_(mode), limits_(limits) {
        if (m < 0) throw DomainError("composer: negative rank");
        if (mode == LogicMode::MSO && m > limits.mso_max_rank)
            throw BudgetError("composer: MSO rank " + std::to_string(m) + " above cap " +
                              std::to_string(limits.mso_max_rank));
    }

    const Alphabet& alphabet() const { return *alpha_; }
    int rank() const { return m_; }
    LogicMode mode() const { return mode_; }
    const OracleLimits& limits() const { return limits_; }

    std::size_t type_count() const { return types_.size(); }
    std::size_t table_size() const { return table_.size(); }
    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

    const TypeFingerprint& fingerprint(TypeId id) const { return types_.at(id).fp; }
    const Structure& representative(TypeId id) const { return types_.at(id).rep; }

    /// Oracle type of `s`, interned with `s` as representative if new.
    TypeId intern(const Structure& s) {
        auto fp = type_of(s, m_, mode_, limits_);
        return intern(std::move(fp), s);
    }

    TypeId leaf_type(std::size_t leafIndex) {
        if (leafTypes_.size() < alpha_->leaves().size()) leafTypes_.resize(alpha_->leaves().size(), kNoType);
        auto& slot = leafTypes_.at(leafIndex);
        if (slot == kNoType) slot = intern(alpha_->leaf(leafIndex).structure);
        return slot;
    }

    /// χ0: the op on its first rho inputs.
    TypeId base(std::size_t op, std::span<const TypeId> in) { return lookup(Step::Base, op, kNoType, in); }
    /// χ_{j+1} from χ_j and the next rho-1 inputs.
    TypeId fold(std::size_t op, TypeId acc, std::span<const TypeId> in) { return lookup(Step::Fold, op, acc, in); }
    /// Type of the op's output from its final accumulator.
    TypeId finish(std::size_t op, TypeId acc) { return lookup(Step::Finish, op, acc, {}); }

    /// f_{m,O} for a complete child list of allowed arity.
    TypeId compose(std::size_t op, std::span<const TypeId> in) {
        const auto& sym = alpha_->op(op);
        const auto rho = static_cast<std::size_t>(sym.rho);
        if (!sym.allows(in.size()))
            throw DomainError("compose: arity " + std::to_string(in.size()) + " not allowed for '" + sym.name + "'");
        TypeId acc = base(op, in.first(rho));
        for (std::size_t i = rho; i < in.size(); i += rho - 1) acc = fold(op, acc, in.subspan(i, rho - 1));
        return finish(op, acc);
    }

    // --- persistence -------------------------------------------------------

    static constexpr char kMagic[8] = {'E', 'B', 'S', 'P', 'F', 'V', 'C', '\0'};
    static constexpr std::uint32_t kVersion = 1;

    std::string file_name() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(alpha_->digest()));
        return std::string("fvc-") + to_string(mode_) + "-m" + std::to_string(m_) + "-" + buf + ".bin";
    }

    /// Writes all types, representatives and table entries. Entries are
    /// sorted by key so equal runs give identical bytes.
    void save(const std::filesystem::path& file) const {
        std::string out(kMagic, sizeof kMagic);
        put32(out, kVersion);
        put64(out, alpha_->digest());
        put32(out, mode_ == LogicMode::FO ? 0 : 1);
        put32(out, static_cast<std::uint32_t>(m_));
        put32(out, static_cast<std::uint32_t>(types_.size()));
        for (auto& t : types_) {
            putstr(out, t.fp.text);
            putstr(out, to_text(t.rep));
        }
        std::map<std::vector<std::uint32_t>, TypeId> sorted(table_.begin(), table_.end());
        put32(out, static_cast<std::uint32_t>(sorted.size()));
        for (auto& [k, v] : sorted) {
            put32(out, static_cast<std::uint32_t>(k.size()));
            for (auto x : k) put32(out, x);
            put32(out, v);
        }
        auto tmp = file;
        tmp += ".tmp";
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            if (!os) throw DomainError("cannot write '" + tmp.string() + "'");
            os.write(out.data(), static_cast<std::streamsize>(out.size()));
        }
        std::filesystem::rename(tmp, file);
    }

    /// Merges a saved table. Refuses other versions, alphabets, modes and ranks.
    void load(const std::filesystem::path& file) {
        std::string in = detail::read_file(file);
        std::size_t pos = 0;
        auto need = [&](std::size_t n) {
            if (pos + n > in.size()) throw ParseError(file.string() + ": truncated table");
        };
        auto get32 = [&] {
            need(4);
            std::uint32_t x;
            std::memcpy(&x, in.data() + pos, 4);
            pos += 4;
            return x;
        };
        auto get64 = [&] {
            need(8);
            std::uint64_t x;
            std::memcpy(&x, in.data() + pos, 8);
            pos += 8;
            return x;
        };
        auto getstr = [&] {
            auto n = get32();
            need(n);
            std::string s = in.substr(pos, n);
            pos += n;
            return s;
        };
        need(sizeof kMagic);
        if (in.compare(0, sizeof kMagic, std::string(kMagic, sizeof kMagic)) != 0)
            throw ParseError(file.string() + ": not a composition table");
        pos = sizeof kMagic;
        if (auto v = get32(); v != kVersion)
            throw ParseError(file.string() + ": table version " + std::to_string(v) + ", expected " +
                             std::to_string(kVersion));
        if (get64() != alpha_->digest()) throw ParseError(file.string() + ": table belongs to another alphabet");
        if (get32() != (mode_ == LogicMode::FO ? 0u : 1u) || get32() != static_cast<std::uint32_t>(m_))
            throw ParseError(file.string() + ": table has another logic or rank");
        const auto n = get32();
        std::vector<TypeId> remap(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            auto text = getstr();
            auto rep = parse_structure(getstr());
            remap[i] = intern(make_fingerprint(mode_, m_, std::move(text)), rep);
        }
        const auto entries = get32();
        for (std::uint32_t e = 0; e < entries; ++e) {
            std::vector<std::uint32_t> k(get32());
            for (auto& x : k) x = get32();
            auto v = get32();
            // key layout: step, op, acc, inputs...
            if (k.size() < 3 || v >= n) throw ParseError(file.string() + ": malformed entry");
            if (k[2] != kNoType) k[2] = remap.at(k[2]);
            for (std::size_t i = 3; i < k.size(); ++i) k[i] = remap.at(k[i]);
            table_.emplace(std::move(k), remap[v]);
        }
        if (pos != in.size()) throw ParseError(file.string() + ": trailing bytes");
    }

private:
    struct Entry {
        TypeFingerprint fp;
        Structure rep;
    };

    struct KeyHash {
        std::size_t operator()(const std::vector<std::uint32_t>& k) const noexcept {
            std::uint64_t h = 1469598103934665603ull;
            for (auto x : k) h = (h ^ x) * 1099511628211ull;
            return static_cast<std::size_t>(h);
        }
    };

    TypeId intern(TypeFingerprint fp, const Structure& rep) {
        auto& bucket = byDigest_[fp.digest];
        for (auto id : bucket) {
            if (!(types_[id].fp == fp)) continue;  // throws on collision
            // smaller representatives keep later applications under the cap
            if (rep.size() < types_[id].rep.size()) types_[id].rep = renumbered(rep);
            return id;
        }
        TypeId id = static_cast<TypeId>(types_.size());
        types_.push_back({std::move(fp), renumbered(rep)});
        bucket.push_back(id);
        return id;
    }

    TypeId lookup(Step step, std::size_t op, TypeId acc, std::span<const TypeId> in) {
        key_.assign({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(op), acc});
        key_.insert(key_.end(), in.begin(), in.end());
        if (auto it = table_.find(key_); it != table_.end()) {
            ++hits_;
            return it->second;
        }
        ++misses_;
        auto key = key_;
        TypeId out = materialize(step, op, acc, in);
        table_.emplace(std::move(key), out);
        return out;
    }

    TypeId materialize(Step step, std::size_t op, TypeId acc, std::span<const TypeId> in) {
        const auto& sym = alpha_->op(op);
        const auto& voc = alpha_->vocabulary();
        // representatives with disjoint ids: input i uses ids (i+1)<<20 + j
        std::vector<Structure> inputs;
        for (std::size_t i = 0; i < in.size(); ++i)
            inputs.push_back(renumbered(types_.at(in[i]).rep, (std::uint64_t{i} + 2) << 20));
        const std::uint64_t fresh = std::uint64_t{1} << 40;
        Structure result;
        switch (step) {
            case Step::Base: result = apply_base(sym, voc, inputs, fresh); break;
            case Step::Fold: result = apply_step(sym, voc, renumbered(types_.at(acc).rep, 1 << 20), inputs, fresh); break;
            case Step::Finish: result = apply_finish(sym, voc, types_.at(acc).rep); break;
        }
        if (result.size() > oracle_cap(mode_, limits_))
            throw BudgetError("composition of '" + sym.name + "' at " + to_string(mode_) + " rank " +
                              std::to_string(m_) + " needs a representative with " + std::to_string(result.size()) +
                              " elements (cap " + std::to_string(oracle_cap(mode_, limits_)) +
                              "); raise the cap or lower the rank");
        return intern(type_of(result, m_, mode_, limits_), result);
    }

    static void put32(std::string& s, std::uint32_t x) { s.append(reinterpret_cast<const char*>(&x), 4); }
    static void put64(std::string& s, std::uint64_t x) { s.append(reinterpret_cast<const char*>(&x), 8); }
    static void putstr(std::string& s, const std::string& x) {
        put32(s, static_cast<std::uint32_t>(x.size()));
        s += x;
    }

    const Alphabet* alpha_;
    int m_;
    LogicMode mode_;
    OracleLimits limits_;
    std::vector<Entry> types_;
    std::unordered_map<std::uint64_t, std::vector<TypeId>> byDigest_;
    std::unordered_map<std::vector<std::uint32_t>, TypeId, KeyHash> table_;
    std::vector<TypeId> leafTypes_;
    std::vector<std::uint32_t> key_;
    std::size_t hits_ = 0, misses_ = 0;
};

/// Cache directory from EBSP_CACHE_DIR, or empty when unset.
inline std::filesystem::path cache_directory() {
    const char* d = std::getenv("EBSP_CACHE_DIR");
    return d && *d ? std::filesystem::path(d) : std::filesystem::path();
}

// ---------------------------------------------------------------------------
// Annotation: δ1 per node by the compositional dynamic program, δ2 by the
// automaton run, plus the per-prefix pairs degree reduction works on.
// ---------------------------------------------------------------------------

struct Annotation {
    std::vector<TypeId> delta1;
    std::vector<int> delta2;
    /// Unranked nodes: prefix[v][l] is χ after the first l children (kNoType
    /// where l is not an allowed arity); hstate[v][l] the horizontal state.
    std::vector<std::vector<TypeId>> prefix;
    std::vector<std::vector<int>> hstate;

    TypeId root() const { return delta1.at(0); }
};

/// Annotates the nodes in `nodes` (all of them when empty); annotations of
/// their children must already be present in `ann`.
inline void annotate_nodes(const OpTree& t, Composer& comp, const TreeAutomaton& aut, Annotation& ann,
                           std::span<const std::size_t> nodes) {
    const auto& alpha = comp.alphabet();
    std::vector<TypeId> buf;
    std::vector<int> states;
    for (auto v : nodes) {
        const auto& n = t[v];
        try {
            if (n.is_leaf()) {
                ann.delta1[v] = comp.leaf_type(n.symbol.index);
                ann.delta2[v] = aut.leaf_state(alpha.base_name(n.symbol));
                ann.prefix[v].clear();
                ann.hstate[v].clear();
                continue;
            }
            const auto& sym = alpha.op(n.symbol.index);
            const auto& ch = n.children;
            const auto rho = static_cast<std::size_t>(sym.rho);
            if (!sym.allows(ch.size()))
                throw DomainError("arity " + std::to_string(ch.size()) + " not allowed for '" + sym.name + "'");
            buf.clear();
            for (auto c : ch) buf.push_back(ann.delta1[c]);
            auto& pre = ann.prefix[v];
            auto& hs = ann.hstate[v];
            states.clear();
            for (auto c : ch) states.push_back(ann.delta2[c]);
            hs = aut.horizontal_run(alpha.base_name(n.symbol), states);
            ann.delta2[v] = aut.h_out(aut.horizontal(alpha.base_name(n.symbol)), hs.back());
            TypeId acc = comp.base(n.symbol.index, std::span(buf).first(rho));
            if (sym.ranked || rho == 1) {
                pre.clear();
            } else {
                pre.assign(ch.size() + 1, kNoType);
                pre[rho] = acc;
            }
            for (std::size_t i = rho; i < ch.size(); i += rho - 1) {
                acc = comp.fold(n.symbol.index, acc, std::span(buf).subspan(i, rho - 1));
                pre[i + rho - 1] = acc;
            }
            ann.delta1[v] = comp.finish(n.symbol.index, acc);
        } catch (const BudgetError& e) {
            throw BudgetError(std::string(e.what()) + " (at node " + to_string(t.address_of(v)) + ")");
        }
    }
}

inline Annotation annotate(const OpTree& t, Composer& comp, const TreeAutomaton& aut) {
    if (t.empty()) throw DomainError("annotate: empty tree");
    Annotation ann;
    ann.delta1.assign(t.size(), kNoType);
    ann.delta2.assign(t.size(), -1);
    ann.prefix.resize(t.size());
    ann.hstate.resize(t.size());
    std::vector<std::size_t> order(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) order[i] = t.size() - 1 - i;
    annotate_nodes(t, comp, aut, ann, order);
    return ann;
}

// ---------------------------------------------------------------------------
// Empirical check of the composition property for one op.
// ---------------------------------------------------------------------------

struct FvcTrialOptions {
    std::size_t trials = 200;
    /// Inputs are evaluated trees with at most this many elements.
    std::size_t max_input_size = 3;
    std::size_t max_input_leaves = 4;
    std::uint64_t seed = 1;
};

struct FvcReport {
    std::string op;
    int rank = 0;
    LogicMode mode = LogicMode::FO;
    std::size_t trials = 0, passed = 0, classes = 0;
    /// Trees A1, A2, B1, B2 with Ai ≡ Bi but O(A1,A2) ≢ O(B1,B2).
    std::vector<std::string> counterexample;

    bool ok() const { return passed == trials && counterexample.empty(); }
};

/// Samples inputs A_i ≡ B_i from small evaluated trees and checks
/// O(A_1..A_r) ≡ O(B_1..B_r) with the oracle. Unranked ops alternate
/// between the base arity and one fold step when the larger outputs fit
/// the oracle cap.
inline FvcReport verify_fvc(const Alphabet& alpha, const std::string& opName, int m, LogicMode mode,
                            const FvcTrialOptions& opt = {}, const OracleLimits& limits = {}) {
    auto opIndex = alpha.find_op(opName);
    if (!opIndex) throw DomainError("verify_fvc: unknown op '" + opName + "'");
    const auto& op = alpha.op(*opIndex);
    const auto rho = static_cast<std::size_t>(op.rho);
    const std::size_t cap = oracle_cap(mode, limits);
    if (rho * opt.max_input_size + op.kind.introduced() > cap)
        throw BudgetError("verify_fvc: outputs may exceed the oracle cap; lower max_input_size");
    // fold trials only when their outputs fit the oracle too
    const bool folds = !op.ranked && (2 * rho - 1) * opt.max_input_size + op.kind.introduced() <= cap;

    FvcReport rep;
    rep.op = opName;
    rep.rank = m;
    rep.mode = mode;

    // pool of pairwise non-isomorphic inputs grouped by type
    std::mt19937_64 rng(opt.seed);
    std::map<std::string, std::vector<OpTree>> byType;
    std::map<std::string, bool> seen;
    auto consider = [&](const OpTree& t) {
        auto s = evaluate(t, alpha).structure;
        if (s.size() > opt.max_input_size) return;
        auto enc = canonical_encoding(s);
        if (seen[enc]) return;
        seen[enc] = true;
        byType[type_of(s, m, mode, limits).text].push_back(t);
    };
    for (std::size_t l = 0; l < alpha.leaves().size(); ++l) consider(OpTree::leaf(l));
    RandomTreeOptions ro;
    ro.max_leaves = opt.max_input_leaves;
    for (int i = 0; i < 400; ++i) consider(random_tree(alpha, rng, ro));
    std::vector<const std::vector<OpTree>*> classes;
    for (auto& [k, v] : byType) classes.push_back(&v);
    rep.classes = classes.size();
    if (classes.empty()) return rep;

    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    for (std::size_t trial = 0; trial < opt.trials; ++trial) {
        const std::size_t arity = (!folds || trial % 2 == 0) ? rho : 2 * rho - 1;
        std::vector<OpTree> as, bs;
        for (std::size_t i = 0; i < arity; ++i) {
            const auto& cls = *classes[pick(classes.size())];
            std::size_t x = pick(cls.size()), y = pick(cls.size());
            if (cls.size() > 1)
                while (y == x) y = pick(cls.size());
            as.push_back(cls[x]);
            bs.push_back(cls[y]);
        }
        auto ta = OpTree::node(*opIndex, as), tb = OpTree::node(*opIndex, bs);
        ++rep.trials;
        if (type_of(evaluate(ta, alpha).structure, m, mode, limits) ==
            type_of(evaluate(tb, alpha).structure, m, mode, limits)) {
            ++rep.passed;
        } else if (rep.counterexample.empty()) {
            rep.counterexample = {to_sexp(ta, alpha), to_sexp(tb, alpha)};
        }
    }
    return rep;
}

}  // namespace ebsp
