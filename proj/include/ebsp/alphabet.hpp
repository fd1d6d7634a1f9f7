#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ebsp/error.hpp"
#include "ebsp/structure.hpp"
#include "ebsp/types.hpp"

namespace ebsp {

enum class WordSignature { Order, Successor };
enum class TreeSignature { AncestorOrder, Local };

/// User-supplied operation for experiments and negative controls. `fn`
/// receives inputs with pairwise disjoint ids and must keep them; new
/// elements take ids from `fresh` upwards.
struct CustomOp {
    std::string name;
    std::function<Structure(std::span<const Structure> inputs, const VocabularyPtr& voc, std::uint64_t fresh)> fn;
};

struct OpKind {
    enum class Tag { DisjointUnion, CographJoin, TreeBuild, WordConcat, Custom };

    Tag tag = Tag::DisjointUnion;
    /// CographJoin: f as an n x n 0/1 matrix over labels 1..n.
    std::vector<std::vector<int>> matrix;
    /// TreeBuild: label of the introduced root (0 = none).
    int label = 0;
    /// TreeBuild: unary relation set on the introduced root (kernel marking).
    std::string root_mark;
    WordSignature word = WordSignature::Order;
    TreeSignature tree = TreeSignature::AncestorOrder;
    std::shared_ptr<const CustomOp> custom;

    static OpKind disjoint_union() { return {}; }
    static OpKind cograph(std::vector<std::vector<int>> f) {
        OpKind k;
        k.tag = Tag::CographJoin;
        k.matrix = std::move(f);
        return k;
    }
    static OpKind tree_build(int label, TreeSignature sig = TreeSignature::AncestorOrder) {
        OpKind k;
        k.tag = Tag::TreeBuild;
        k.label = label;
        k.tree = sig;
        return k;
    }
    static OpKind concat(WordSignature sig = WordSignature::Order) {
        OpKind k;
        k.tag = Tag::WordConcat;
        k.word = sig;
        return k;
    }
    static OpKind custom_op(std::shared_ptr<const CustomOp> op) {
        OpKind k;
        k.tag = Tag::Custom;
        k.custom = std::move(op);
        return k;
    }

    /// Relations this operation writes.
    std::vector<RelationSymbol> relations() const {
        switch (tag) {
            case Tag::CographJoin: return {{"E", 2}};
            case Tag::WordConcat: return {{word == WordSignature::Order ? "lt" : "succ", 2}};
            case Tag::TreeBuild: {
                std::vector<RelationSymbol> r;
                if (tree == TreeSignature::AncestorOrder)
                    r = {{"anc", 2}, {"doc", 2}};
                else
                    r = {{"child", 2}, {"next", 2}};
                if (!root_mark.empty()) r.push_back({root_mark, 1});
                return r;
            }
            default: return {};
        }
    }

    std::size_t introduced() const { return tag == Tag::TreeBuild ? 1 : 0; }

    std::string describe() const {
        switch (tag) {
            case Tag::DisjointUnion: return "union";
            case Tag::CographJoin: {
                std::string s = "cograph ";
                for (std::size_t i = 0; i < matrix.size(); ++i) {
                    if (i) s += ';';
                    for (int v : matrix[i]) s += static_cast<char>('0' + v);
                }
                return s;
            }
            case Tag::TreeBuild:
                return "tree label=" + std::to_string(label) +
                       (tree == TreeSignature::Local ? " signature=local" : "") +
                       (root_mark.empty() ? "" : " mark=" + root_mark);
            case Tag::WordConcat: return std::string("concat") + (word == WordSignature::Successor ? " signature=succ" : "");
            case Tag::Custom: return "custom " + (custom ? custom->name : std::string("?"));
        }
        return "?";
    }
};

struct LeafSymbol {
    std::string name;
    Structure structure;
    /// Symbol this one was cloned from (marking); equals `name` otherwise.
    std::string base;
};

struct OpSymbol {
    std::string name;
    OpKind kind;
    int rho = 2;
    bool ranked = false;
    std::string base;

    /// Allowed child counts: exactly rho when ranked, else rho + i(rho-1).
    bool allows(std::size_t n) const {
        const auto r = static_cast<std::size_t>(rho);
        if (ranked || rho == 1) return n == r;
        return n >= r && (n - r) % (r - 1) == 0;
    }

    std::string allowed_text() const {
        if (ranked || rho == 1) return std::to_string(rho);
        return std::to_string(rho) + "+i*" + std::to_string(rho - 1);
    }
};

struct SymbolRef {
    bool leaf = true;
    std::size_t index = 0;

    bool operator==(const SymbolRef&) const = default;
};

/// Σ_leaf ∪ Σ_int over one shared vocabulary. Leaf structures are expanded
/// to that vocabulary.
class Alphabet {
public:
    Alphabet() = default;

    Alphabet(std::vector<LeafSymbol> leaves, std::vector<OpSymbol> ops, int minLabels = 0)
        : leaves_(std::move(leaves)), ops_(std::move(ops)) {
        std::vector<RelationSymbol> rels;
        int labels = minLabels;
        auto addRel = [&](const RelationSymbol& r) {
            for (auto& x : rels) {
                if (x.name != r.name) continue;
                if (x.arity != r.arity)
                    throw DomainError("alphabet: relation '" + r.name + "' used with arities " + std::to_string(x.arity) +
                                      " and " + std::to_string(r.arity));
                return;
            }
            rels.push_back(r);
        };
        std::vector<std::string> names;
        auto addName = [&](const std::string& n) {
            if (n.empty()) throw DomainError("alphabet: empty symbol name");
            if (n == "leaf") throw DomainError("alphabet: 'leaf' is reserved");
            for (auto& x : names)
                if (x == n) throw DomainError("alphabet: duplicate symbol '" + n + "'");
            names.push_back(n);
        };
        for (auto& l : leaves_) {
            addName(l.name);
            if (l.base.empty()) l.base = l.name;
            for (auto& r : l.structure.vocabulary().relations()) addRel(r);
            labels = std::max(labels, l.structure.vocabulary().label_count());
        }
        for (auto& o : ops_) {
            addName(o.name);
            if (o.base.empty()) o.base = o.name;
            if (o.rho < 1) throw DomainError("alphabet: op '" + o.name + "' has rank < 1");
            if (!o.ranked && o.rho < 2)
                throw DomainError("alphabet: unranked op '" + o.name + "' needs rank >= 2");
            if (o.kind.tag == OpKind::Tag::Custom && !o.kind.custom)
                throw DomainError("alphabet: custom op '" + o.name + "' has no implementation");
            for (auto& r : o.kind.relations()) addRel(r);
            if (o.kind.tag == OpKind::Tag::CographJoin) {
                const auto n = o.kind.matrix.size();
                if (n == 0) throw DomainError("alphabet: op '" + o.name + "' has an empty matrix");
                for (auto& row : o.kind.matrix) {
                    if (row.size() != n) throw DomainError("alphabet: op '" + o.name + "' matrix is not square");
                    for (int v : row)
                        if (v != 0 && v != 1) throw DomainError("alphabet: op '" + o.name + "' matrix entries must be 0/1");
                }
                labels = std::max(labels, static_cast<int>(n));
            }
            if (o.kind.tag == OpKind::Tag::TreeBuild) {
                if (o.kind.label < 0) throw DomainError("alphabet: negative label");
                labels = std::max(labels, o.kind.label);
            }
        }
        vocabulary_ = make_vocabulary(rels, labels);
        for (auto& l : leaves_)
            if (!(l.structure.vocabulary() == *vocabulary_)) l.structure = expand_vocabulary(l.structure, vocabulary_);
        for (auto& l : leaves_)
            if (l.structure.size() >= (1u << 16)) throw DomainError("alphabet: leaf '" + l.name + "' too large");
    }

    const VocabularyPtr& vocabulary() const noexcept { return vocabulary_; }
    const std::vector<LeafSymbol>& leaves() const noexcept { return leaves_; }
    const std::vector<OpSymbol>& ops() const noexcept { return ops_; }
    const LeafSymbol& leaf(std::size_t i) const { return leaves_.at(i); }
    const OpSymbol& op(std::size_t i) const { return ops_.at(i); }

    std::optional<SymbolRef> find(std::string_view name) const {
        for (std::size_t i = 0; i < leaves_.size(); ++i)
            if (leaves_[i].name == name) return SymbolRef{true, i};
        for (std::size_t i = 0; i < ops_.size(); ++i)
            if (ops_[i].name == name) return SymbolRef{false, i};
        return std::nullopt;
    }

    std::optional<std::size_t> find_leaf(std::string_view name) const {
        auto s = find(name);
        if (s && s->leaf) return s->index;
        return std::nullopt;
    }

    std::optional<std::size_t> find_op(std::string_view name) const {
        auto s = find(name);
        if (s && !s->leaf) return s->index;
        return std::nullopt;
    }

    const std::string& name(SymbolRef s) const { return s.leaf ? leaves_.at(s.index).name : ops_.at(s.index).name; }
    const std::string& base_name(SymbolRef s) const { return s.leaf ? leaves_.at(s.index).base : ops_.at(s.index).base; }

    bool has_custom_ops() const {
        for (auto& o : ops_)
            if (o.kind.tag == OpKind::Tag::Custom) return true;
        return false;
    }

    /// Canonical description; its digest keys persisted composition tables.
    std::string describe() const {
        std::string s = "voc " + vocabulary_->signature() + "\n";
        for (auto& l : leaves_) s += "leaf " + l.name + "\n" + to_text(l.structure);
        for (auto& o : ops_)
            s += "op " + o.name + " " + o.kind.describe() + " " + std::to_string(o.rho) + (o.ranked ? " ranked" : "") + "\n";
        return s;
    }

    std::uint64_t digest() const { return fnv1a64(describe()); }

private:
    std::vector<LeafSymbol> leaves_;
    std::vector<OpSymbol> ops_;
    VocabularyPtr vocabulary_ = make_vocabulary({});
};

// ---------------------------------------------------------------------------
// Structure-level application. Inputs must carry pairwise disjoint ids.
// Unranked operations are evaluated as base (first rho inputs), then one
// step per further rho-1 inputs, then finish. For TreeBuild the accumulator
// marks the new root with the unary relation `_root`, which finish drops.
// ---------------------------------------------------------------------------

inline constexpr const char* kRootMarker = "_root";

namespace detail {

inline void copy_into(StructureBuilder& b, const Vocabulary& target, const Structure& s, std::size_t offset) {
    for (std::size_t i = 0; i < s.size(); ++i) b.add_element(s.id(i), s.label(i));
    std::vector<std::uint32_t> buf;
    for (std::size_t r = 0; r < s.relation_count(); ++r) {
        const auto& sym = s.vocabulary().relations()[r];
        auto t = target.find(sym.name);
        if (!t) {
            // the accumulator root marker is dropped silently
            if (s.relation(r).size() && sym.name != kRootMarker)
                throw DomainError("apply: output vocabulary lacks '" + sym.name + "'");
            continue;
        }
        const auto& rel = s.relation(r);
        for (std::size_t k = 0; k < rel.size(); ++k) {
            buf.assign(rel.tuple(k).begin(), rel.tuple(k).end());
            for (auto& x : buf) x += static_cast<std::uint32_t>(offset);
            b.add_tuple(*t, buf);
        }
    }
}

/// First/last element of a word (no incoming / no outgoing successor).
inline std::pair<std::size_t, std::size_t> word_ends(const Structure& s) {
    auto r = s.vocabulary().find("succ");
    std::vector<char> hasIn(s.size(), 0), hasOut(s.size(), 0);
    if (r)
        for (std::size_t k = 0; k < s.relation(*r).size(); ++k) {
            auto t = s.relation(*r).tuple(k);
            hasOut[t[0]] = 1;
            hasIn[t[1]] = 1;
        }
    std::size_t first = 0, last = s.size() - 1;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!hasIn[i]) {
            first = i;
            break;
        }
    for (std::size_t i = s.size(); i-- > 0;)
        if (!hasOut[i]) {
            last = i;
            break;
        }
    return {first, last};
}

/// Root of a tree under the local signature (no incoming child edge).
inline std::size_t tree_root(const Structure& s) {
    auto r = s.vocabulary().find("child");
    std::vector<char> hasParent(s.size(), 0);
    if (r)
        for (std::size_t k = 0; k < s.relation(*r).size(); ++k) hasParent[s.relation(*r).tuple(k)[1]] = 1;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!hasParent[i]) return i;
    return 0;
}

/// Adds the tuples an operation writes between consecutive input blocks.
/// `offsets[i]` is the first index of input i in the output; `root` is the
/// introduced root index for TreeBuild (or the accumulator root).
inline void add_op_tuples(StructureBuilder& b, const Vocabulary& voc, const OpKind& k,
                          std::span<const Structure> in, const std::vector<std::size_t>& offsets,
                          std::optional<std::size_t> root, std::optional<std::size_t> prevLastChild) {
    using T = OpKind::Tag;
    auto u32 = [](std::size_t x) { return static_cast<std::uint32_t>(x); };
    switch (k.tag) {
        case T::DisjointUnion:
        case T::Custom: return;
        case T::CographJoin: {
            const auto e = voc.index_of("E");
            const std::size_t n = k.matrix.size();
            for (std::size_t j = 1; j < in.size(); ++j)
                for (std::size_t y = 0; y < in[j].size(); ++y) {
                    int ly = in[j].label(y);
                    if (ly < 1 || static_cast<std::size_t>(ly) > n) continue;
                    for (std::size_t i = 0; i < j; ++i)
                        for (std::size_t x = 0; x < in[i].size(); ++x) {
                            int lx = in[i].label(x);
                            if (lx < 1 || static_cast<std::size_t>(lx) > n) continue;
                            if (!k.matrix[static_cast<std::size_t>(lx - 1)][static_cast<std::size_t>(ly - 1)]) continue;
                            b.add_tuple(e, {u32(offsets[i] + x), u32(offsets[j] + y)});
                            b.add_tuple(e, {u32(offsets[j] + y), u32(offsets[i] + x)});
                        }
                }
            return;
        }
        case T::WordConcat: {
            if (k.word == WordSignature::Order) {
                const auto lt = voc.index_of("lt");
                for (std::size_t j = 1; j < in.size(); ++j)
                    for (std::size_t i = 0; i < j; ++i)
                        for (std::size_t x = 0; x < in[i].size(); ++x)
                            for (std::size_t y = 0; y < in[j].size(); ++y)
                                b.add_tuple(lt, {u32(offsets[i] + x), u32(offsets[j] + y)});
            } else {
                const auto succ = voc.index_of("succ");
                for (std::size_t j = 1; j < in.size(); ++j) {
                    if (in[j - 1].empty() || in[j].empty()) continue;
                    auto a = word_ends(in[j - 1]).second;
                    auto c = word_ends(in[j]).first;
                    b.add_tuple(succ, {u32(offsets[j - 1] + a), u32(offsets[j] + c)});
                }
            }
            return;
        }
        case T::TreeBuild: {
            const std::size_t r = *root;
            if (k.tree == TreeSignature::AncestorOrder) {
                const auto anc = voc.index_of("anc"), doc = voc.index_of("doc");
                for (std::size_t j = 0; j < in.size(); ++j)
                    for (std::size_t y = 0; y < in[j].size(); ++y) {
                        b.add_tuple(anc, {u32(r), u32(offsets[j] + y)});
                        b.add_tuple(doc, {u32(r), u32(offsets[j] + y)});
                        for (std::size_t i = 0; i < j; ++i)
                            for (std::size_t x = 0; x < in[i].size(); ++x)
                                b.add_tuple(doc, {u32(offsets[i] + x), u32(offsets[j] + y)});
                    }
            } else {
                const auto child = voc.index_of("child"), next = voc.index_of("next");
                std::optional<std::size_t> prev = prevLastChild;
                for (std::size_t j = 0; j < in.size(); ++j) {
                    if (in[j].empty()) continue;
                    auto c = offsets[j] + tree_root(in[j]);
                    b.add_tuple(child, {u32(r), u32(c)});
                    if (prev) b.add_tuple(next, {u32(*prev), u32(c)});
                    prev = c;
                }
            }
            return;
        }
    }
}

inline VocabularyPtr with_root_marker(const VocabularyPtr& voc) {
    if (voc->find(kRootMarker)) return voc;
    return std::make_shared<const Vocabulary>(voc->with_relation({kRootMarker, 1}));
}

}  // namespace detail

/// Applies the op to all of `in` at once (any arity); the result is over
/// `voc`. New elements get ids fresh, fresh+1, ...
inline Structure apply_op(const OpSymbol& op, const VocabularyPtr& voc, std::span<const Structure> in,
                          std::uint64_t fresh) {
    if (op.kind.tag == OpKind::Tag::Custom) return op.kind.custom->fn(in, voc, fresh);
    StructureBuilder b(voc);
    std::vector<std::size_t> offsets;
    std::optional<std::size_t> root;
    if (op.kind.tag == OpKind::Tag::TreeBuild) root = b.add_element(ElementId{fresh}, op.kind.label);
    for (auto& s : in) {
        offsets.push_back(b.size());
        detail::copy_into(b, *voc, s, b.size());
    }
    detail::add_op_tuples(b, *voc, op.kind, in, offsets, root, std::nullopt);
    if (root && !op.kind.root_mark.empty()) b.add_tuple(voc->index_of(op.kind.root_mark), {static_cast<std::uint32_t>(*root)});
    return std::move(b).build();
}

/// Vocabulary of accumulators for `op` over the alphabet vocabulary.
inline VocabularyPtr accumulator_vocabulary(const OpSymbol& op, const VocabularyPtr& voc) {
    return op.kind.tag == OpKind::Tag::TreeBuild ? detail::with_root_marker(voc) : voc;
}

/// χ0 of the fold: the op applied to the first rho inputs.
inline Structure apply_base(const OpSymbol& op, const VocabularyPtr& voc, std::span<const Structure> in,
                            std::uint64_t fresh) {
    if (op.kind.tag != OpKind::Tag::TreeBuild) return apply_op(op, voc, in, fresh);
    auto accVoc = detail::with_root_marker(voc);
    auto s = apply_op(op, accVoc, in, fresh);
    StructureBuilder b(accVoc);
    detail::copy_into(b, *accVoc, s, 0);
    b.add_tuple(accVoc->index_of(kRootMarker), {0u});
    return std::move(b).build();
}

/// χ_{j+1} from χ_j and the next rho-1 inputs.
inline Structure apply_step(const OpSymbol& op, const VocabularyPtr& voc, const Structure& acc,
                            std::span<const Structure> in, std::uint64_t fresh) {
    if (op.kind.tag != OpKind::Tag::TreeBuild) {
        std::vector<Structure> all{acc};
        all.insert(all.end(), in.begin(), in.end());
        return apply_op(op, voc, all, fresh);
    }
    const auto& accVoc = acc.vocabulary_ptr();
    auto marker = accVoc->index_of(kRootMarker);
    if (acc.relation(marker).size() != 1) throw DomainError("apply_step: accumulator without a unique root marker");
    const std::size_t root = acc.relation(marker).tuple(0)[0];
    StructureBuilder b(accVoc);
    detail::copy_into(b, *accVoc, acc, 0);
    std::vector<std::size_t> offsets;
    for (auto& s : in) {
        offsets.push_back(b.size());
        detail::copy_into(b, *accVoc, s, b.size());
    }
    std::optional<std::size_t> prevLast;
    if (op.kind.tree == TreeSignature::AncestorOrder) {
        // everything already in the accumulator precedes the new subtrees
        const auto anc = accVoc->index_of("anc"), doc = accVoc->index_of("doc");
        for (std::size_t j = 0; j < in.size(); ++j)
            for (std::size_t y = 0; y < in[j].size(); ++y) {
                const auto yy = static_cast<std::uint32_t>(offsets[j] + y);
                b.add_tuple(anc, {static_cast<std::uint32_t>(root), yy});
                for (std::size_t x = 0; x < acc.size(); ++x)
                    if (x != root) b.add_tuple(doc, {static_cast<std::uint32_t>(x), yy});
                for (std::size_t i = 0; i < j; ++i)
                    for (std::size_t x = 0; x < in[i].size(); ++x)
                        b.add_tuple(doc, {static_cast<std::uint32_t>(offsets[i] + x), yy});
                b.add_tuple(doc, {static_cast<std::uint32_t>(root), yy});
            }
    } else {
        const auto child = accVoc->index_of("child"), next = accVoc->index_of("next");
        std::vector<char> isChild(acc.size(), 0), hasNext(acc.size(), 0);
        for (std::size_t k = 0; k < acc.relation(child).size(); ++k) {
            auto t = acc.relation(child).tuple(k);
            if (t[0] == root) isChild[t[1]] = 1;
        }
        for (std::size_t k = 0; k < acc.relation(next).size(); ++k) hasNext[acc.relation(next).tuple(k)[0]] = 1;
        for (std::size_t x = 0; x < acc.size(); ++x)
            if (isChild[x] && !hasNext[x]) prevLast = x;
        std::optional<std::size_t> prev = prevLast;
        for (std::size_t j = 0; j < in.size(); ++j) {
            if (in[j].empty()) continue;
            auto c = offsets[j] + detail::tree_root(in[j]);
            b.add_tuple(child, {static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(c)});
            if (prev) b.add_tuple(next, {static_cast<std::uint32_t>(*prev), static_cast<std::uint32_t>(c)});
            prev = c;
        }
    }
    (void)fresh;
    return std::move(b).build();
}

/// δ1 of an unranked node from its final accumulator.
inline Structure apply_finish(const OpSymbol& op, const VocabularyPtr& voc, const Structure& acc) {
    if (op.kind.tag != OpKind::Tag::TreeBuild) return acc;
    StructureBuilder b(voc);
    detail::copy_into(b, *voc, acc, 0);
    (void)op;
    return std::move(b).build();
}

// ---------------------------------------------------------------------------
// Alphabet file
//
//   leaf NAME FILE            structure file, relative to the alphabet file
//   leaf NAME point [LABEL]   single element
//   op NAME union RHO [ranked]
//   op NAME cograph RHO [ranked] ROWS         e.g. 10;01
//   op NAME tree RHO [ranked] [label=I] [signature=local]
//   op NAME concat RHO [ranked] [signature=succ]
//   labels K                  minimum label count
// ---------------------------------------------------------------------------

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DomainError("cannot read '" + p.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline std::vector<std::vector<int>> parse_matrix(const std::string& s, std::size_t line) {
    std::vector<std::vector<int>> m(1);
    for (char c : s) {
        if (c == ';')
            m.emplace_back();
        else if (c == '0' || c == '1')
            m.back().push_back(c - '0');
        else
            throw ParseError("matrix entries must be 0, 1 or ';'", line);
    }
    return m;
}

}  // namespace detail

inline Alphabet parse_alphabet(std::string_view text, const std::filesystem::path& baseDir = ".") {
    std::vector<LeafSymbol> leaves;
    std::vector<OpSymbol> ops;
    int minLabels = 0;
    std::size_t lineNo = 0, pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto w = detail::split_words(detail::strip_comment(text.substr(pos, nl - pos)));
        pos = nl + 1;
        ++lineNo;
        if (!w.empty()) {
            if (w[0] == "leaf") {
                if (w.size() < 3) throw ParseError("usage: leaf NAME FILE | leaf NAME point [LABEL]", lineNo);
                Structure s;
                if (w[2] == "point") {
                    int lab = w.size() > 3 ? static_cast<int>(detail::parse_int(w[3], lineNo, "label")) : 0;
                    if (lab < 0) throw ParseError("negative label", lineNo);
                    StructureBuilder b(make_vocabulary({}, lab));
                    b.add_element(ElementId{1}, lab);
                    s = std::move(b).build();
                } else {
                    try {
                        s = parse_structure(detail::read_file(baseDir / w[2]));
                    } catch (const ParseError& e) {
                        throw ParseError(w[2] + ": " + e.what(), lineNo);
                    } catch (const DomainError& e) {
                        throw ParseError(e.what(), lineNo);
                    }
                }
                leaves.push_back({w[1], s, w[1]});
            } else if (w[0] == "op") {
                if (w.size() < 4) throw ParseError("usage: op NAME KIND RHO [ranked] [params]", lineNo);
                OpSymbol o;
                o.name = w[1];
                o.rho = static_cast<int>(detail::parse_int(w[3], lineNo, "rank"));
                const std::string& kind = w[2];
                if (kind == "union")
                    o.kind = OpKind::disjoint_union();
                else if (kind == "cograph")
                    o.kind.tag = OpKind::Tag::CographJoin;
                else if (kind == "tree")
                    o.kind = OpKind::tree_build(0);
                else if (kind == "concat")
                    o.kind = OpKind::concat();
                else if (kind == "product" || kind == "tensor")
                    throw ParseError("product-like operation '" + kind + "' is not supported (breaks provenance)", lineNo);
                else
                    throw ParseError("unknown op kind '" + kind + "'", lineNo);
                for (std::size_t i = 4; i < w.size(); ++i) {
                    const auto& p = w[i];
                    if (p == "ranked") {
                        o.ranked = true;
                    } else if (p.rfind("label=", 0) == 0 && kind == "tree") {
                        o.kind.label = static_cast<int>(detail::parse_int(p.substr(6), lineNo, "label"));
                    } else if (p == "signature=local" && kind == "tree") {
                        o.kind.tree = TreeSignature::Local;
                    } else if (p == "signature=anc" && kind == "tree") {
                        o.kind.tree = TreeSignature::AncestorOrder;
                    } else if (p == "signature=succ" && kind == "concat") {
                        o.kind.word = WordSignature::Successor;
                    } else if (p == "signature=lt" && kind == "concat") {
                        o.kind.word = WordSignature::Order;
                    } else if (kind == "cograph" && o.kind.matrix.empty() && p.find_first_not_of("01;") == std::string::npos) {
                        o.kind.matrix = detail::parse_matrix(p, lineNo);
                    } else {
                        throw ParseError("unexpected parameter '" + p + "' for op kind " + kind, lineNo);
                    }
                }
                if (kind == "cograph" && o.kind.matrix.empty()) throw ParseError("cograph op needs a matrix", lineNo);
                o.base = o.name;
                ops.push_back(std::move(o));
            } else if (w[0] == "labels") {
                if (w.size() != 2) throw ParseError("usage: labels K", lineNo);
                minLabels = static_cast<int>(detail::parse_int(w[1], lineNo, "label count"));
            } else {
                throw ParseError("unknown directive '" + w[0] + "'", lineNo);
            }
        }
        if (nl == text.size()) break;
    }
    try {
        return Alphabet(std::move(leaves), std::move(ops), minLabels);
    } catch (const DomainError& e) {
        throw ParseError(e.what());
    }
}

inline Alphabet load_alphabet(const std::filesystem::path& file) {
    return parse_alphabet(detail::read_file(file), file.parent_path());
}

}  // namespace ebsp
