#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ebsp/alphabet.hpp"
#include "ebsp/optree.hpp"

namespace ebsp {

/// Element ids of evaluated trees: (key of the introducing node << 16) | local index.
inline ElementId make_element_id(std::uint64_t nodeKey, std::size_t local) {
    return ElementId{(nodeKey << 16) | static_cast<std::uint64_t>(local)};
}
inline std::uint64_t element_node_key(ElementId e) { return e.value >> 16; }

struct Evaluation {
    Structure structure;
    /// Per element: arena index of the node that introduced it.
    std::vector<std::size_t> owner;
    /// Per node: element index range [begin, end) of its subtree.
    std::vector<std::size_t> begin, end;

    /// Node that introduced `e`, or nullopt when `e` is not in the structure.
    std::optional<std::size_t> provenance(ElementId e) const {
        auto i = structure.index_of(e);
        if (!i) return std::nullopt;
        return owner[*i];
    }
};

namespace detail {

inline Evaluation evaluate_generic(const OpTree& t, const Alphabet& alpha) {
    const auto& voc = alpha.vocabulary();
    std::vector<std::optional<Structure>> val(t.size());
    for (std::size_t v = t.size(); v-- > 0;) {
        const auto& n = t[v];
        if (n.is_leaf()) {
            const auto& s = alpha.leaf(n.symbol.index).structure;
            StructureBuilder b(voc);
            for (std::size_t i = 0; i < s.size(); ++i) b.add_element(make_element_id(n.key, i), s.label(i));
            for (std::size_t r = 0; r < s.relation_count(); ++r)
                for (std::size_t k = 0; k < s.relation(r).size(); ++k) b.add_tuple(r, s.relation(r).tuple(k));
            val[v] = std::move(b).build();
            continue;
        }
        std::vector<Structure> in;
        for (auto c : n.children) {
            in.push_back(std::move(*val[c]));
            val[c].reset();
        }
        val[v] = apply_op(alpha.op(n.symbol.index), voc, in, make_element_id(n.key, 0).value);
    }
    Evaluation ev{std::move(*val[0]), {}, {}, {}};
    std::unordered_map<std::uint64_t, std::size_t> byKey;
    for (std::size_t i = 0; i < t.size(); ++i) byKey[t[i].key] = i;
    for (auto id : ev.structure.ids()) ev.owner.push_back(byKey.at(element_node_key(id)));
    return ev;
}

}  // namespace detail

/// Str(t) with element provenance. Shipped operations are evaluated in time
/// linear in the tree plus the number of output tuples; trees with custom
/// operations fall back to structure-level application.
inline Evaluation evaluate(const OpTree& t, const Alphabet& alpha) {
    if (t.empty()) throw DomainError("evaluate: empty tree");
    if (alpha.has_custom_ops()) return detail::evaluate_generic(t, alpha);
    const auto& voc = alpha.vocabulary();
    const std::size_t n = t.size();
    auto own = [&](std::size_t v) -> std::size_t {
        const auto& node = t[v];
        return node.is_leaf() ? alpha.leaf(node.symbol.index).structure.size()
                              : alpha.op(node.symbol.index).kind.introduced();
    };
    std::vector<std::size_t> size(n), begin(n), end(n);
    for (std::size_t v = n; v-- > 0;) {
        size[v] = own(v);
        for (auto c : t[v].children) size[v] += size[c];
    }
    begin[0] = 0;
    std::size_t total = size[0];
    std::vector<std::size_t> stack{0};
    std::vector<ElementId> ids(total);
    std::vector<int> labels(total, 0);
    std::vector<std::size_t> owner(total);
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        end[v] = begin[v] + size[v];
        const auto& node = t[v];
        std::size_t k = own(v);
        for (std::size_t i = 0; i < k; ++i) {
            ids[begin[v] + i] = make_element_id(node.key, i);
            owner[begin[v] + i] = v;
            labels[begin[v] + i] = node.is_leaf() ? alpha.leaf(node.symbol.index).structure.label(i)
                                                  : alpha.op(node.symbol.index).kind.label;
        }
        std::size_t cursor = begin[v] + k;
        for (auto c : node.children) {
            begin[c] = cursor;
            cursor += size[c];
            stack.push_back(c);
        }
    }
    StructureBuilder b(voc);
    for (std::size_t i = 0; i < total; ++i) b.add_element(ids[i], labels[i]);

    // per node: tree root and word ends, for the local signatures
    std::vector<std::size_t> treeRoot(n), first(n), last(n);
    for (std::size_t v = n; v-- > 0;) {
        const auto& node = t[v];
        if (node.is_leaf()) {
            const auto& s = alpha.leaf(node.symbol.index).structure;
            treeRoot[v] = begin[v] + (s.empty() ? 0 : detail::tree_root(s));
            auto [f, l] = s.empty() ? std::pair<std::size_t, std::size_t>{0, 0} : detail::word_ends(s);
            first[v] = begin[v] + f;
            last[v] = begin[v] + l;
            continue;
        }
        treeRoot[v] = begin[v];
        first[v] = node.children.empty() ? begin[v] : first[node.children.front()];
        last[v] = node.children.empty() ? begin[v] : last[node.children.back()];
        if (alpha.op(node.symbol.index).kind.tag != OpKind::Tag::WordConcat) {
            first[v] = begin[v];
            last[v] = end[v] ? end[v] - 1 : 0;
        }
    }

    auto u32 = [](std::size_t x) { return static_cast<std::uint32_t>(x); };
    std::vector<std::uint32_t> buf;
    for (std::size_t v = 0; v < n; ++v) {
        const auto& node = t[v];
        if (node.is_leaf()) {
            const auto& s = alpha.leaf(node.symbol.index).structure;
            for (std::size_t r = 0; r < s.relation_count(); ++r)
                for (std::size_t k = 0; k < s.relation(r).size(); ++k) {
                    auto tu = s.relation(r).tuple(k);
                    buf.assign(tu.begin(), tu.end());
                    for (auto& x : buf) x += u32(begin[v]);
                    b.add_tuple(r, buf);
                }
            continue;
        }
        const auto& kind = alpha.op(node.symbol.index).kind;
        const auto& ch = node.children;
        switch (kind.tag) {
            case OpKind::Tag::DisjointUnion:
            case OpKind::Tag::Custom: break;
            case OpKind::Tag::CographJoin: {
                const auto e = voc->index_of("E");
                const std::size_t L = kind.matrix.size();
                // elements of earlier children grouped by label
                std::vector<std::vector<std::size_t>> seen(L + 1);
                for (std::size_t j = 0; j < ch.size(); ++j) {
                    auto c = ch[j];
                    for (std::size_t y = begin[c]; y < end[c]; ++y) {
                        int ly = labels[y];
                        if (ly < 1 || static_cast<std::size_t>(ly) > L) continue;
                        for (std::size_t lx = 1; lx <= L; ++lx) {
                            if (!kind.matrix[lx - 1][static_cast<std::size_t>(ly - 1)]) continue;
                            for (auto x : seen[lx]) {
                                b.add_tuple(e, {u32(x), u32(y)});
                                b.add_tuple(e, {u32(y), u32(x)});
                            }
                        }
                    }
                    for (std::size_t y = begin[c]; y < end[c]; ++y)
                        if (labels[y] >= 1 && static_cast<std::size_t>(labels[y]) <= L)
                            seen[static_cast<std::size_t>(labels[y])].push_back(y);
                }
                break;
            }
            case OpKind::Tag::WordConcat: {
                if (kind.word == WordSignature::Order) {
                    const auto lt = voc->index_of("lt");
                    for (std::size_t j = 0; j + 1 < ch.size(); ++j)
                        for (std::size_t x = begin[ch[j]]; x < end[ch[j]]; ++x)
                            for (std::size_t y = end[ch[j]]; y < end[v]; ++y) b.add_tuple(lt, {u32(x), u32(y)});
                } else {
                    const auto succ = voc->index_of("succ");
                    for (std::size_t j = 0; j + 1 < ch.size(); ++j) {
                        if (begin[ch[j]] == end[ch[j]] || begin[ch[j + 1]] == end[ch[j + 1]]) continue;
                        b.add_tuple(succ, {u32(last[ch[j]]), u32(first[ch[j + 1]])});
                    }
                }
                break;
            }
            case OpKind::Tag::TreeBuild: {
                const std::size_t r = begin[v];
                if (!kind.root_mark.empty()) b.add_tuple(voc->index_of(kind.root_mark), {u32(r)});
                if (kind.tree == TreeSignature::AncestorOrder) {
                    const auto anc = voc->index_of("anc"), doc = voc->index_of("doc");
                    for (std::size_t y = r + 1; y < end[v]; ++y) {
                        b.add_tuple(anc, {u32(r), u32(y)});
                        b.add_tuple(doc, {u32(r), u32(y)});
                    }
                    for (std::size_t j = 0; j + 1 < ch.size(); ++j)
                        for (std::size_t x = begin[ch[j]]; x < end[ch[j]]; ++x)
                            for (std::size_t y = end[ch[j]]; y < end[v]; ++y) b.add_tuple(doc, {u32(x), u32(y)});
                } else {
                    const auto child = voc->index_of("child"), next = voc->index_of("next");
                    std::optional<std::size_t> prev;
                    for (auto c : ch) {
                        if (begin[c] == end[c]) continue;
                        b.add_tuple(child, {u32(r), u32(treeRoot[c])});
                        if (prev) b.add_tuple(next, {u32(*prev), u32(treeRoot[c])});
                        prev = treeRoot[c];
                    }
                }
                break;
            }
        }
    }
    return Evaluation{std::move(b).build(), std::move(owner), std::move(begin), std::move(end)};
}

}  // namespace ebsp
