#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ebsp/structure.hpp"

namespace ebsp {

/// Injective map from B's element indices to A's element indices.
struct Embedding {
    std::vector<std::size_t> image;
};

namespace detail {

/// Relation index of B matched by name in A; nullopt when A lacks the symbol.
inline std::vector<std::optional<std::size_t>> match_relations(const Structure& b, const Structure& a) {
    std::vector<std::optional<std::size_t>> out;
    for (auto& sym : b.vocabulary().relations()) {
        auto r = a.vocabulary().find(sym.name);
        if (r && a.vocabulary().relations()[*r].arity != sym.arity) r.reset();
        out.push_back(r);
    }
    return out;
}

/// Checks every tuple over `assigned` (B indices, images in `image`) that
/// mentions the last assigned element.
class TupleChecker {
public:
    TupleChecker(const Structure& b, const Structure& a) : b_(b), a_(a), match_(match_relations(b, a)) {
        for (auto& sym : a.vocabulary().relations())
            if (!b.vocabulary().find(sym.name)) extraInA_.push_back(*a.vocabulary().find(sym.name));
    }

    bool consistent(const std::vector<std::size_t>& order, std::size_t depth, const std::vector<std::size_t>& image) {
        for (std::size_t r = 0; r < b_.relation_count(); ++r) {
            int arity = b_.vocabulary().relations()[r].arity;
            if (!check(order, depth, image, arity, [&](std::span<const std::uint32_t> tb,
                                                       std::span<const std::uint32_t> ta) {
                    bool inB = b_.holds(r, tb);
                    bool inA = match_[r] ? a_.holds(*match_[r], ta) : false;
                    return inA == inB;
                }))
                return false;
        }
        for (auto r : extraInA_) {
            int arity = a_.vocabulary().relations()[r].arity;
            if (!check(order, depth, image, arity, [&](std::span<const std::uint32_t>, std::span<const std::uint32_t> ta) {
                    return !a_.holds(r, ta);
                }))
                return false;
        }
        return true;
    }

private:
    template <class F>
    bool check(const std::vector<std::size_t>& order, std::size_t depth, const std::vector<std::size_t>& image,
               int arity, F&& ok) {
        const std::size_t k = depth + 1;
        std::vector<std::size_t> pos(static_cast<std::size_t>(arity), 0);
        tb_.assign(static_cast<std::size_t>(arity), 0);
        ta_.assign(static_cast<std::size_t>(arity), 0);
        while (true) {
            bool mentionsLast = false;
            for (int i = 0; i < arity; ++i) {
                std::size_t p = pos[static_cast<std::size_t>(i)];
                if (p == depth) mentionsLast = true;
                tb_[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(order[p]);
                ta_[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(image[order[p]]);
            }
            if (mentionsLast && !ok(std::span<const std::uint32_t>(tb_), std::span<const std::uint32_t>(ta_)))
                return false;
            int i = arity - 1;
            while (i >= 0 && ++pos[static_cast<std::size_t>(i)] == k) pos[static_cast<std::size_t>(i--)] = 0;
            if (i < 0) break;
        }
        return true;
    }

    const Structure& b_;
    const Structure& a_;
    std::vector<std::optional<std::size_t>> match_;
    std::vector<std::size_t> extraInA_;
    std::vector<std::uint32_t> tb_, ta_;
};

}  // namespace detail

/// Induced-substructure embedding of B into A (relations and labels are
/// preserved and reflected), or nullopt. Exhaustive backtracking; the caller
/// bounds |B|.
inline std::optional<Embedding> is_embeddable(const Structure& b, const Structure& a) {
    if (b.size() > a.size()) return std::nullopt;
    const std::size_t n = b.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> image(n, 0);
    std::vector<char> used(a.size(), 0);
    detail::TupleChecker checker(b, a);

    std::function<bool(std::size_t)> place = [&](std::size_t depth) -> bool {
        if (depth == n) return true;
        std::size_t e = order[depth];
        for (std::size_t c = 0; c < a.size(); ++c) {
            if (used[c] || a.label(c) != b.label(e)) continue;
            image[e] = c;
            if (!checker.consistent(order, depth, image)) continue;
            used[c] = 1;
            if (place(depth + 1)) return true;
            used[c] = 0;
        }
        return false;
    };
    if (!place(0)) return std::nullopt;
    return Embedding{image};
}

inline bool isomorphic(const Structure& a, const Structure& b) {
    return a.size() == b.size() && is_embeddable(a, b).has_value();
}

namespace detail {

/// Encoding of A with element i placed at position perm-inverse; `perm[p]` is
/// the old index occupying new position p. Labels first, then each relation's
/// characteristic vector in lexicographic tuple order.
inline void encode_permuted(const Structure& a, const std::vector<std::size_t>& perm, std::string& out) {
    out.clear();
    const std::size_t n = a.size();
    for (std::size_t p = 0; p < n; ++p) out.push_back(static_cast<char>('0' + a.label(perm[p])));
    std::vector<std::uint32_t> t;
    for (std::size_t r = 0; r < a.relation_count(); ++r) {
        out.push_back('|');
        int arity = a.vocabulary().relations()[r].arity;
        std::vector<std::size_t> pos(static_cast<std::size_t>(arity), 0);
        t.assign(static_cast<std::size_t>(arity), 0);
        if (n == 0) continue;
        while (true) {
            for (int i = 0; i < arity; ++i)
                t[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(perm[pos[static_cast<std::size_t>(i)]]);
            out.push_back(a.holds(r, t) ? '1' : '0');
            int i = arity - 1;
            while (i >= 0 && ++pos[static_cast<std::size_t>(i)] == n) pos[static_cast<std::size_t>(i--)] = 0;
            if (i < 0) break;
        }
    }
}

/// Visits permutations that keep labels non-decreasing (the lexicographically
/// least encoding always has sorted labels).
template <class F>
void for_each_label_sorted_permutation(const Structure& a, F&& visit) {
    const std::size_t n = a.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) { return a.label(x) < a.label(y); });
    // permute independently within each block of equal labels
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && a.label(perm[j]) == a.label(perm[i])) ++j;
        blocks.emplace_back(i, j);
        i = j;
    }
    std::function<bool(std::size_t)> rec = [&](std::size_t b) -> bool {
        if (b == blocks.size()) return visit(perm);
        auto [lo, hi] = blocks[b];
        std::sort(perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(hi));
        do {
            if (!rec(b + 1)) return false;
        } while (std::next_permutation(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                                       perm.begin() + static_cast<std::ptrdiff_t>(hi)));
        return true;
    };
    rec(0);
}

}  // namespace detail

/// Lexicographically least encoding over all element orders; equal for two
/// structures iff they are isomorphic (same vocabulary assumed).
inline std::string canonical_encoding(const Structure& a) {
    std::string best, cur;
    bool have = false;
    detail::for_each_label_sorted_permutation(a, [&](const std::vector<std::size_t>& perm) {
        detail::encode_permuted(a, perm, cur);
        if (!have || cur < best) {
            best = cur;
            have = true;
        }
        return true;
    });
    if (!have) detail::encode_permuted(a, {}, best);
    return best;
}

/// Isomorphic copy whose element order realizes the canonical encoding; ids 1..n.
inline Structure canonical_form(const Structure& a) {
    std::string best, cur;
    std::vector<std::size_t> bestPerm;
    bool have = false;
    detail::for_each_label_sorted_permutation(a, [&](const std::vector<std::size_t>& perm) {
        detail::encode_permuted(a, perm, cur);
        if (!have || cur < best) {
            best = cur;
            bestPerm = perm;
            have = true;
        }
        return true;
    });
    return renumbered(restrict_to_indices(a, bestPerm));
}

}  // namespace ebsp
