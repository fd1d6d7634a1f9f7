#pragma once

// Alphabets and trees shared by the test files.

#include <functional>
#include <random>
#include <string>

#include "ebsp/alphabet.hpp"
#include "ebsp/optree.hpp"

namespace fixture {

using namespace ebsp;

inline Alphabet unions() {
    return parse_alphabet(
        "leaf v point\n"
        "leaf e2 point 1\n"
        "op union union 2\n");
}

/// Two-label cograph operators: O_f with f = [1], and with f joining 1-2 only.
inline Alphabet cographs() {
    return parse_alphabet(
        "leaf p1 point 1\n"
        "leaf p2 point 2\n"
        "op join cograph 2 11;11\n"
        "op bip cograph 2 01;10\n"
        "op union union 2\n");
}

inline Alphabet words() {
    return parse_alphabet(
        "leaf a point\n"
        "leaf b point 1\n"
        "op cat concat 2\n");
}

inline Alphabet trees() {
    return parse_alphabet(
        "leaf x point\n"
        "leaf y point 1\n"
        "op node tree 2\n"
        "op bin tree 2 ranked label=1\n");
}

/// Left comb O(O(..O(l, l)..), l) with n leaves.
inline OpTree comb(const Alphabet& a, const std::string& op, const std::string& leaf, std::size_t n) {
    std::string s = "(leaf " + leaf + ")";
    for (std::size_t i = 1; i < n; ++i) s = "(" + op + " " + s + " (leaf " + leaf + "))";
    return parse_tree(s, a);
}

/// Flat node O(l, ..., l) with n children.
inline OpTree flat(const Alphabet& a, const std::string& op, const std::string& leaf, std::size_t n) {
    std::string s = "(" + op;
    for (std::size_t i = 0; i < n; ++i) s += " (leaf " + leaf + ")";
    return parse_tree(s + ")", a);
}

/// Random arity-valid tree with at most `maxLeaves` leaves.
inline OpTree random_tree(const Alphabet& a, std::mt19937_64& rng, std::size_t maxLeaves) {
    std::uniform_int_distribution<std::size_t> leafCount(1, maxLeaves);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    std::function<OpTree(std::size_t)> build = [&](std::size_t budget) -> OpTree {
        if (budget <= 1 || pick(5) == 0) return OpTree::leaf(pick(a.leaves().size()));
        // choose an op whose minimal arity fits
        std::vector<std::size_t> fits;
        for (std::size_t i = 0; i < a.ops().size(); ++i)
            if (static_cast<std::size_t>(a.op(i).rho) <= budget) fits.push_back(i);
        if (fits.empty()) return OpTree::leaf(pick(a.leaves().size()));
        const auto& op = a.op(fits[pick(fits.size())]);
        std::size_t arity = static_cast<std::size_t>(op.rho);
        if (!op.ranked)
            while (arity + static_cast<std::size_t>(op.rho) - 1 <= budget && pick(3) == 0) arity += static_cast<std::size_t>(op.rho) - 1;
        std::vector<std::size_t> share(arity, 1);
        for (std::size_t extra = budget - arity; extra > 0; --extra) ++share[pick(arity)];
        std::vector<OpTree> kids;
        for (auto s : share) kids.push_back(build(s));
        return OpTree::node(*a.find_op(op.name), kids);
    };
    return build(leafCount(rng));
}

}  // namespace fixture
