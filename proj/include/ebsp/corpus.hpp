#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ebsp/alphabet.hpp"
#include "ebsp/optree.hpp"

namespace ebsp {

struct RandomTreeOptions {
    std::size_t min_leaves = 1;
    std::size_t max_leaves = 10;
    /// Chance that an unranked node takes one more block of rho-1 children.
    double widen = 0.35;
};

namespace detail {

inline OpTree random_tree_with(const Alphabet& a, std::mt19937_64& rng, std::size_t leaves, double widen) {
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    std::bernoulli_distribution more(widen);
    // explicit stack of (budget, parent slot) so deep trees never recurse
    struct Job {
        std::size_t budget;
        std::size_t parent;
    };
    std::vector<TreeNode> nodes;
    std::vector<Job> stack{{leaves, SIZE_MAX}};
    std::uint64_t key = 1;
    while (!stack.empty()) {
        auto job = stack.back();
        stack.pop_back();
        std::vector<std::size_t> fits;
        if (job.budget > 1)
            for (std::size_t i = 0; i < a.ops().size(); ++i)
                if (static_cast<std::size_t>(a.op(i).rho) <= job.budget) fits.push_back(i);
        const std::size_t at = nodes.size();
        if (fits.empty()) {
            nodes.push_back({SymbolRef{true, pick(a.leaves().size())}, {}, key++});
        } else {
            const auto opIndex = fits[pick(fits.size())];
            const auto& op = a.op(opIndex);
            const auto rho = static_cast<std::size_t>(op.rho);
            std::size_t arity = rho;
            if (!op.ranked)
                while (arity + rho - 1 <= job.budget && more(rng)) arity += rho - 1;
            std::vector<std::size_t> share(arity, 1);
            for (std::size_t extra = job.budget - arity; extra > 0; --extra) ++share[pick(arity)];
            nodes.push_back({SymbolRef{false, opIndex}, {}, key++});
            for (auto it = share.rbegin(); it != share.rend(); ++it) stack.push_back({*it, at});
        }
        if (job.parent != SIZE_MAX) nodes[job.parent].children.push_back(at);
    }
    return OpTree::from_nodes(std::move(nodes), key);
}

}  // namespace detail

/// Random arity-valid tree. Leaves and ops are drawn uniformly; the leaf
/// count is uniform in [min_leaves, max_leaves] and exact.
inline OpTree random_tree(const Alphabet& a, std::mt19937_64& rng, const RandomTreeOptions& opt = {}) {
    if (a.leaves().empty()) throw DomainError("random_tree: alphabet has no leaves");
    if (opt.min_leaves < 1 || opt.min_leaves > opt.max_leaves) throw DomainError("random_tree: bad leaf range");
    auto n = std::uniform_int_distribution<std::size_t>(opt.min_leaves, opt.max_leaves)(rng);
    return detail::random_tree_with(a, rng, n, opt.widen);
}

/// Left comb O(O(..O(l, l)..), l) with n leaves over a rank-2 op.
inline OpTree left_comb(const Alphabet& a, std::size_t op, std::size_t leaf, std::size_t n) {
    if (n == 0) throw DomainError("left_comb: need at least one leaf");
    std::vector<TreeNode> nodes;
    // preorder: the spine of n-1 ops, then for each op from the bottom its
    // right leaf; leftmost leaf sits under the deepest op.
    const std::size_t ops = n - 1;
    std::uint64_t key = 1;
    for (std::size_t i = 0; i < ops; ++i) nodes.push_back({SymbolRef{false, op}, {}, key++});
    nodes.push_back({SymbolRef{true, leaf}, {}, key++});
    for (std::size_t i = ops; i-- > 0;) {
        auto left = i + 1;
        nodes[i].children.push_back(left);
        nodes.push_back({SymbolRef{true, leaf}, {}, key++});
        nodes[i].children.push_back(nodes.size() - 1);
    }
    // preorder requires each op's right leaf to follow its whole left subtree,
    // which holds: the left subtree of op i is ops i+1.., the first leaf and
    // the right leaves of ops below i, all pushed before op i's right leaf.
    auto t = OpTree::from_nodes(std::move(nodes), key);
    t.validate(a);
    return t;
}

/// Flat node O(l, ..., l) with n children.
inline OpTree flat_node(const Alphabet& a, std::size_t op, std::size_t leaf, std::size_t n) {
    std::vector<TreeNode> nodes{{SymbolRef{false, op}, {}, 1}};
    for (std::size_t i = 0; i < n; ++i) {
        nodes.push_back({SymbolRef{true, leaf}, {}, i + 2});
        nodes[0].children.push_back(i + 1);
    }
    auto t = OpTree::from_nodes(std::move(nodes), n + 2);
    t.validate(a);
    return t;
}

}  // namespace ebsp
