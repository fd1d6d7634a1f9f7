#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ebsp/alphabet.hpp"
#include "ebsp/error.hpp"

namespace ebsp {

struct TreeNode {
    SymbolRef symbol;
    std::vector<std::size_t> children;
    /// Stable identity; element ids of evaluated structures embed it.
    std::uint64_t key = 0;

    bool is_leaf() const { return symbol.leaf; }
};

/// Node addresses are child-index paths from the root ("/" is the root,
/// "/0/2" the third child of the first child).
using NodeAddress = std::vector<std::size_t>;

inline std::string to_string(const NodeAddress& a) {
    if (a.empty()) return "/";
    std::string s;
    for (auto i : a) s += "/" + std::to_string(i);
    return s;
}

inline NodeAddress parse_address(std::string_view s) {
    if (s.empty() || s[0] != '/') throw DomainError("address must start with '/'");
    NodeAddress a;
    std::size_t i = 1;
    while (i < s.size()) {
        std::size_t j = i;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        if (j == i) throw DomainError("malformed address '" + std::string(s) + "'");
        a.push_back(std::stoul(std::string(s.substr(i, j - i))));
        if (j < s.size() && s[j] != '/') throw DomainError("malformed address '" + std::string(s) + "'");
        i = j + 1;
    }
    return a;
}

/// Ordered operation tree stored as a preorder arena: node 0 is the root and
/// every child has a larger index than its parent.
class OpTree {
public:
    static constexpr std::uint64_t kMaxKey = (std::uint64_t{1} << 47) - 1;

    OpTree() = default;

    static OpTree leaf(std::size_t leafIndex, std::uint64_t key = 1) {
        OpTree t;
        t.nodes_.push_back({SymbolRef{true, leafIndex}, {}, key});
        t.nextKey_ = key + 1;
        return t;
    }

    /// Internal node over copies of `children` (keys renumbered to stay unique).
    static OpTree node(std::size_t opIndex, const std::vector<OpTree>& children) {
        OpTree t;
        t.nodes_.push_back({SymbolRef{false, opIndex}, {}, 1});
        t.nextKey_ = 2;
        for (auto& c : children) {
            std::size_t at = t.append_copy(c, 0, true);
            t.nodes_[0].children.push_back(at);
        }
        return t;
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }
    const TreeNode& operator[](std::size_t i) const { return nodes_[i]; }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::uint64_t next_key() const noexcept { return nextKey_; }

    std::vector<std::size_t> parents() const {
        std::vector<std::size_t> p(nodes_.size(), SIZE_MAX);
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            for (auto c : nodes_[i].children) p[c] = i;
        return p;
    }

    std::vector<std::size_t> depths() const {
        std::vector<std::size_t> d(nodes_.size(), 0);
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            for (auto c : nodes_[i].children) d[c] = d[i] + 1;
        return d;
    }

    /// Number of edges on the longest root-to-leaf path.
    std::size_t height() const {
        std::size_t h = 0;
        for (auto d : depths()) h = std::max(h, d);
        return h;
    }

    std::size_t max_degree() const {
        std::size_t m = 0;
        for (auto& n : nodes_) m = std::max(m, n.children.size());
        return m;
    }

    std::size_t leaf_count() const {
        std::size_t c = 0;
        for (auto& n : nodes_) c += n.is_leaf();
        return c;
    }

    /// Subtree sizes (node counts).
    std::vector<std::size_t> subtree_sizes() const {
        std::vector<std::size_t> s(nodes_.size(), 1);
        for (std::size_t i = nodes_.size(); i-- > 0;)
            for (auto c : nodes_[i].children) s[i] += s[c];
        return s;
    }

    NodeAddress address_of(std::size_t node) const {
        auto par = parents();
        NodeAddress a;
        while (node != 0) {
            auto p = par[node];
            auto& ch = nodes_[p].children;
            a.push_back(static_cast<std::size_t>(std::find(ch.begin(), ch.end(), node) - ch.begin()));
            node = p;
        }
        std::reverse(a.begin(), a.end());
        return a;
    }

    std::size_t node_at(const NodeAddress& a) const {
        if (nodes_.empty()) throw DomainError("empty tree");
        std::size_t n = 0;
        for (auto i : a) {
            if (i >= nodes_[n].children.size()) throw DomainError("invalid node address " + to_string(a));
            n = nodes_[n].children[i];
        }
        return n;
    }

    std::optional<std::size_t> find_key(std::uint64_t key) const {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].key == key) return i;
        return std::nullopt;
    }

    /// Copy of the subtree rooted at `node`; keys are kept.
    OpTree subtree(std::size_t node) const {
        OpTree t;
        t.append_copy(*this, node, false);
        t.nextKey_ = nextKey_;
        return t;
    }

    /// Checks arity discipline against the alphabet.
    void validate(const Alphabet& alpha) const {
        if (nodes_.empty()) throw DomainError("empty tree");
        std::unordered_set<std::uint64_t> keys;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& n = nodes_[i];
            if (!keys.insert(n.key).second) throw DomainError("duplicate node key " + std::to_string(n.key));
            if (n.key == 0 || n.key > kMaxKey) throw DomainError("node key out of range");
            for (auto c : n.children)
                if (c <= i || c >= nodes_.size()) throw DomainError("tree arena is not in preorder");
            if (n.is_leaf()) {
                if (n.symbol.index >= alpha.leaves().size()) throw DomainError("leaf symbol out of range");
                if (!n.children.empty()) throw DomainError("leaf node with children");
                continue;
            }
            if (n.symbol.index >= alpha.ops().size()) throw DomainError("op symbol out of range");
            const auto& op = alpha.op(n.symbol.index);
            if (!op.allows(n.children.size()))
                throw DomainError("arity " + std::to_string(n.children.size()) + " not allowed for '" + op.name +
                                  "' (allowed: " + op.allowed_text() + ") at " + to_string(address_of(i)));
        }
    }

    /// Builds a tree from preorder nodes whose `children` are indices into
    /// `nodes` (must already be preorder). Used by the reductions.
    static OpTree from_nodes(std::vector<TreeNode> nodes, std::uint64_t nextKey) {
        OpTree t;
        t.nodes_ = std::move(nodes);
        t.nextKey_ = nextKey;
        for (auto& n : t.nodes_) t.nextKey_ = std::max(t.nextKey_, n.key + 1);
        return t;
    }

    std::uint64_t fresh_key() { return nextKey_++; }

    /// Copies the subtree of `src` at `node` to the end of this arena in
    /// preorder and returns the index of its root. With `renumber`, nodes get
    /// fresh keys.
    std::size_t append_copy(const OpTree& src, std::size_t node, bool renumber) {
        const std::size_t base = nodes_.size();
        struct Frame {
            std::size_t src, dstParent;
        };
        std::vector<Frame> stack{{node, SIZE_MAX}};
        while (!stack.empty()) {
            auto [s, parent] = stack.back();
            stack.pop_back();
            std::size_t at = nodes_.size();
            const auto& sn = src.nodes_[s];
            nodes_.push_back({sn.symbol, {}, renumber ? nextKey_++ : sn.key});
            if (!renumber) nextKey_ = std::max(nextKey_, sn.key + 1);
            if (parent != SIZE_MAX) nodes_[parent].children.push_back(at);
            for (auto it = sn.children.rbegin(); it != sn.children.rend(); ++it) stack.push_back({*it, at});
        }
        return base;
    }

    friend bool operator==(const OpTree& a, const OpTree& b) {
        if (a.nodes_.size() != b.nodes_.size()) return false;
        for (std::size_t i = 0; i < a.nodes_.size(); ++i)
            if (!(a.nodes_[i].symbol == b.nodes_[i].symbol) || a.nodes_[i].children != b.nodes_[i].children)
                return false;
        return true;
    }

private:
    std::vector<TreeNode> nodes_;
    std::uint64_t nextKey_ = 1;
};

/// Same shape and symbols (keys ignored).
inline bool same_shape(const OpTree& a, const OpTree& b) { return a == b; }

/// Replaces the subtree at `at` with `replacement`. Retained nodes keep
/// their keys; replacement nodes keep theirs unless they collide.
inline OpTree subtree_replace(const OpTree& t, const NodeAddress& at, const OpTree& replacement,
                              const Alphabet* alpha = nullptr) {
    if (replacement.empty()) throw DomainError("subtree_replace: empty replacement");
    const std::size_t target = t.node_at(at);
    std::unordered_set<std::uint64_t> retained;
    {
        auto sizes = t.subtree_sizes();
        for (std::size_t i = 0; i < t.size(); ++i)
            if (i < target || i >= target + sizes[target]) retained.insert(t[i].key);
    }
    std::uint64_t nextKey = std::max(t.next_key(), replacement.next_key());
    std::vector<TreeNode> out;
    out.reserve(t.size() + replacement.size());
    // iterative preorder copy of t, splicing the replacement at `target`
    struct Frame {
        const OpTree* src;
        std::size_t node, parent;
    };
    std::vector<Frame> stack{{&t, 0, SIZE_MAX}};
    while (!stack.empty()) {
        auto f = stack.back();
        stack.pop_back();
        if (f.src == &t && f.node == target) f = {&replacement, 0, f.parent};
        const auto& sn = (*f.src)[f.node];
        std::uint64_t key = sn.key;
        if (f.src == &replacement && retained.count(key)) key = nextKey++;
        if (f.src == &replacement) retained.insert(key);
        std::size_t at = out.size();
        out.push_back({sn.symbol, {}, key});
        if (f.parent != SIZE_MAX) out[f.parent].children.push_back(at);
        for (auto it = sn.children.rbegin(); it != sn.children.rend(); ++it) stack.push_back({f.src, *it, at});
    }
    auto r = OpTree::from_nodes(std::move(out), nextKey);
    if (alpha) r.validate(*alpha);
    return r;
}

// ---------------------------------------------------------------------------
// S-expressions: tree := "(" "leaf" SYMBOL ")" | "(" SYMBOL tree+ ")"
// ---------------------------------------------------------------------------

inline OpTree parse_tree(std::string_view text, const Alphabet& alpha) {
    std::size_t pos = 0, line = 1, col = 1;
    auto fail = [&](const std::string& msg) -> void { throw ParseError(msg, line, col); };
    auto advance = [&] {
        if (text[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    };
    auto skip = [&] {
        while (pos < text.size()) {
            if (std::isspace(static_cast<unsigned char>(text[pos]))) {
                advance();
            } else if (text[pos] == ';' || text[pos] == '#') {
                while (pos < text.size() && text[pos] != '\n') advance();
            } else {
                break;
            }
        }
    };
    auto symbol = [&]() -> std::string {
        skip();
        std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) && text[pos] != '(' &&
               text[pos] != ')')
            advance();
        if (pos == start) fail("expected symbol");
        return std::string(text.substr(start, pos - start));
    };

    std::vector<TreeNode> nodes;
    struct Open {
        std::size_t node;
        std::size_t line, col;
    };
    std::vector<Open> stack;
    std::uint64_t key = 1;
    skip();
    bool done = false;
    while (!done) {
        skip();
        if (pos >= text.size()) {
            if (stack.empty()) fail("empty tree");
            fail("unexpected end of input (unclosed '(')");
        }
        if (text[pos] == '(') {
            std::size_t l = line, c = col;
            advance();
            auto name = symbol();
            std::size_t at = nodes.size();
            if (name == "leaf") {
                auto leafName = symbol();
                auto idx = alpha.find_leaf(leafName);
                if (!idx) fail("unknown leaf symbol '" + leafName + "'");
                nodes.push_back({SymbolRef{true, *idx}, {}, key++});
                skip();
                if (pos >= text.size() || text[pos] != ')') fail("expected ')' after leaf symbol");
                advance();
                if (!stack.empty()) nodes[stack.back().node].children.push_back(at);
                if (stack.empty()) done = true;
            } else {
                auto idx = alpha.find_op(name);
                if (!idx) {
                    if (alpha.find_leaf(name)) fail("leaf symbol '" + name + "' must be written (leaf " + name + ")");
                    fail("unknown op symbol '" + name + "'");
                }
                nodes.push_back({SymbolRef{false, *idx}, {}, key++});
                if (!stack.empty()) nodes[stack.back().node].children.push_back(at);
                stack.push_back({at, l, c});
            }
        } else if (text[pos] == ')') {
            if (stack.empty()) fail("unbalanced ')'");
            auto open = stack.back();
            stack.pop_back();
            const auto& n = nodes[open.node];
            const auto& op = alpha.op(n.symbol.index);
            if (n.children.empty()) throw ParseError("op '" + op.name + "' needs at least one child", open.line, open.col);
            if (!op.allows(n.children.size()))
                throw ParseError("arity " + std::to_string(n.children.size()) + " not allowed for '" + op.name +
                                     "' (allowed: " + op.allowed_text() + ")",
                                 open.line, open.col);
            advance();
            if (stack.empty()) done = true;
        } else {
            fail("expected '('");
        }
    }
    skip();
    if (pos < text.size()) fail("trailing input after tree");
    return OpTree::from_nodes(std::move(nodes), key);
}

inline std::string to_sexp(const OpTree& t, const Alphabet& alpha) {
    std::string out;
    struct Frame {
        std::size_t node, next;
    };
    std::vector<Frame> stack{{0, 0}};
    while (!stack.empty()) {
        auto& f = stack.back();
        const auto& n = t[f.node];
        if (n.is_leaf()) {
            if (!out.empty() && out.back() != '(') out += ' ';
            out += "(leaf " + alpha.name(n.symbol) + ")";
            stack.pop_back();
            continue;
        }
        if (f.next == 0) {
            if (!out.empty() && out.back() != '(') out += ' ';
            out += "(" + alpha.name(n.symbol);
        }
        if (f.next < n.children.size()) {
            std::size_t c = n.children[f.next++];
            stack.push_back({c, 0});
        } else {
            out += ')';
            stack.pop_back();
        }
    }
    return out;
}

}  // namespace ebsp
