#pragma once

// Independent brute-force reference implementations used by the tests. They
// deliberately share no code with the library beyond the Structure type.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ebsp/structure.hpp"

namespace oracle {

using ebsp::Structure;

inline bool same_under(const Structure& a, const Structure& b, const std::vector<std::size_t>& p) {
    // p maps a-index -> b-index
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.label(i) != b.label(p[i])) return false;
    for (std::size_t r = 0; r < a.relation_count(); ++r) {
        if (a.relation(r).size() != b.relation(r).size()) return false;
        std::vector<std::uint32_t> t;
        for (std::size_t k = 0; k < a.relation(r).size(); ++k) {
            t.clear();
            for (auto x : a.relation(r).tuple(k)) t.push_back(static_cast<std::uint32_t>(p[x]));
            if (!b.holds(r, t)) return false;
        }
    }
    return true;
}

inline bool isomorphic(const Structure& a, const Structure& b) {
    if (a.size() != b.size()) return false;
    std::vector<std::size_t> p(a.size());
    std::iota(p.begin(), p.end(), 0);
    do {
        if (same_under(a, b, p)) return true;
    } while (std::next_permutation(p.begin(), p.end()));
    return false;
}

/// Adjacency-style key under permutation p (new position -> old index).
inline std::string key(const Structure& a, const std::vector<std::size_t>& p) {
    std::string s;
    for (auto i : p) s += std::to_string(a.label(i)) + ".";
    for (std::size_t r = 0; r < a.relation_count(); ++r) {
        s += "#";
        int ar = a.vocabulary().relations()[r].arity;
        std::size_t n = a.size();
        std::size_t total = 1;
        for (int i = 0; i < ar; ++i) total *= n;
        for (std::size_t code = 0; code < total && n > 0; ++code) {
            std::vector<std::uint32_t> t(static_cast<std::size_t>(ar));
            std::size_t c = code;
            for (int i = ar - 1; i >= 0; --i) {
                t[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(p[c % n]);
                c /= n;
            }
            s += a.holds(r, t) ? '1' : '0';
        }
    }
    return s;
}

inline std::string canonical_key(const Structure& a) {
    std::vector<std::size_t> p(a.size());
    std::iota(p.begin(), p.end(), 0);
    std::string best;
    bool have = false;
    do {
        auto k = key(a, p);
        if (!have || k < best) best = k, have = true;
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

inline Structure random_graph(std::mt19937_64& rng, std::size_t n, double p, bool symmetric, int labels = 0,
                              bool loops = false) {
    auto voc = ebsp::make_vocabulary({{"E", 2}}, labels);
    ebsp::StructureBuilder b(voc);
    std::uniform_int_distribution<int> lab(0, labels);
    std::bernoulli_distribution coin(p);
    for (std::size_t i = 0; i < n; ++i) b.add_element(ebsp::ElementId{i + 1}, labels ? lab(rng) : 0);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = symmetric ? i : 0; j < n; ++j) {
            if (i == j && !loops) continue;
            if (!coin(rng)) continue;
            b.add_tuple(0, {i, j});
            if (symmetric && i != j) b.add_tuple(0, {j, i});
        }
    return std::move(b).build();
}

/// Simple undirected graph from an edge list over 0..n-1.
inline Structure graph(std::size_t n, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges, int labels = 0) {
    auto voc = ebsp::make_vocabulary({{"E", 2}}, labels);
    ebsp::StructureBuilder b(voc);
    for (std::size_t i = 0; i < n; ++i) b.add_element(ebsp::ElementId{i + 1});
    for (auto [x, y] : edges) {
        b.add_tuple(0, {x, y});
        b.add_tuple(0, {y, x});
    }
    return std::move(b).build();
}

inline Structure linear_order(std::size_t n) {
    auto voc = ebsp::make_vocabulary({{"lt", 2}});
    ebsp::StructureBuilder b(voc);
    for (std::size_t i = 0; i < n; ++i) b.add_element(ebsp::ElementId{i + 1});
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j) b.add_tuple(0, {i, j});
    return std::move(b).build();
}

inline Structure cycle(std::size_t n) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> e;
    for (std::uint32_t i = 0; i < n; ++i) e.push_back({i, static_cast<std::uint32_t>((i + 1) % n)});
    return graph(n, e);
}

inline Structure isolated(std::size_t n) { return graph(n, {}); }

inline Structure permuted(const Structure& a, std::mt19937_64& rng) {
    std::vector<std::size_t> p(a.size());
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    return ebsp::restrict_to_indices(a, p);
}

}  // namespace oracle
