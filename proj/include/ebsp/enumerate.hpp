#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ebsp/embedding.hpp"
#include "ebsp/structure.hpp"

namespace ebsp {

struct EnumerationOptions {
    /// Restrict every binary relation to symmetric, irreflexive interpretations
    /// (simple undirected graphs).
    bool simple_graphs = false;
    /// Refuse when the number of raw (unlabeled-by-isomorphism) candidates
    /// would exceed this.
    double raw_cap = 1 << 24;
};

namespace detail {

struct Slot {
    std::size_t relation;
    std::vector<std::uint32_t> tuple;
    std::vector<std::uint32_t> mirror;  // symmetric partner, empty if none
};

inline std::vector<Slot> tuple_slots(const Vocabulary& voc, std::size_t n, bool simpleGraphs) {
    std::vector<Slot> slots;
    for (std::size_t r = 0; r < voc.relations().size(); ++r) {
        int arity = voc.relations()[r].arity;
        if (simpleGraphs && arity == 2) {
            for (std::uint32_t i = 0; i < n; ++i)
                for (std::uint32_t j = i + 1; j < n; ++j) slots.push_back({r, {i, j}, {j, i}});
            continue;
        }
        if (n == 0) continue;
        std::vector<std::uint32_t> t(static_cast<std::size_t>(arity), 0);
        while (true) {
            slots.push_back({r, t, {}});
            int i = arity - 1;
            while (i >= 0 && ++t[static_cast<std::size_t>(i)] == n) t[static_cast<std::size_t>(i--)] = 0;
            if (i < 0) break;
        }
    }
    return slots;
}

inline double raw_count(const Vocabulary& voc, std::size_t n, bool simpleGraphs) {
    double bits = 0;
    for (auto& r : voc.relations()) {
        if (simpleGraphs && r.arity == 2)
            bits += static_cast<double>(n * (n ? n - 1 : 0) / 2);
        else
            bits += std::pow(static_cast<double>(n), r.arity);
    }
    return std::pow(2.0, bits) * std::pow(static_cast<double>(voc.label_count() + 1), static_cast<double>(n));
}

}  // namespace detail

/// Visits one canonical representative per isomorphism class of structures
/// with at most `maxSize` elements, in order of size. The callback returns
/// false to stop early.
inline void for_each_structure(const VocabularyPtr& voc, std::size_t maxSize,
                               const std::function<bool(const Structure&)>& visit,
                               const EnumerationOptions& options = {}) {
    double total = 0;
    for (std::size_t n = 0; n <= maxSize; ++n) total += detail::raw_count(*voc, n, options.simple_graphs);
    if (total > options.raw_cap)
        throw BudgetError("enumerate_structures: " + std::to_string(static_cast<long double>(total)) +
                          " raw candidates exceed cap " + std::to_string(static_cast<long double>(options.raw_cap)));

    const int k = voc->label_count();
    std::string own, other;
    for (std::size_t n = 0; n <= maxSize; ++n) {
        auto slots = detail::tuple_slots(*voc, n, options.simple_graphs);
        std::vector<int> labels(n, 0);
        while (true) {
            const std::size_t bits = slots.size();
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << bits); ++mask) {
                StructureBuilder b(voc);
                for (std::size_t i = 0; i < n; ++i) b.add_element(ElementId{i + 1}, labels[i]);
                for (std::size_t s = 0; s < bits; ++s) {
                    if (!((mask >> s) & 1u)) continue;
                    b.add_tuple(slots[s].relation, slots[s].tuple);
                    if (!slots[s].mirror.empty()) b.add_tuple(slots[s].relation, slots[s].mirror);
                }
                Structure candidate = std::move(b).build();
                std::vector<std::size_t> identity(n);
                for (std::size_t i = 0; i < n; ++i) identity[i] = i;
                detail::encode_permuted(candidate, identity, own);
                bool least = true;
                detail::for_each_label_sorted_permutation(candidate, [&](const std::vector<std::size_t>& perm) {
                    detail::encode_permuted(candidate, perm, other);
                    if (other < own) {
                        least = false;
                        return false;
                    }
                    return true;
                });
                if (least && !visit(candidate)) return;
            }
            // next label vector
            std::size_t i = 0;
            while (i < n && ++labels[i] > k) labels[i++] = 0;
            if (i == n) break;
        }
    }
}

inline std::vector<Structure> enumerate_structures(const VocabularyPtr& voc, std::size_t maxSize,
                                                   const EnumerationOptions& options = {}) {
    std::vector<Structure> out;
    for_each_structure(voc, maxSize, [&](const Structure& s) {
        out.push_back(s);
        return true;
    }, options);
    return out;
}

}  // namespace ebsp
