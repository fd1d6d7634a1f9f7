#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ebsp/enumerate.hpp"
#include "ebsp/error.hpp"
#include "ebsp/eval.hpp"
#include "ebsp/formula.hpp"
#include "ebsp/structure.hpp"

namespace ebsp {

/// Membership test relativizing the checks to a class of structures.
using StructureFilter = std::function<bool(const Structure&)>;

struct PreservationOptions {
    /// Largest universe whose 2^n substructures are examined.
    std::size_t max_universe = 6;
    EnumerationOptions enumeration;
    /// When set, only structures in the class count: the enumerated A and
    /// the substructures examined inside A.
    StructureFilter filter;
};

struct CruxCertificate {
    Structure structure;
    ElementSet crux;
    /// Substructures S with C ⊆ S ⊆ universe checked (all satisfy phi).
    std::size_t checked = 0;
};

enum class Verdict { TrueUpToN, False };

inline const char* to_string(Verdict v) { return v == Verdict::TrueUpToN ? "TRUE-UP-TO-N" : "FALSE"; }

struct PreservationReport {
    Verdict verdict = Verdict::TrueUpToN;
    int k = 0;
    std::size_t max_size = 0;
    std::size_t structures = 0;  // isomorphism classes enumerated (after the filter)
    std::size_t relevant = 0;    // models of phi (psc) or covered non-models candidates (pce)
    std::optional<Structure> counterexample;
    /// pce: the cover of the counterexample, one maximal member per small subset.
    std::vector<Structure> cover;

    bool holds() const { return verdict == Verdict::TrueUpToN; }
    std::string verdict_text() const {
        return holds() ? "TRUE-UP-TO-" + std::to_string(max_size) : "FALSE";
    }
};

namespace detail {

/// phi on every induced substructure of `a`, indexed by element bitmask.
/// Substructures outside the filter are reported through `inClass`.
inline std::vector<char> substructure_truth(const Formula& phi, const Structure& a, const PreservationOptions& opt,
                                            std::vector<char>* inClass = nullptr) {
    const std::size_t n = a.size();
    if (n > opt.max_universe || n >= 63)
        throw BudgetError("substructure check: " + std::to_string(n) + " elements means 2^" + std::to_string(n) +
                          " substructures; universe cap is " + std::to_string(opt.max_universe));
    const std::uint64_t full = std::uint64_t{1} << n;
    std::vector<char> sat(full, 0);
    if (inClass) inClass->assign(full, 1);
    std::vector<std::size_t> keep;
    for (std::uint64_t mask = 0; mask < full; ++mask) {
        keep.clear();
        for (std::size_t i = 0; i < n; ++i)
            if ((mask >> i) & 1u) keep.push_back(i);
        auto s = restrict_to_indices(a, keep);
        if (opt.filter && !opt.filter(s)) {
            if (inClass) (*inClass)[mask] = 0;
            sat[mask] = 1;  // outside the class: no constraint
            continue;
        }
        sat[mask] = eval_formula(phi, s) ? 1 : 0;
    }
    return sat;
}

/// all_above[C] = every superset S ⊇ C has sat[S].
inline std::vector<char> superset_and(std::vector<char> v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::uint64_t mask = 0; mask < v.size(); ++mask)
            if (!((mask >> i) & 1u)) v[mask] = static_cast<char>(v[mask] & v[mask | (std::uint64_t{1} << i)]);
    return v;
}

/// Visits subsets of {0..n-1} of size ≤ k by size, then lexicographically.
inline bool for_each_small_subset(std::size_t n, int k, const std::function<bool(std::uint64_t)>& visit) {
    const std::size_t top = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(k, 0)));
    for (std::size_t size = 0; size <= top; ++size) {
        std::vector<std::size_t> idx(size);
        for (std::size_t i = 0; i < size; ++i) idx[i] = i;
        while (true) {
            std::uint64_t mask = 0;
            for (auto i : idx) mask |= std::uint64_t{1} << i;
            if (!visit(mask)) return false;
            std::size_t j = size;
            while (j > 0 && idx[j - 1] == n - size + j - 1) --j;
            if (j == 0) break;
            ++idx[j - 1];
            for (std::size_t t = j; t < size; ++t) idx[t] = idx[t - 1] + 1;
        }
    }
    return true;
}

inline ElementSet ids_of(const Structure& a, std::uint64_t mask) {
    std::vector<ElementId> out;
    for (std::size_t i = 0; i < a.size(); ++i)
        if ((mask >> i) & 1u) out.push_back(a.id(i));
    return ElementSet(std::move(out));
}

inline std::optional<std::uint64_t> crux_mask(const std::vector<char>& sat, std::size_t n, int k, std::size_t& checked) {
    auto good = superset_and(sat, n);
    std::optional<std::uint64_t> found;
    for_each_small_subset(n, k, [&](std::uint64_t c) {
        if (!good[c]) return true;
        found = c;
        return false;
    });
    if (found) checked = std::size_t{1} << (n - static_cast<std::size_t>(__builtin_popcountll(*found)));
    return found;
}

}  // namespace detail

/// A set C of at most k elements such that every induced substructure
/// containing C satisfies phi; nullopt when there is none.
inline std::optional<CruxCertificate> find_crux(const Formula& phi, const Structure& a, int k,
                                                const PreservationOptions& opt = {}) {
    if (k < 0) throw DomainError("crux: negative k");
    if (!is_sentence(phi)) throw DomainError("crux: phi must be a sentence");
    if (!eval_formula(phi, a)) throw DomainError("crux: the structure is not a model of phi");
    auto sat = detail::substructure_truth(phi, a, opt);
    std::size_t checked = 0;
    auto c = detail::crux_mask(sat, a.size(), k, checked);
    if (!c) return std::nullopt;
    return CruxCertificate{a, detail::ids_of(a, *c), checked};
}

/// Every model of phi with at most maxSize elements has a k-crux.
inline PreservationReport psc_check(const Formula& phi, const VocabularyPtr& voc, int k, std::size_t maxSize,
                                    const PreservationOptions& opt = {}) {
    if (k < 0) throw DomainError("psc: negative k");
    if (!is_sentence(phi)) throw DomainError("psc: phi must be a sentence");
    PreservationReport rep;
    rep.k = k;
    rep.max_size = maxSize;
    for_each_structure(voc, maxSize, [&](const Structure& a) {
        if (opt.filter && !opt.filter(a)) return true;
        ++rep.structures;
        if (!eval_formula(phi, a)) return true;
        ++rep.relevant;
        auto sat = detail::substructure_truth(phi, a, opt);
        std::size_t checked = 0;
        if (detail::crux_mask(sat, a.size(), k, checked)) return true;
        rep.verdict = Verdict::False;
        rep.counterexample = a;
        return false;
    }, opt.enumeration);
    return rep;
}

/// Every structure with at most maxSize elements that has a k-ary cover by
/// induced substructures modelling phi models phi itself. Covers are
/// checked through maximal candidates: one largest phi-model substructure
/// per subset of at most k elements.
inline PreservationReport pce_check(const Formula& phi, const VocabularyPtr& voc, int k, std::size_t maxSize,
                                    const PreservationOptions& opt = {}) {
    if (k < 0) throw DomainError("pce: negative k");
    if (!is_sentence(phi)) throw DomainError("pce: phi must be a sentence");
    PreservationReport rep;
    rep.k = k;
    rep.max_size = maxSize;
    for_each_structure(voc, maxSize, [&](const Structure& a) {
        if (opt.filter && !opt.filter(a)) return true;
        ++rep.structures;
        if (eval_formula(phi, a)) return true;
        ++rep.relevant;
        std::vector<char> inClass;
        auto sat = detail::substructure_truth(phi, a, opt, &inClass);
        const std::size_t n = a.size();
        std::vector<std::uint64_t> members;
        bool covered = detail::for_each_small_subset(n, k, [&](std::uint64_t c) {
            std::optional<std::uint64_t> best;
            for (std::uint64_t s = 0; s < sat.size(); ++s) {
                if ((s & c) != c || !inClass[s] || !sat[s]) continue;
                if (!best || __builtin_popcountll(s) > __builtin_popcountll(*best)) best = s;
            }
            if (!best) return false;
            members.push_back(*best);
            return true;
        });
        if (!covered) return true;
        std::sort(members.begin(), members.end());
        members.erase(std::unique(members.begin(), members.end()), members.end());
        rep.verdict = Verdict::False;
        rep.counterexample = a;
        for (auto mask : members) rep.cover.push_back(induced_substructure(a, detail::ids_of(a, mask)));
        return false;
    }, opt.enumeration);
    return rep;
}

struct DualityReport {
    PreservationReport psc, pce;
    bool agree() const { return psc.verdict == pce.verdict; }
};

/// psc_check(phi) against pce_check(¬phi) on the same bounded universe.
inline DualityReport duality_check(const FormulaPtr& phi, const VocabularyPtr& voc, int k, std::size_t maxSize,
                                   const PreservationOptions& opt = {}) {
    return {psc_check(*phi, voc, k, maxSize, opt), pce_check(*fml::neg(phi), voc, k, maxSize, opt)};
}

}  // namespace ebsp
