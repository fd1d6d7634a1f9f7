#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ebsp/error.hpp"
#include "ebsp/formula.hpp"
#include "ebsp/structure.hpp"

namespace ebsp {

struct OracleLimits {
    std::size_t fo_max_size = 10;
    std::size_t mso_max_size = 8;
    int mso_max_rank = 3;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Canonical rank-m type. `text` is the full serialization; `digest` its
/// FNV-1a hash. Equal digests with different texts raise CollisionError.
struct TypeFingerprint {
    LogicMode mode = LogicMode::FO;
    int rank = 0;
    std::string text;
    std::uint64_t digest = 0;

    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
        return buf;
    }

    friend bool operator==(const TypeFingerprint& a, const TypeFingerprint& b) {
        if (a.digest != b.digest) return false;
        if (a.text != b.text) throw CollisionError("type digest collision on " + a.hex());
        return true;
    }
};

inline TypeFingerprint make_fingerprint(LogicMode mode, int rank, std::string text) {
    TypeFingerprint f{mode, rank, std::move(text), 0};
    f.digest = fnv1a64(f.text);
    return f;
}

namespace detail {

/// Back-and-forth type computation. Types are hash-consed per remaining rank;
/// the serialization lists every reachable type level by level in a
/// canonical order, children referring to positions in the level below.
class TypeOracle {
public:
    TypeOracle(const Structure& a, int m, LogicMode mode) : a_(a), m_(m), mso_(mode == LogicMode::MSO), levels_(static_cast<std::size_t>(m) + 1) {}

    std::string run() {
        int root = type_of(m_);
        (void)root;
        return serialize();
    }

private:
    struct Level {
        std::map<std::pair<std::vector<int>, std::vector<int>>, int> ids;
        std::vector<const std::pair<std::vector<int>, std::vector<int>>*> nodes;
    };

    int type_of(int remaining) {
        if (remaining == 0) return atomic();
        std::vector<int> pts, sets;
        pts.reserve(a_.size());
        for (std::size_t e = 0; e < a_.size(); ++e) {
            points_.push_back(e);
            kinds_.push_back('p');
            pts.push_back(type_of(remaining - 1));
            kinds_.pop_back();
            points_.pop_back();
        }
        if (mso_) {
            // At the last move only membership of the chosen points matters.
            std::uint64_t universe = 0;
            if (remaining == 1) {
                for (auto p : points_) universe |= std::uint64_t{1} << p;
            } else {
                universe = a_.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << a_.size()) - 1;
            }
            std::uint64_t s = 0;
            while (true) {
                setVals_.push_back(s);
                kinds_.push_back('s');
                sets.push_back(type_of(remaining - 1));
                kinds_.pop_back();
                setVals_.pop_back();
                if (s == universe) break;
                s = (s - universe) & universe;  // next subset of `universe`
            }
        }
        auto norm = [](std::vector<int>& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        norm(pts);
        norm(sets);
        auto& lvl = levels_[static_cast<std::size_t>(remaining)];
        auto [it, inserted] = lvl.ids.emplace(std::make_pair(std::move(pts), std::move(sets)), static_cast<int>(lvl.nodes.size()));
        if (inserted) lvl.nodes.push_back(&it->first);
        return it->second;
    }

    int atomic() {
        std::string& d = scratch_;
        d.assign(kinds_.begin(), kinds_.end());
        d += '/';
        const std::size_t j = points_.size();
        for (std::size_t x = 0; x < j; ++x)
            for (std::size_t y = x + 1; y < j; ++y) d += points_[x] == points_[y] ? '1' : '0';
        d += '/';
        for (std::size_t x = 0; x < j; ++x) {
            d += std::to_string(a_.label(points_[x]));
            d += ',';
        }
        for (std::size_t r = 0; r < a_.relation_count(); ++r) {
            d += '/';
            int arity = a_.vocabulary().relations()[r].arity;
            if (j == 0) continue;
            std::vector<std::size_t> pos(static_cast<std::size_t>(arity), 0);
            buf_.assign(static_cast<std::size_t>(arity), 0);
            while (true) {
                for (int i = 0; i < arity; ++i)
                    buf_[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(points_[pos[static_cast<std::size_t>(i)]]);
                d += a_.holds(r, buf_) ? '1' : '0';
                int i = arity - 1;
                while (i >= 0 && ++pos[static_cast<std::size_t>(i)] == j) pos[static_cast<std::size_t>(i--)] = 0;
                if (i < 0) break;
            }
        }
        d += '/';
        for (auto s : setVals_)
            for (auto p : points_) d += ((s >> p) & 1u) ? '1' : '0';
        auto [it, inserted] = atoms_.emplace(d, static_cast<int>(atomList_.size()));
        if (inserted) atomList_.push_back(&it->first);
        return it->second;
    }

    std::string serialize() const {
        // canonical position of each id at each level
        std::vector<std::vector<int>> canon(levels_.size());
        std::vector<std::size_t> order(atomList_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return *atomList_[x] < *atomList_[y]; });
        canon[0].assign(atomList_.size(), 0);
        std::string out;
        out += "L0:";
        for (std::size_t k = 0; k < order.size(); ++k) {
            canon[0][order[k]] = static_cast<int>(k);
            if (k) out += ';';
            out += *atomList_[order[k]];
        }
        for (std::size_t r = 1; r < levels_.size(); ++r) {
            const auto& lvl = levels_[r];
            using Entry = std::pair<std::vector<int>, std::vector<int>>;
            std::vector<Entry> mapped(lvl.nodes.size());
            for (std::size_t i = 0; i < lvl.nodes.size(); ++i) {
                for (int c : lvl.nodes[i]->first) mapped[i].first.push_back(canon[r - 1][static_cast<std::size_t>(c)]);
                for (int c : lvl.nodes[i]->second) mapped[i].second.push_back(canon[r - 1][static_cast<std::size_t>(c)]);
                std::sort(mapped[i].first.begin(), mapped[i].first.end());
                std::sort(mapped[i].second.begin(), mapped[i].second.end());
            }
            std::vector<std::size_t> ord(mapped.size());
            for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
            std::sort(ord.begin(), ord.end(), [&](std::size_t x, std::size_t y) { return mapped[x] < mapped[y]; });
            canon[r].assign(mapped.size(), 0);
            out += "\nL" + std::to_string(r) + ':';
            for (std::size_t k = 0; k < ord.size(); ++k) {
                canon[r][ord[k]] = static_cast<int>(k);
                if (k) out += ';';
                const auto& e = mapped[ord[k]];
                out += mso_ ? '[' : '{';
                for (std::size_t i = 0; i < e.first.size(); ++i) out += (i ? "," : "") + std::to_string(e.first[i]);
                if (mso_) {
                    out += '|';
                    for (std::size_t i = 0; i < e.second.size(); ++i) out += (i ? "," : "") + std::to_string(e.second[i]);
                }
                out += mso_ ? ']' : '}';
            }
        }
        return out;
    }

    const Structure& a_;
    int m_;
    bool mso_;
    std::vector<Level> levels_;
    std::map<std::string, int> atoms_;
    std::vector<const std::string*> atomList_;
    std::vector<std::size_t> points_;
    std::vector<std::uint64_t> setVals_;
    std::string kinds_;
    std::string scratch_;
    std::vector<std::uint32_t> buf_;
};

inline TypeFingerprint compute_type(const Structure& a, int m, LogicMode mode) {
    if (m < 0) throw DomainError("type: negative rank");
    std::string text = std::string(mode == LogicMode::FO ? "FO" : "MSO") + "/m=" + std::to_string(m) +
                       "/voc=" + a.vocabulary().signature() + "/\n";
    text += TypeOracle(a, m, mode).run();
    return make_fingerprint(mode, m, std::move(text));
}

}  // namespace detail

/// Rank-m FO type by brute-force back-and-forth; equal iff A ≡m B.
inline TypeFingerprint fo_type(const Structure& a, int m, const OracleLimits& limits = {}) {
    if (a.size() > limits.fo_max_size)
        throw BudgetError("fo_type: structure has " + std::to_string(a.size()) + " elements, cap is " +
                          std::to_string(limits.fo_max_size));
    return detail::compute_type(a, m, LogicMode::FO);
}

/// Rank-m MSO type; set moves range over all subsets of the universe.
inline TypeFingerprint mso_type(const Structure& a, int m, const OracleLimits& limits = {}) {
    if (a.size() > limits.mso_max_size)
        throw BudgetError("mso_type: structure has " + std::to_string(a.size()) + " elements, cap is " +
                          std::to_string(limits.mso_max_size));
    if (m > limits.mso_max_rank)
        throw BudgetError("mso_type: rank " + std::to_string(m) + " above cap " + std::to_string(limits.mso_max_rank));
    if (a.size() > 63) throw BudgetError("mso_type: more than 63 elements");
    return detail::compute_type(a, m, LogicMode::MSO);
}

inline TypeFingerprint type_of(const Structure& a, int m, LogicMode mode, const OracleLimits& limits = {}) {
    return mode == LogicMode::FO ? fo_type(a, m, limits) : mso_type(a, m, limits);
}

inline std::size_t oracle_cap(LogicMode mode, const OracleLimits& limits) {
    return mode == LogicMode::FO ? limits.fo_max_size : limits.mso_max_size;
}

inline bool equiv(const Structure& a, const Structure& b, int m, LogicMode mode, const OracleLimits& limits = {}) {
    return type_of(a, m, mode, limits) == type_of(b, m, mode, limits);
}

}  // namespace ebsp
