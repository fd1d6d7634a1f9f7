#pragma once

#include <random>
#include <string>
#include <vector>

#include "ebsp/formula.hpp"
#include "ebsp/structure.hpp"

namespace ebsp {

struct RandomFormulaOptions {
    int max_rank = 2;
    LogicMode mode = LogicMode::FO;
    /// Connective nesting allowed below each quantifier.
    int max_connective_depth = 2;
};

namespace detail {

class FormulaSampler {
public:
    FormulaSampler(const Vocabulary& voc, const RandomFormulaOptions& opt, std::mt19937_64& rng)
        : voc_(voc), opt_(opt), rng_(rng) {}

    FormulaPtr sentence() { return quantified(opt_.max_rank); }

private:
    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

    std::string fresh_point() {
        int c = counter_++;
        return std::string(1, static_cast<char>('x' + c % 3)) + std::to_string(c);
    }
    std::string fresh_set() { return "X" + std::to_string(counter_++); }

    FormulaPtr quantified(int rank) {
        bool setMove = opt_.mode == LogicMode::MSO && (rank > 1 || !points_.empty()) && pick(3) == 0;
        if (setMove) {
            auto v = fresh_set();
            sets_.push_back(v);
            auto body = any(rank - 1, opt_.max_connective_depth);
            sets_.pop_back();
            return pick(2) ? fml::exists_set(v, body) : fml::forall_set(v, body);
        }
        auto v = fresh_point();
        points_.push_back(v);
        auto body = any(rank - 1, opt_.max_connective_depth);
        points_.pop_back();
        return pick(2) ? fml::exists(v, body) : fml::forall(v, body);
    }

    FormulaPtr any(int rank, int depth) {
        if (points_.empty()) return quantified(rank);
        int choice = pick(depth > 0 ? 4 : 2);
        if (rank > 0 && (choice == 0 || (depth == 0 && choice == 1 && pick(2) == 0))) return quantified(rank);
        if (depth == 0 || choice == 1) return atom();
        if (choice == 2) return fml::neg(any(rank, depth - 1));
        auto a = any(rank, depth - 1);
        auto b = any(rank, depth - 1);
        switch (pick(3)) {
            case 0: return fml::conj(a, b);
            case 1: return fml::disj(a, b);
            default: return fml::implies(a, b);
        }
    }

    FormulaPtr atom() {
        auto var = [&] { return points_[static_cast<std::size_t>(pick(static_cast<int>(points_.size())))]; };
        int kinds = 1 + static_cast<int>(voc_.relations().size()) + (voc_.label_count() > 0 ? 1 : 0) +
                    (sets_.empty() ? 0 : 1);
        int k = pick(kinds);
        if (k == 0) return fml::eq(var(), var());
        --k;
        if (k < static_cast<int>(voc_.relations().size())) {
            auto& r = voc_.relations()[static_cast<std::size_t>(k)];
            std::vector<std::string> args;
            for (int i = 0; i < r.arity; ++i) args.push_back(var());
            return fml::rel(r.name, args);
        }
        k -= static_cast<int>(voc_.relations().size());
        if (voc_.label_count() > 0 && k == 0) return fml::label(1 + pick(voc_.label_count()), var());
        return fml::member(sets_[static_cast<std::size_t>(pick(static_cast<int>(sets_.size())))], var());
    }

    const Vocabulary& voc_;
    const RandomFormulaOptions& opt_;
    std::mt19937_64& rng_;
    std::vector<std::string> points_, sets_;
    int counter_ = 0;
};

}  // namespace detail

/// Random sentence of quantifier rank between 1 and `max_rank`.
inline FormulaPtr random_sentence(const Vocabulary& voc, const RandomFormulaOptions& opt, std::mt19937_64& rng) {
    return detail::FormulaSampler(voc, opt, rng).sentence();
}

}  // namespace ebsp
