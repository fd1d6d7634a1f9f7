#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ebsp/error.hpp"
#include "ebsp/formula.hpp"
#include "ebsp/structure.hpp"

namespace ebsp {

/// Values for free variables: element variables map to elements, set
/// variables to subsets of the universe.
struct Assignment {
    std::map<std::string, ElementId> elements;
    std::map<std::string, ElementSet> sets;
};

namespace detail {

/// Formula with variables resolved to slots; sets are bitmasks over element
/// indices, so set quantification is limited to 63 elements.
class CompiledFormula {
public:
    CompiledFormula(const Formula& f, const Structure& a, const Assignment& asg) : a_(a) {
        for (auto& [name, e] : asg.elements) {
            auto i = a.index_of(e);
            if (!i) throw DomainError("eval: element assigned to '" + name + "' is not in the structure");
            bind(name, false);
            points_.back() = *i;
        }
        for (auto& [name, s] : asg.sets) {
            std::uint64_t mask = 0;
            for (auto e : s) {
                auto i = a.index_of(e);
                if (!i) throw DomainError("eval: set '" + name + "' contains an element outside the structure");
                if (*i >= 63) throw BudgetError("eval: set variables need universes of at most 63 elements");
                mask |= std::uint64_t{1} << *i;
            }
            bind(name, true);
            sets_.back() = mask;
        }
        root_ = compile(f);
    }

    bool run() { return eval(root_); }

private:
    struct Node {
        Formula::Kind kind = Formula::Kind::Relation;
        std::size_t rel = 0;
        int label = 0;
        std::vector<std::size_t> slots;  // element slots, or {set slot, element slot}
        std::size_t bound = 0;           // slot bound by a quantifier
        std::vector<std::size_t> sub;
    };

    void bind(const std::string& name, bool isSet) {
        scope_.push_back({name, isSet, isSet ? sets_.size() : points_.size()});
        if (isSet)
            sets_.push_back(0);
        else
            points_.push_back(0);
    }

    std::size_t lookup(const std::string& name, bool isSet) const {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
            if (it->name == name && it->isSet == isSet) return it->slot;
        throw DomainError("eval: unbound free variable '" + name + "'");
    }

    std::size_t compile(const Formula& f) {
        using K = Formula::Kind;
        Node n;
        n.kind = f.kind;
        switch (f.kind) {
            case K::Relation: {
                auto r = a_.vocabulary().find(f.name);
                if (!r) throw DomainError("eval: structure lacks relation '" + f.name + "'");
                n.rel = *r;
                for (auto& v : f.vars) n.slots.push_back(lookup(v, false));
                break;
            }
            case K::Equal:
                for (auto& v : f.vars) n.slots.push_back(lookup(v, false));
                break;
            case K::Label:
                n.label = f.label;
                n.slots.push_back(lookup(f.vars[0], false));
                break;
            case K::Member:
                n.slots = {lookup(f.name, true), lookup(f.vars[0], false)};
                break;
            case K::Exists:
            case K::Forall:
            case K::ExistsSet:
            case K::ForallSet: {
                bool isSet = f.is_set_quantifier();
                bind(f.name, isSet);
                n.bound = scope_.back().slot;
                n.sub.push_back(compile(*f.sub[0]));
                scope_.pop_back();
                break;
            }
            default:
                for (auto& s : f.sub) n.sub.push_back(compile(*s));
        }
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    bool eval(std::size_t id) {
        const Node& n = nodes_[id];
        using K = Formula::Kind;
        switch (n.kind) {
            case K::Relation:
                buf_.resize(n.slots.size());
                for (std::size_t i = 0; i < n.slots.size(); ++i) buf_[i] = static_cast<std::uint32_t>(points_[n.slots[i]]);
                return a_.holds(n.rel, buf_);
            case K::Equal: return points_[n.slots[0]] == points_[n.slots[1]];
            case K::Label: return a_.label(points_[n.slots[0]]) == n.label;
            case K::Member: return (sets_[n.slots[0]] >> points_[n.slots[1]]) & 1u;
            case K::Not: return !eval(n.sub[0]);
            case K::And: return eval(n.sub[0]) && eval(n.sub[1]);
            case K::Or: return eval(n.sub[0]) || eval(n.sub[1]);
            case K::Implies: return !eval(n.sub[0]) || eval(n.sub[1]);
            case K::Exists:
            case K::Forall: {
                bool want = n.kind == K::Exists;
                for (std::size_t e = 0; e < a_.size(); ++e) {
                    points_[n.bound] = e;
                    if (eval(n.sub[0]) == want) return want;
                }
                return !want;
            }
            case K::ExistsSet:
            case K::ForallSet: {
                if (a_.size() >= 63) throw BudgetError("eval: set quantifier over more than 62 elements");
                bool want = n.kind == K::ExistsSet;
                const std::uint64_t limit = std::uint64_t{1} << a_.size();
                for (std::uint64_t m = 0; m < limit; ++m) {
                    sets_[n.bound] = m;
                    if (eval(n.sub[0]) == want) return want;
                }
                return !want;
            }
        }
        return false;
    }

    struct Binding {
        std::string name;
        bool isSet;
        std::size_t slot;
    };

    const Structure& a_;
    std::vector<Node> nodes_;
    std::size_t root_ = 0;
    std::vector<Binding> scope_;
    std::vector<std::size_t> points_;
    std::vector<std::uint64_t> sets_;
    std::vector<std::uint32_t> buf_;
};

}  // namespace detail

/// Tarskian satisfaction. Quantifiers range over the universe (or its
/// powerset); on the empty structure, universals hold and existentials fail.
inline bool eval_formula(const Formula& phi, const Structure& a, const Assignment& assignment = {}) {
    return detail::CompiledFormula(phi, a, assignment).run();
}

}  // namespace ebsp
