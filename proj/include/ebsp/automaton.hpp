#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ebsp/alphabet.hpp"
#include "ebsp/error.hpp"
#include "ebsp/optree.hpp"

namespace ebsp {

/// Deterministic bottom-up unranked tree automaton. Each op symbol has a
/// horizontal DFA reading the states of the children left to right; its
/// final state maps to the node's state. Missing transitions go to sinks.
/// Symbols are looked up by base name, so marked clones behave like the
/// symbol they were cloned from.
class TreeAutomaton {
public:
    struct Horizontal {
        std::vector<std::string> names;
        int start = 0;
        std::vector<std::vector<int>> delta;  // [h][q]
        std::vector<int> out;                 // [h] -> q
    };

    int state_count() const { return static_cast<int>(names_.size()); }
    int sink() const { return sink_; }
    const std::string& state_name(int q) const { return names_.at(static_cast<std::size_t>(q)); }
    bool accepting(int q) const { return accept_.at(static_cast<std::size_t>(q)); }

    int leaf_state(const std::string& base) const {
        auto it = leaf_.find(base);
        return it == leaf_.end() ? sink_ : it->second;
    }

    const Horizontal* horizontal(const std::string& base) const {
        auto it = ops_.find(base);
        return it == ops_.end() ? nullptr : &it->second;
    }

    int h_start(const Horizontal* h) const { return h ? h->start : -1; }
    int h_step(const Horizontal* h, int hs, int q) const {
        if (!h || hs < 0) return -1;
        return h->delta[static_cast<std::size_t>(hs)][static_cast<std::size_t>(q)];
    }
    int h_out(const Horizontal* h, int hs) const {
        if (!h || hs < 0) return sink_;
        return h->out[static_cast<std::size_t>(hs)];
    }

    /// Horizontal states h_0..h_n over the given child states (-1 = sink).
    std::vector<int> horizontal_run(const std::string& opBase, const std::vector<int>& childStates) const {
        const auto* h = horizontal(opBase);
        std::vector<int> hs{h_start(h)};
        for (int q : childStates) hs.push_back(h_step(h, hs.back(), q));
        return hs;
    }

    /// Builder interface; names must be unique.
    int add_state(const std::string& name, bool accepting) {
        if (index_.count(name)) throw DomainError("automaton: duplicate state '" + name + "'");
        index_[name] = static_cast<int>(names_.size());
        names_.push_back(name);
        accept_.push_back(accepting);
        return index_[name];
    }

    std::optional<int> find_state(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    void set_accepting(int q) { accept_.at(static_cast<std::size_t>(q)) = true; }
    void set_leaf(const std::string& base, int q) {
        if (!leaf_.emplace(base, q).second) throw DomainError("automaton: leaf '" + base + "' declared twice");
    }
    Horizontal& horizontal_for(const std::string& base) { return ops_[base]; }
    bool has_horizontal(const std::string& base) const { return ops_.count(base) != 0; }

    /// Adds the sink state and completes every horizontal DFA with a sink.
    void complete() {
        sink_ = add_state("_sink", false);
        const std::size_t Q = names_.size();
        for (auto& [name, h] : ops_) {
            int hsink = static_cast<int>(h.names.size());
            h.names.push_back("_hsink");
            h.delta.resize(h.names.size());
            h.out.resize(h.names.size(), -1);
            for (auto& row : h.delta) row.resize(Q, -1);
            for (auto& row : h.delta)
                for (auto& x : row)
                    if (x < 0) x = hsink;
            for (auto& o : h.out)
                if (o < 0) o = sink_;
        }
    }

private:
    std::vector<std::string> names_;
    std::vector<char> accept_;
    std::unordered_map<std::string, int> index_;
    std::unordered_map<std::string, int> leaf_;
    std::map<std::string, Horizontal> ops_;
    int sink_ = -1;
};

struct AutomatonRun {
    std::vector<int> state;  // per node
    bool accepted = false;
    int root_state() const { return state.empty() ? -1 : state[0]; }
};

inline AutomatonRun run(const TreeAutomaton& aut, const OpTree& t, const Alphabet& alpha) {
    AutomatonRun r;
    r.state.assign(t.size(), aut.sink());
    for (std::size_t v = t.size(); v-- > 0;) {
        const auto& n = t[v];
        if (n.is_leaf()) {
            r.state[v] = aut.leaf_state(alpha.base_name(n.symbol));
            continue;
        }
        const auto* h = aut.horizontal(alpha.base_name(n.symbol));
        int hs = aut.h_start(h);
        for (auto c : n.children) hs = aut.h_step(h, hs, r.state[c]);
        r.state[v] = aut.h_out(h, hs);
    }
    r.accepted = !t.empty() && aut.accepting(r.state[0]);
    return r;
}

/// The automaton accepting exactly the arity-valid trees over `alpha`.
inline TreeAutomaton default_automaton(const Alphabet& alpha) {
    TreeAutomaton a;
    int ok = a.add_state("ok", true);
    for (auto& l : alpha.leaves()) {
        if (l.base != l.name) continue;
        a.set_leaf(l.base, ok);
    }
    for (auto& op : alpha.ops()) {
        if (op.base != op.name) continue;
        auto& h = a.horizontal_for(op.base);
        const int rho = op.rho;
        const bool ranked = op.ranked || rho == 1;
        // ranked: counts 0..rho plus a dead state; unranked: counts 0..rho-1,
        // then rho + ((count - rho) mod (rho - 1))
        const int count = ranked ? rho + 2 : 2 * rho - 1;
        for (int i = 0; i < count; ++i) h.names.push_back("c" + std::to_string(i));
        h.start = 0;
        h.delta.assign(static_cast<std::size_t>(count), std::vector<int>(1, -1));
        h.out.assign(static_cast<std::size_t>(count), -1);
        for (int i = 0; i < count; ++i) {
            int next;
            if (ranked)
                next = i >= rho ? rho + 1 : i + 1;
            else
                next = i < rho ? i + 1 : rho + (i - rho + 1) % (rho - 1);
            h.delta[static_cast<std::size_t>(i)][static_cast<std::size_t>(ok)] = next;
        }
        h.out[static_cast<std::size_t>(rho)] = ok;
    }
    a.complete();
    return a;
}

// ---------------------------------------------------------------------------
// Automaton file
//
//   states q0 q1 ...
//   accept q ...
//   leaf SYM q
//   hdfa OPSYM startState
//   hstep OPSYM fromState onState toState
//   hout OPSYM hState outState
//
// Horizontal state names are local to their op symbol.
// ---------------------------------------------------------------------------

inline TreeAutomaton parse_automaton(std::string_view text, const Alphabet& alpha) {
    TreeAutomaton a;
    struct PendingStep {
        std::string op, from, on, to;
        std::size_t line;
    };
    struct PendingOut {
        std::string op, h, out;
        std::size_t line;
    };
    std::vector<PendingStep> steps;
    std::vector<PendingOut> outs;
    std::map<std::string, std::pair<std::string, std::size_t>> starts;
    std::vector<std::pair<std::string, std::size_t>> accepts;
    bool haveStates = false;

    auto state = [&](const std::string& s, std::size_t line) {
        auto q = a.find_state(s);
        if (!q) throw ParseError("unknown state '" + s + "'", line);
        return *q;
    };
    auto opSym = [&](const std::string& s, std::size_t line) {
        if (!alpha.find_op(s)) throw ParseError("unknown op symbol '" + s + "'", line);
    };

    std::size_t lineNo = 0, pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto w = detail::split_words(detail::strip_comment(text.substr(pos, nl - pos)));
        pos = nl + 1;
        ++lineNo;
        if (!w.empty()) {
            const auto& d = w[0];
            if (d == "states") {
                if (haveStates) throw ParseError("duplicate 'states' line", lineNo);
                haveStates = true;
                for (std::size_t i = 1; i < w.size(); ++i) {
                    if (a.find_state(w[i])) throw ParseError("duplicate state '" + w[i] + "'", lineNo);
                    a.add_state(w[i], false);
                }
            } else if (d == "accept") {
                for (std::size_t i = 1; i < w.size(); ++i) accepts.push_back({w[i], lineNo});
            } else if (d == "leaf") {
                if (w.size() != 3) throw ParseError("usage: leaf SYM state", lineNo);
                if (!alpha.find_leaf(w[1])) throw ParseError("unknown leaf symbol '" + w[1] + "'", lineNo);
                try {
                    a.set_leaf(w[1], state(w[2], lineNo));
                } catch (const DomainError&) {
                    throw ParseError("leaf transition for '" + w[1] + "' declared twice", lineNo);
                }
            } else if (d == "hdfa") {
                if (w.size() != 3) throw ParseError("usage: hdfa OPSYM startState", lineNo);
                opSym(w[1], lineNo);
                if (!starts.emplace(w[1], std::make_pair(w[2], lineNo)).second)
                    throw ParseError("horizontal automaton for '" + w[1] + "' declared twice", lineNo);
            } else if (d == "hstep") {
                if (w.size() != 5) throw ParseError("usage: hstep OPSYM from on to", lineNo);
                opSym(w[1], lineNo);
                steps.push_back({w[1], w[2], w[3], w[4], lineNo});
            } else if (d == "hout") {
                if (w.size() != 4) throw ParseError("usage: hout OPSYM hState outState", lineNo);
                opSym(w[1], lineNo);
                outs.push_back({w[1], w[2], w[3], lineNo});
            } else {
                throw ParseError("unknown directive '" + d + "'", lineNo);
            }
        }
        if (nl == text.size()) break;
    }
    if (!haveStates) throw ParseError("missing 'states' line");
    for (auto& [s, line] : accepts) a.set_accepting(state(s, line));

    const std::size_t Q = static_cast<std::size_t>(a.state_count());
    auto hIndex = [](TreeAutomaton::Horizontal& h, const std::string& name) {
        for (std::size_t i = 0; i < h.names.size(); ++i)
            if (h.names[i] == name) return static_cast<int>(i);
        h.names.push_back(name);
        h.delta.emplace_back(std::vector<int>());
        h.out.push_back(-1);
        return static_cast<int>(h.names.size() - 1);
    };
    for (auto& [op, st] : starts) {
        auto& h = a.horizontal_for(op);
        h.start = hIndex(h, st.first);
    }
    for (auto& s : steps) {
        if (!a.has_horizontal(s.op)) throw ParseError("hstep for '" + s.op + "' before its hdfa", s.line);
        auto& h = a.horizontal_for(s.op);
        int from = hIndex(h, s.from), to = hIndex(h, s.to);
        auto q = static_cast<std::size_t>(state(s.on, s.line));
        auto& row = h.delta[static_cast<std::size_t>(from)];
        if (row.size() < Q) row.resize(Q, -1);
        if (row[q] >= 0) throw ParseError("hstep " + s.op + " " + s.from + " " + s.on + " declared twice", s.line);
        row[q] = to;
    }
    for (auto& o : outs) {
        if (!a.has_horizontal(o.op)) throw ParseError("hout for '" + o.op + "' before its hdfa", o.line);
        auto& h = a.horizontal_for(o.op);
        int hs = hIndex(h, o.h);
        if (h.out[static_cast<std::size_t>(hs)] >= 0)
            throw ParseError("hout " + o.op + " " + o.h + " declared twice", o.line);
        h.out[static_cast<std::size_t>(hs)] = state(o.out, o.line);
    }
    a.complete();
    return a;
}

}  // namespace ebsp
