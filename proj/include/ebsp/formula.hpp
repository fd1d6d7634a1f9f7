#pragma once

#include <algorithm>
#include <cctype>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ebsp/error.hpp"
#include "ebsp/structure.hpp"

namespace ebsp {

enum class LogicMode { FO, MSO };

inline const char* to_string(LogicMode m) { return m == LogicMode::FO ? "fo" : "mso"; }

inline LogicMode parse_logic_mode(std::string_view s) {
    if (s == "fo" || s == "FO") return LogicMode::FO;
    if (s == "mso" || s == "MSO") return LogicMode::MSO;
    throw DomainError("unknown logic '" + std::string(s) + "' (expected fo or mso)");
}

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// Formula AST node. `name` holds the relation symbol, the set variable of a
/// membership atom, or the variable bound by a quantifier; `vars` holds atom
/// arguments; `label` the index of an L<i> atom.
struct Formula {
    enum class Kind {
        Relation,
        Equal,
        Label,
        Member,
        Not,
        And,
        Or,
        Implies,
        Exists,
        Forall,
        ExistsSet,
        ForallSet,
    };

    Kind kind;
    std::string name;
    std::vector<std::string> vars;
    int label = 0;
    std::vector<FormulaPtr> sub;

    bool is_quantifier() const {
        return kind == Kind::Exists || kind == Kind::Forall || kind == Kind::ExistsSet || kind == Kind::ForallSet;
    }
    bool is_set_quantifier() const { return kind == Kind::ExistsSet || kind == Kind::ForallSet; }
    bool is_atom() const {
        return kind == Kind::Relation || kind == Kind::Equal || kind == Kind::Label || kind == Kind::Member;
    }
};

inline bool operator==(const Formula& a, const Formula& b) {
    if (a.kind != b.kind || a.name != b.name || a.vars != b.vars || a.label != b.label ||
        a.sub.size() != b.sub.size())
        return false;
    for (std::size_t i = 0; i < a.sub.size(); ++i)
        if (!(*a.sub[i] == *b.sub[i])) return false;
    return true;
}

namespace fml {

inline FormulaPtr make(Formula f) { return std::make_shared<const Formula>(std::move(f)); }

inline FormulaPtr rel(std::string name, std::vector<std::string> vars) {
    return make({Formula::Kind::Relation, std::move(name), std::move(vars), 0, {}});
}
inline FormulaPtr eq(std::string x, std::string y) {
    return make({Formula::Kind::Equal, "", {std::move(x), std::move(y)}, 0, {}});
}
inline FormulaPtr label(int i, std::string x) { return make({Formula::Kind::Label, "", {std::move(x)}, i, {}}); }
inline FormulaPtr member(std::string set, std::string x) {
    return make({Formula::Kind::Member, std::move(set), {std::move(x)}, 0, {}});
}
inline FormulaPtr neg(FormulaPtr f) { return make({Formula::Kind::Not, "", {}, 0, {std::move(f)}}); }
inline FormulaPtr conj(FormulaPtr a, FormulaPtr b) {
    return make({Formula::Kind::And, "", {}, 0, {std::move(a), std::move(b)}});
}
inline FormulaPtr disj(FormulaPtr a, FormulaPtr b) {
    return make({Formula::Kind::Or, "", {}, 0, {std::move(a), std::move(b)}});
}
inline FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
    return make({Formula::Kind::Implies, "", {}, 0, {std::move(a), std::move(b)}});
}
inline FormulaPtr exists(std::string x, FormulaPtr f) {
    return make({Formula::Kind::Exists, std::move(x), {}, 0, {std::move(f)}});
}
inline FormulaPtr forall(std::string x, FormulaPtr f) {
    return make({Formula::Kind::Forall, std::move(x), {}, 0, {std::move(f)}});
}
inline FormulaPtr exists_set(std::string x, FormulaPtr f) {
    return make({Formula::Kind::ExistsSet, std::move(x), {}, 0, {std::move(f)}});
}
inline FormulaPtr forall_set(std::string x, FormulaPtr f) {
    return make({Formula::Kind::ForallSet, std::move(x), {}, 0, {std::move(f)}});
}

}  // namespace fml

/// Maximum nesting depth of quantifiers; point and set quantifiers both count.
inline int quantifier_rank(const Formula& f) {
    int best = 0;
    for (auto& s : f.sub) best = std::max(best, quantifier_rank(*s));
    return best + (f.is_quantifier() ? 1 : 0);
}

inline bool uses_set_quantifiers(const Formula& f) {
    if (f.is_set_quantifier() || f.kind == Formula::Kind::Member) return true;
    return std::any_of(f.sub.begin(), f.sub.end(), [](const FormulaPtr& s) { return uses_set_quantifiers(*s); });
}

namespace detail {

inline void collect_free(const Formula& f, std::vector<std::string>& bound, std::set<std::string>& out) {
    auto isBound = [&](const std::string& v) { return std::find(bound.begin(), bound.end(), v) != bound.end(); };
    switch (f.kind) {
        case Formula::Kind::Member:
            if (!isBound(f.name)) out.insert(f.name);
            [[fallthrough]];
        case Formula::Kind::Relation:
        case Formula::Kind::Equal:
        case Formula::Kind::Label:
            for (auto& v : f.vars)
                if (!isBound(v)) out.insert(v);
            return;
        case Formula::Kind::Exists:
        case Formula::Kind::Forall:
        case Formula::Kind::ExistsSet:
        case Formula::Kind::ForallSet:
            bound.push_back(f.name);
            collect_free(*f.sub[0], bound, out);
            bound.pop_back();
            return;
        default:
            for (auto& s : f.sub) collect_free(*s, bound, out);
    }
}

}  // namespace detail

/// Free element and set variables, sorted.
inline std::set<std::string> free_variables(const Formula& f) {
    std::vector<std::string> bound;
    std::set<std::string> out;
    detail::collect_free(f, bound, out);
    return out;
}

inline bool is_sentence(const Formula& f) { return free_variables(f).empty(); }

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace detail {

inline int precedence(const Formula& f) {
    switch (f.kind) {
        case Formula::Kind::Implies: return 1;
        case Formula::Kind::Or: return 2;
        case Formula::Kind::And: return 3;
        case Formula::Kind::Not: return 4;
        default: return f.is_quantifier() ? 0 : 5;
    }
}

inline void print(const Formula& f, std::string& out);

inline void print_wrapped(const Formula& f, bool wrap, std::string& out) {
    if (wrap) out += '(';
    print(f, out);
    if (wrap) out += ')';
}

inline void print(const Formula& f, std::string& out) {
    using K = Formula::Kind;
    switch (f.kind) {
        case K::Relation:
        case K::Member:
            out += f.name + '(';
            for (std::size_t i = 0; i < f.vars.size(); ++i) out += (i ? "," : "") + f.vars[i];
            out += ')';
            return;
        case K::Equal: out += f.vars[0] + '=' + f.vars[1]; return;
        case K::Label: out += 'L' + std::to_string(f.label) + '(' + f.vars[0] + ')'; return;
        case K::Not:
            out += '~';
            print_wrapped(*f.sub[0], precedence(*f.sub[0]) < 4, out);
            return;
        case K::And:
        case K::Or:
        case K::Implies: {
            int p = precedence(f);
            const char* op = f.kind == K::And ? " & " : f.kind == K::Or ? " | " : " -> ";
            // & and | associate left, -> associates right
            bool rightAssoc = f.kind == K::Implies;
            int pl = precedence(*f.sub[0]), pr = precedence(*f.sub[1]);
            print_wrapped(*f.sub[0], rightAssoc ? pl <= p : pl < p, out);
            out += op;
            print_wrapped(*f.sub[1], rightAssoc ? pr < p : pr <= p, out);
            return;
        }
        case K::Exists: out += "exists " + f.name + ". "; break;
        case K::Forall: out += "forall " + f.name + ". "; break;
        case K::ExistsSet: out += "existsSet " + f.name + ". "; break;
        case K::ForallSet: out += "forallSet " + f.name + ". "; break;
    }
    print(*f.sub[0], out);
}

}  // namespace detail

inline std::string to_string(const Formula& f) {
    std::string out;
    detail::print(f, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

class FormulaParser {
public:
    FormulaParser(std::string_view text, const Vocabulary& voc, LogicMode mode, std::vector<std::string> freeVars)
        : text_(text), voc_(voc), mode_(mode), scope_(std::move(freeVars)) {
        tokenize();
    }

    FormulaPtr parse() {
        auto f = formula();
        if (pos_ < toks_.size()) fail("unexpected '" + toks_[pos_].text + "'");
        return f;
    }

private:
    struct Token {
        std::string text;
        std::size_t offset;
    };

    [[noreturn]] void fail(const std::string& msg) const {
        std::size_t off = pos_ < toks_.size() ? toks_[pos_].offset : text_.size();
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < off && i < text_.size(); ++i) {
            if (text_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(msg, line, col);
    }

    void tokenize() {
        std::size_t i = 0;
        while (i < text_.size()) {
            char c = text_[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t j = i;
                while (j < text_.size() &&
                       (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_'))
                    ++j;
                toks_.push_back({std::string(text_.substr(i, j - i)), i});
                i = j;
                continue;
            }
            if (c == '-' && i + 1 < text_.size() && text_[i + 1] == '>') {
                toks_.push_back({"->", i});
                i += 2;
                continue;
            }
            if (std::string_view("().,~&|=").find(c) != std::string_view::npos) {
                toks_.push_back({std::string(1, c), i});
                ++i;
                continue;
            }
            pos_ = toks_.size();
            toks_.push_back({std::string(1, c), i});
            fail(std::string("unexpected character '") + c + "'");
        }
    }

    bool peek(std::string_view t) const { return pos_ < toks_.size() && toks_[pos_].text == t; }
    bool peek_at(std::size_t k, std::string_view t) const {
        return pos_ + k < toks_.size() && toks_[pos_ + k].text == t;
    }
    void expect(std::string_view t) {
        if (!peek(t)) fail("expected '" + std::string(t) + "'");
        ++pos_;
    }

    static bool is_element_var(const std::string& s) {
        return !s.empty() && std::islower(static_cast<unsigned char>(s[0]));
    }
    static bool is_set_var(const std::string& s) {
        return !s.empty() && std::isupper(static_cast<unsigned char>(s[0]));
    }
    static bool is_keyword(const std::string& s) {
        return s == "exists" || s == "forall" || s == "existsSet" || s == "forallSet";
    }

    std::string element_var() {
        if (pos_ >= toks_.size() || !is_element_var(toks_[pos_].text) || is_keyword(toks_[pos_].text))
            fail("expected element variable (lowercase identifier)");
        auto v = toks_[pos_].text;
        if (std::find(scope_.begin(), scope_.end(), v) == scope_.end()) fail("unbound variable '" + v + "'");
        ++pos_;
        return v;
    }

    FormulaPtr formula() { return implication(); }

    FormulaPtr implication() {
        auto left = disjunction();
        if (peek("->")) {
            ++pos_;
            return fml::implies(left, implication());
        }
        return left;
    }

    FormulaPtr disjunction() {
        auto f = conjunction();
        while (peek("|")) {
            ++pos_;
            f = fml::disj(f, conjunction());
        }
        return f;
    }

    FormulaPtr conjunction() {
        auto f = unary();
        while (peek("&")) {
            ++pos_;
            f = fml::conj(f, unary());
        }
        return f;
    }

    FormulaPtr unary() {
        if (peek("~")) {
            ++pos_;
            return fml::neg(unary());
        }
        if (peek("(")) {
            ++pos_;
            auto f = formula();
            expect(")");
            return f;
        }
        if (pos_ < toks_.size() && is_keyword(toks_[pos_].text)) return quantified();
        return atom();
    }

    FormulaPtr quantified() {
        std::string q = toks_[pos_].text;
        ++pos_;
        bool setQ = q == "existsSet" || q == "forallSet";
        if (setQ && mode_ == LogicMode::FO) {
            --pos_;
            fail("set quantifier '" + q + "' not allowed in FO mode");
        }
        if (pos_ >= toks_.size()) fail("expected variable after '" + q + "'");
        std::string v = toks_[pos_].text;
        if (setQ ? !is_set_var(v) : (!is_element_var(v) || is_keyword(v)))
            fail(setQ ? "expected set variable (uppercase identifier)" : "expected element variable (lowercase identifier)");
        ++pos_;
        expect(".");
        scope_.push_back(v);
        auto body = formula();
        scope_.pop_back();
        if (q == "exists") return fml::exists(v, body);
        if (q == "forall") return fml::forall(v, body);
        if (q == "existsSet") return fml::exists_set(v, body);
        return fml::forall_set(v, body);
    }

    FormulaPtr atom() {
        if (pos_ >= toks_.size()) fail("unexpected end of formula");
        const std::string name = toks_[pos_].text;
        if (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_') fail("unexpected '" + name + "'");
        if (peek_at(1, "=")) {
            auto x = element_var();
            expect("=");
            auto y = element_var();
            return fml::eq(x, y);
        }
        if (!peek_at(1, "(")) fail("expected atom");
        bool inScope = std::find(scope_.begin(), scope_.end(), name) != scope_.end();
        if (is_set_var(name) && inScope) {
            pos_ += 2;
            auto x = element_var();
            expect(")");
            return fml::member(name, x);
        }
        if (auto r = voc_.find(name)) {
            pos_ += 2;
            std::vector<std::string> args{element_var()};
            while (peek(",")) {
                ++pos_;
                args.push_back(element_var());
            }
            expect(")");
            if (args.size() != static_cast<std::size_t>(voc_.relations()[*r].arity))
                fail("relation '" + name + "' expects " + std::to_string(voc_.relations()[*r].arity) + " arguments");
            return fml::rel(name, std::move(args));
        }
        if (name.size() > 1 && name[0] == 'L' &&
            std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            int l = std::stoi(name.substr(1));
            if (l < 1 || l > voc_.label_count())
                fail("label " + name + " outside L1..L" + std::to_string(voc_.label_count()));
            pos_ += 2;
            auto x = element_var();
            expect(")");
            return fml::label(l, x);
        }
        if (is_set_var(name)) {
            if (mode_ == LogicMode::FO) fail("set variable '" + name + "' used in FO mode");
            fail("unbound set variable '" + name + "'");
        }
        fail("unknown relation symbol '" + name + "'");
    }

    std::string_view text_;
    const Vocabulary& voc_;
    LogicMode mode_;
    std::vector<std::string> scope_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses a formula. Free variables must be listed in `freeVars`; lowercase
/// names are element variables and uppercase names set variables.
inline FormulaPtr parse_formula(std::string_view text, const Vocabulary& voc, LogicMode mode,
                                std::vector<std::string> freeVars = {}) {
    return detail::FormulaParser(text, voc, mode, std::move(freeVars)).parse();
}

}  // namespace ebsp
