#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ebsp/error.hpp"

namespace ebsp {

struct RelationSymbol {
    std::string name;
    int arity = 0;

    bool operator==(const RelationSymbol&) const = default;
};

/// Relation symbols plus `labelCount` unary label predicates L1..Lk.
class Vocabulary {
public:
    Vocabulary() = default;

    Vocabulary(std::vector<RelationSymbol> relations, int labelCount)
        : relations_(std::move(relations)), labelCount_(labelCount) {
        if (labelCount_ < 0) throw DomainError("vocabulary: negative label count");
        for (std::size_t i = 0; i < relations_.size(); ++i) {
            if (relations_[i].arity < 1)
                throw DomainError("vocabulary: relation '" + relations_[i].name + "' has arity < 1");
            if (relations_[i].name.empty()) throw DomainError("vocabulary: empty relation name");
            for (std::size_t j = 0; j < i; ++j)
                if (relations_[j].name == relations_[i].name)
                    throw DomainError("vocabulary: duplicate relation '" + relations_[i].name + "'");
        }
    }

    const std::vector<RelationSymbol>& relations() const noexcept { return relations_; }
    int label_count() const noexcept { return labelCount_; }

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < relations_.size(); ++i)
            if (relations_[i].name == name) return i;
        return std::nullopt;
    }

    std::size_t index_of(std::string_view name) const {
        if (auto i = find(name)) return *i;
        throw DomainError("vocabulary: unknown relation '" + std::string(name) + "'");
    }

    Vocabulary with_relation(RelationSymbol symbol) const {
        auto rels = relations_;
        rels.push_back(std::move(symbol));
        return Vocabulary(std::move(rels), labelCount_);
    }

    Vocabulary with_label_count(int k) const { return Vocabulary(relations_, k); }

    /// Compact textual signature, e.g. "E/2,lt/2;L2".
    std::string signature() const {
        std::string s;
        for (std::size_t i = 0; i < relations_.size(); ++i) {
            if (i) s += ',';
            s += relations_[i].name + '/' + std::to_string(relations_[i].arity);
        }
        return s + ";L" + std::to_string(labelCount_);
    }

    bool operator==(const Vocabulary&) const = default;

private:
    std::vector<RelationSymbol> relations_;
    int labelCount_ = 0;
};

using VocabularyPtr = std::shared_ptr<const Vocabulary>;

inline VocabularyPtr make_vocabulary(std::vector<RelationSymbol> relations, int labelCount = 0) {
    return std::make_shared<const Vocabulary>(std::move(relations), labelCount);
}

/// Opaque element token. Evaluated structures encode the introducing tree
/// node in the upper bits (see optrees), so identity survives reductions.
struct ElementId {
    std::uint64_t value = 0;

    auto operator<=>(const ElementId&) const = default;
};

}  // namespace ebsp

template <>
struct std::hash<ebsp::ElementId> {
    std::size_t operator()(const ebsp::ElementId& e) const noexcept {
        return std::hash<std::uint64_t>{}(e.value);
    }
};

namespace ebsp {

/// Tuples of one relation, stored flat and sorted lexicographically.
class Relation {
public:
    Relation() = default;
    Relation(int arity, std::vector<std::uint32_t> flat, std::size_t universe)
        : arity_(arity), data_(std::move(flat)) {
        normalize();
        build_dense(universe);
    }

    int arity() const noexcept { return arity_; }
    std::size_t size() const noexcept { return arity_ ? data_.size() / static_cast<std::size_t>(arity_) : 0; }

    std::span<const std::uint32_t> tuple(std::size_t i) const {
        return {data_.data() + i * static_cast<std::size_t>(arity_), static_cast<std::size_t>(arity_)};
    }

    const std::vector<std::uint32_t>& flat() const noexcept { return data_; }

    bool contains(std::span<const std::uint32_t> t) const {
        if (!dense_.empty()) {
            std::size_t code = 0;
            for (auto x : t) code = code * universe_ + x;
            return (dense_[code >> 6] >> (code & 63)) & 1u;
        }
        std::size_t lo = 0, hi = size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            auto m = tuple(mid);
            auto c = std::lexicographical_compare_three_way(m.begin(), m.end(), t.begin(), t.end());
            if (c == 0) return true;
            if (c < 0)
                lo = mid + 1;
            else
                hi = mid;
        }
        return false;
    }

private:
    void normalize() {
        const std::size_t a = static_cast<std::size_t>(arity_);
        const std::size_t n = size();
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        auto less = [&](std::size_t x, std::size_t y) {
            return std::lexicographical_compare(data_.begin() + x * a, data_.begin() + (x + 1) * a,
                                                data_.begin() + y * a, data_.begin() + (y + 1) * a);
        };
        if (!std::is_sorted(order.begin(), order.end(), less)) std::sort(order.begin(), order.end(), less);
        std::vector<std::uint32_t> out;
        out.reserve(data_.size());
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t i = order[k];
            if (k > 0 && std::equal(data_.begin() + i * a, data_.begin() + (i + 1) * a,
                                    data_.begin() + order[k - 1] * a))
                continue;
            out.insert(out.end(), data_.begin() + i * a, data_.begin() + (i + 1) * a);
        }
        data_ = std::move(out);
    }

    void build_dense(std::size_t universe) {
        universe_ = universe;
        double cells = 1;
        for (int i = 0; i < arity_; ++i) cells *= static_cast<double>(universe);
        if (universe == 0 || cells > static_cast<double>(1u << 20)) return;
        dense_.assign((static_cast<std::size_t>(cells) + 63) / 64, 0);
        for (std::size_t i = 0; i < size(); ++i) {
            std::size_t code = 0;
            for (auto x : tuple(i)) code = code * universe_ + x;
            dense_[code >> 6] |= std::uint64_t{1} << (code & 63);
        }
    }

    int arity_ = 0;
    std::vector<std::uint32_t> data_;
    std::vector<std::uint64_t> dense_;
    std::size_t universe_ = 0;
};

class StructureBuilder;

/// Finite relational structure with optional element labels (0 = unlabeled).
/// Immutable; copies share storage.
class Structure {
public:
    explicit Structure(VocabularyPtr vocabulary = make_vocabulary({}))
        : data_(std::make_shared<Data>()) {
        auto d = std::const_pointer_cast<Data>(data_);
        d->vocabulary = std::move(vocabulary);
        d->relations.resize(d->vocabulary->relations().size());
        for (std::size_t r = 0; r < d->relations.size(); ++r)
            d->relations[r] = Relation(d->vocabulary->relations()[r].arity, {}, 0);
    }

    const Vocabulary& vocabulary() const noexcept { return *data_->vocabulary; }
    const VocabularyPtr& vocabulary_ptr() const noexcept { return data_->vocabulary; }

    std::size_t size() const noexcept { return data_->ids.size(); }
    bool empty() const noexcept { return data_->ids.empty(); }

    ElementId id(std::size_t i) const { return data_->ids[i]; }
    std::span<const ElementId> ids() const noexcept { return data_->ids; }
    int label(std::size_t i) const { return data_->labels[i]; }
    std::span<const int> labels() const noexcept { return data_->labels; }

    const Relation& relation(std::size_t r) const { return data_->relations[r]; }
    std::size_t relation_count() const noexcept { return data_->relations.size(); }

    bool holds(std::size_t r, std::span<const std::uint32_t> tuple) const {
        return data_->relations[r].contains(tuple);
    }

    std::optional<std::size_t> index_of(ElementId e) const {
        auto it = data_->index.find(e);
        if (it == data_->index.end()) return std::nullopt;
        return it->second;
    }

    bool contains(ElementId e) const { return data_->index.count(e) != 0; }

    /// Same vocabulary, ids in the same order, same labels and tuples.
    friend bool operator==(const Structure& a, const Structure& b) {
        if (a.data_ == b.data_) return true;
        if (!(a.vocabulary() == b.vocabulary())) return false;
        if (a.data_->ids != b.data_->ids || a.data_->labels != b.data_->labels) return false;
        for (std::size_t r = 0; r < a.relation_count(); ++r)
            if (a.relation(r).flat() != b.relation(r).flat()) return false;
        return true;
    }

private:
    friend class StructureBuilder;

    struct Data {
        VocabularyPtr vocabulary;
        std::vector<ElementId> ids;
        std::vector<int> labels;
        std::vector<Relation> relations;
        std::unordered_map<ElementId, std::size_t> index;
    };

    explicit Structure(std::shared_ptr<const Data> d) : data_(std::move(d)) {}

    std::shared_ptr<const Data> data_;
};

class StructureBuilder {
public:
    explicit StructureBuilder(VocabularyPtr vocabulary)
        : vocabulary_(std::move(vocabulary)), tuples_(vocabulary_->relations().size()) {}

    std::size_t add_element(ElementId id, int label = 0) {
        if (label < 0 || label > vocabulary_->label_count())
            throw DomainError("structure: label " + std::to_string(label) + " outside 0.." +
                              std::to_string(vocabulary_->label_count()));
        ids_.push_back(id);
        labels_.push_back(label);
        return ids_.size() - 1;
    }

    void set_label(std::size_t i, int label) {
        if (label < 0 || label > vocabulary_->label_count())
            throw DomainError("structure: label out of range");
        labels_.at(i) = label;
    }

    void add_tuple(std::size_t r, std::span<const std::uint32_t> tuple) {
        if (r >= tuples_.size()) throw DomainError("structure: relation index out of range");
        if (tuple.size() != static_cast<std::size_t>(vocabulary_->relations()[r].arity))
            throw DomainError("structure: tuple arity mismatch for '" + vocabulary_->relations()[r].name + "'");
        tuples_[r].insert(tuples_[r].end(), tuple.begin(), tuple.end());
    }

    void add_tuple(std::size_t r, std::initializer_list<std::uint32_t> tuple) {
        add_tuple(r, std::span<const std::uint32_t>(tuple.begin(), tuple.size()));
    }

    /// Reserve room for `n` more tuples of relation r.
    void reserve_tuples(std::size_t r, std::size_t n) {
        tuples_[r].reserve(tuples_[r].size() + n * static_cast<std::size_t>(vocabulary_->relations()[r].arity));
    }

    std::size_t size() const noexcept { return ids_.size(); }

    Structure build() && {
        auto d = std::make_shared<Structure::Data>();
        d->vocabulary = vocabulary_;
        const std::size_t n = ids_.size();
        d->index.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (!d->index.emplace(ids_[i], i).second)
                throw DomainError("structure: duplicate element id " + std::to_string(ids_[i].value));
        for (auto& t : tuples_)
            for (auto x : t)
                if (x >= n) throw DomainError("structure: tuple component outside the universe");
        d->relations.reserve(tuples_.size());
        for (std::size_t r = 0; r < tuples_.size(); ++r)
            d->relations.emplace_back(vocabulary_->relations()[r].arity, std::move(tuples_[r]), n);
        d->ids = std::move(ids_);
        d->labels = std::move(labels_);
        return Structure(std::shared_ptr<const Structure::Data>(std::move(d)));
    }

private:
    VocabularyPtr vocabulary_;
    std::vector<ElementId> ids_;
    std::vector<int> labels_;
    std::vector<std::vector<std::uint32_t>> tuples_;
};

/// Subset of a structure's universe, kept sorted and duplicate-free.
class ElementSet {
public:
    ElementSet() = default;
    ElementSet(std::initializer_list<ElementId> elements) : elements_(elements) { normalize(); }
    explicit ElementSet(std::vector<ElementId> elements) : elements_(std::move(elements)) { normalize(); }

    std::size_t size() const noexcept { return elements_.size(); }
    bool empty() const noexcept { return elements_.empty(); }
    bool contains(ElementId e) const { return std::binary_search(elements_.begin(), elements_.end(), e); }
    auto begin() const { return elements_.begin(); }
    auto end() const { return elements_.end(); }
    const std::vector<ElementId>& elements() const noexcept { return elements_; }

    bool operator==(const ElementSet&) const = default;

private:
    void normalize() {
        std::sort(elements_.begin(), elements_.end());
        elements_.erase(std::unique(elements_.begin(), elements_.end()), elements_.end());
    }

    std::vector<ElementId> elements_;
};

/// Induced substructure on the given element indices (kept in the given order).
inline Structure restrict_to_indices(const Structure& a, std::span<const std::size_t> keep) {
    std::vector<std::int64_t> remap(a.size(), -1);
    StructureBuilder b(a.vocabulary_ptr());
    for (auto i : keep) {
        if (i >= a.size()) throw DomainError("restrict: index outside the universe");
        if (remap[i] >= 0) throw DomainError("restrict: repeated index");
        remap[i] = static_cast<std::int64_t>(b.add_element(a.id(i), a.label(i)));
    }
    std::vector<std::uint32_t> buf;
    for (std::size_t r = 0; r < a.relation_count(); ++r) {
        const auto& rel = a.relation(r);
        for (std::size_t t = 0; t < rel.size(); ++t) {
            auto tup = rel.tuple(t);
            buf.clear();
            bool inside = true;
            for (auto x : tup) {
                if (remap[x] < 0) {
                    inside = false;
                    break;
                }
                buf.push_back(static_cast<std::uint32_t>(remap[x]));
            }
            if (inside) b.add_tuple(r, buf);
        }
    }
    return std::move(b).build();
}

/// Substructure induced on S; universe order follows A.
inline Structure induced_substructure(const Structure& a, const ElementSet& s) {
    std::vector<std::size_t> keep;
    keep.reserve(s.size());
    for (auto e : s)
        if (!a.contains(e)) throw DomainError("induced_substructure: element " + std::to_string(e.value) + " not in structure");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (s.contains(a.id(i))) keep.push_back(i);
    return restrict_to_indices(a, keep);
}

/// True when B is literally an induced substructure of A: every element id of
/// B occurs in A with the same label, and the tuples of A over those ids are
/// exactly the tuples of B. Vocabularies are matched by relation name.
inline bool is_induced_substructure_by_id(const Structure& b, const Structure& a) {
    std::vector<std::int64_t> toB(a.size(), -1);
    for (std::size_t i = 0; i < b.size(); ++i) {
        auto j = a.index_of(b.id(i));
        if (!j || a.label(*j) != b.label(i)) return false;
        toB[*j] = static_cast<std::int64_t>(i);
    }
    std::vector<std::uint32_t> buf;
    for (std::size_t rb = 0; rb < b.relation_count(); ++rb) {
        const auto& sym = b.vocabulary().relations()[rb];
        auto ra = a.vocabulary().find(sym.name);
        if (!ra) {
            if (b.relation(rb).size() != 0) return false;
            continue;
        }
        const auto& rel = a.relation(*ra);
        std::size_t inside = 0;
        for (std::size_t t = 0; t < rel.size(); ++t) {
            buf.clear();
            bool ok = true;
            for (auto x : rel.tuple(t)) {
                if (toB[x] < 0) {
                    ok = false;
                    break;
                }
                buf.push_back(static_cast<std::uint32_t>(toB[x]));
            }
            if (!ok) continue;
            ++inside;
            if (!b.holds(rb, buf)) return false;
        }
        if (inside != b.relation(rb).size()) return false;
    }
    return true;
}

/// Copy of A over a larger vocabulary; relations are matched by name and the
/// ones missing from A are empty.
inline Structure expand_vocabulary(const Structure& a, VocabularyPtr target) {
    StructureBuilder b(target);
    for (std::size_t i = 0; i < a.size(); ++i) b.add_element(a.id(i), a.label(i));
    for (std::size_t r = 0; r < a.relation_count(); ++r) {
        const auto& sym = a.vocabulary().relations()[r];
        auto t = target->find(sym.name);
        if (!t) {
            if (a.relation(r).size() == 0) continue;
            throw DomainError("expand_vocabulary: target lacks relation '" + sym.name + "'");
        }
        if (target->relations()[*t].arity != sym.arity)
            throw DomainError("expand_vocabulary: arity mismatch for '" + sym.name + "'");
        const auto& rel = a.relation(r);
        for (std::size_t k = 0; k < rel.size(); ++k) b.add_tuple(*t, rel.tuple(k));
    }
    return std::move(b).build();
}

/// Same structure with ids replaced by first, first+1, ...
inline Structure renumbered(const Structure& a, std::uint64_t first = 1) {
    StructureBuilder b(a.vocabulary_ptr());
    for (std::size_t i = 0; i < a.size(); ++i) b.add_element(ElementId{first + i}, a.label(i));
    for (std::size_t r = 0; r < a.relation_count(); ++r) {
        const auto& rel = a.relation(r);
        for (std::size_t k = 0; k < rel.size(); ++k) b.add_tuple(r, rel.tuple(k));
    }
    return std::move(b).build();
}

// ---------------------------------------------------------------------------
// Text format
//
//   # comment
//   universe N            elements are named 1..N
//   labels K              optional; label count of the vocabulary
//   rel NAME ARITY
//   label E I
//   NAME E1 ... Ek        one tuple
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_words(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string_view strip_comment(std::string_view line) {
    auto h = line.find('#');
    return h == std::string_view::npos ? line : line.substr(0, h);
}

inline long long parse_int(const std::string& s, std::size_t line, const char* what) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("expected integer for ") + what + ", got '" + s + "'", line);
    }
}

}  // namespace detail

inline Structure parse_structure(std::string_view text) {
    std::size_t universe = 0;
    bool haveUniverse = false;
    int declaredLabels = -1;
    std::vector<RelationSymbol> rels;
    struct PendingTuple {
        std::size_t rel;
        std::vector<std::uint32_t> t;
        std::size_t line;
    };
    std::vector<PendingTuple> tuples;
    std::set<std::pair<std::size_t, std::vector<std::uint32_t>>> seen;
    std::vector<std::pair<std::size_t, int>> labels;
    std::vector<std::size_t> labelLines;

    std::size_t lineNo = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++lineNo;
        auto w = detail::split_words(detail::strip_comment(line));
        if (w.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        auto element = [&](const std::string& s) -> std::uint32_t {
            auto v = detail::parse_int(s, lineNo, "element");
            if (!haveUniverse) throw ParseError("element reference before 'universe'", lineNo);
            if (v < 1 || static_cast<std::size_t>(v) > universe)
                throw ParseError("element " + s + " outside 1.." + std::to_string(universe), lineNo);
            return static_cast<std::uint32_t>(v - 1);
        };
        if (w[0] == "universe") {
            if (w.size() != 2) throw ParseError("usage: universe N", lineNo);
            if (haveUniverse) throw ParseError("duplicate 'universe' line", lineNo);
            auto v = detail::parse_int(w[1], lineNo, "universe size");
            if (v < 0) throw ParseError("negative universe size", lineNo);
            universe = static_cast<std::size_t>(v);
            haveUniverse = true;
        } else if (w[0] == "labels") {
            if (w.size() != 2) throw ParseError("usage: labels K", lineNo);
            declaredLabels = static_cast<int>(detail::parse_int(w[1], lineNo, "label count"));
            if (declaredLabels < 0) throw ParseError("negative label count", lineNo);
        } else if (w[0] == "rel") {
            if (w.size() != 3) throw ParseError("usage: rel NAME ARITY", lineNo);
            auto a = detail::parse_int(w[2], lineNo, "arity");
            if (a < 1) throw ParseError("arity must be >= 1", lineNo);
            for (auto& r : rels)
                if (r.name == w[1]) throw ParseError("duplicate relation '" + w[1] + "'", lineNo);
            rels.push_back({w[1], static_cast<int>(a)});
        } else if (w[0] == "label") {
            if (w.size() != 3) throw ParseError("usage: label E I", lineNo);
            auto e = element(w[1]);
            auto l = detail::parse_int(w[2], lineNo, "label");
            if (l < 1) throw ParseError("label index must be >= 1", lineNo);
            for (auto& [pe, pl] : labels)
                if (pe == e) throw ParseError("element " + w[1] + " labeled twice", lineNo);
            labels.emplace_back(e, static_cast<int>(l));
            labelLines.push_back(lineNo);
        } else {
            std::optional<std::size_t> r;
            for (std::size_t i = 0; i < rels.size(); ++i)
                if (rels[i].name == w[0]) r = i;
            if (!r) throw ParseError("unknown relation or directive '" + w[0] + "'", lineNo);
            if (w.size() - 1 != static_cast<std::size_t>(rels[*r].arity))
                throw ParseError("relation '" + w[0] + "' expects " + std::to_string(rels[*r].arity) + " elements",
                                 lineNo);
            PendingTuple p{*r, {}, lineNo};
            for (std::size_t i = 1; i < w.size(); ++i) p.t.push_back(element(w[i]));
            if (!seen.emplace(p.rel, p.t).second) throw ParseError("duplicate tuple line", lineNo);
            tuples.push_back(std::move(p));
        }
        if (nl == text.size()) break;
    }
    if (!haveUniverse) throw ParseError("missing 'universe' line");
    int maxLabel = 0;
    for (auto& [e, l] : labels) maxLabel = std::max(maxLabel, l);
    int labelCount = declaredLabels >= 0 ? declaredLabels : maxLabel;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i].second > labelCount)
            throw ParseError("label exceeds declared label count", labelLines[i]);
    auto voc = make_vocabulary(rels, labelCount);
    StructureBuilder b(voc);
    for (std::size_t i = 0; i < universe; ++i) b.add_element(ElementId{i + 1});
    for (auto& [e, l] : labels) b.set_label(e, l);
    for (auto& p : tuples) b.add_tuple(p.rel, p.t);
    return std::move(b).build();
}

/// Writes the text format; elements are renamed 1..n in universe order. With
/// `withIds`, a comment records each element's token.
inline std::string to_text(const Structure& a, bool withIds = false) {
    std::ostringstream os;
    os << "universe " << a.size() << '\n';
    if (a.vocabulary().label_count() > 0) os << "labels " << a.vocabulary().label_count() << '\n';
    for (auto& r : a.vocabulary().relations()) os << "rel " << r.name << ' ' << r.arity << '\n';
    if (withIds)
        for (std::size_t i = 0; i < a.size(); ++i) os << "# element " << i + 1 << " id " << a.id(i).value << '\n';
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.label(i) > 0) os << "label " << i + 1 << ' ' << a.label(i) << '\n';
    for (std::size_t r = 0; r < a.relation_count(); ++r) {
        const auto& rel = a.relation(r);
        for (std::size_t t = 0; t < rel.size(); ++t) {
            os << a.vocabulary().relations()[r].name;
            for (auto x : rel.tuple(t)) os << ' ' << x + 1;
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace ebsp
