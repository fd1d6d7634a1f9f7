#include <gtest/gtest.h>

#include <random>

#include "ebsp/corpus.hpp"
#include "ebsp/reduce.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ebsp;

namespace {

OracleLimits wide() {
    OracleLimits l;
    l.fo_max_size = 32;
    return l;
}

/// Brute-force height postcondition: oracle types of every subtree and
/// automaton states; no ancestor/descendant pair may agree on both and on
/// the protected count.
bool no_repeated_path_pair(const OpTree& t, const Alphabet& a, const TreeAutomaton& aut, int m, LogicMode mode,
                           const std::unordered_set<std::uint64_t>& prot = {}) {
    auto states = run(aut, t, a).state;
    std::vector<std::string> types;
    std::vector<std::size_t> pc(t.size(), 0);
    for (std::size_t v = 0; v < t.size(); ++v) {
        auto sub = t.subtree(v);
        types.push_back(type_of(evaluate(sub, a).structure, m, mode, wide()).text);
        for (std::size_t u = 0; u < sub.size(); ++u) pc[v] += prot.count(sub[u].key);
    }
    auto parents = t.parents();
    for (std::size_t b = 1; b < t.size(); ++b)
        for (auto a0 = parents[b]; a0 != SIZE_MAX; a0 = parents[a0])
            if (types[a0] == types[b] && states[a0] == states[b] && pc[a0] == pc[b]) return false;
    return true;
}

}  // namespace

TEST(HeightReduce, ShortTreeUnchanged) {
    auto a = fixture::unions();
    Composer c(a, 2, LogicMode::FO);
    auto aut = default_automaton(a);
    auto t = parse_tree("(union (leaf v) (leaf e2))", a);
    auto r = height_reduce(t, c, aut);
    EXPECT_EQ(r.tree, t);
    EXPECT_EQ(r.report.height_steps, 0u);
}

TEST(HeightReduce, UnionCombOfTwenty) {
    auto a = fixture::unions();
    Composer c(a, 2, LogicMode::FO);
    auto aut = default_automaton(a);
    auto t = fixture::comb(a, "union", "v", 20);
    auto r = height_reduce(t, c, aut);
    auto b = evaluate(r.tree, a).structure;
    auto big = evaluate(t, a).structure;
    EXPECT_LE(b.size(), 3u);
    EXPECT_GE(b.size(), 2u);
    EXPECT_EQ(fo_type(b, 2), fo_type(big, 2, wide()));
    EXPECT_TRUE(is_induced_substructure_by_id(b, big));
    EXPECT_TRUE(r.report.accepted);
    EXPECT_TRUE(r.report.delta1_preserved);
    EXPECT_TRUE(no_repeated_path_pair(r.tree, a, aut, 2, LogicMode::FO));
}

TEST(HeightReduce, WordOfTwenty) {
    auto a = fixture::words();
    Composer c(a, 1, LogicMode::FO);
    auto aut = default_automaton(a);
    auto t = fixture::comb(a, "cat", "a", 20);
    auto r = height_reduce(t, c, aut);
    auto b = evaluate(r.tree, a).structure;
    EXPECT_LT(b.size(), 20u);
    EXPECT_EQ(fo_type(b, 1), fo_type(evaluate(t, a).structure, 1, wide()));
    EXPECT_TRUE(no_repeated_path_pair(r.tree, a, aut, 1, LogicMode::FO));
}

TEST(HeightReduce, RejectedInput) {
    auto a = fixture::unions();
    Composer c(a, 1, LogicMode::FO);
    auto aut = parse_automaton("states ok top\naccept top\nleaf v ok\nleaf e2 ok\nhdfa union s\nhstep union s ok s\nhout union s top\n", a);
    auto t = parse_tree("(union (leaf v) (union (leaf v) (leaf v)))", a);
    EXPECT_THROW(height_reduce(t, c, aut), RejectedTreeError);
}

// Root must be a union: the root is never replaced by a leaf below it.
TEST(HeightReduce, AutomatonStatesBlockReplacement) {
    auto a = fixture::unions();
    Composer c(a, 1, LogicMode::FO);
    auto aut = parse_automaton(
        "states ok top\naccept top\nleaf v ok\nleaf e2 ok\n"
        "hdfa union s\nhstep union s ok s\nhstep union s top s\nhout union s top\n",
        a);
    auto t = fixture::comb(a, "union", "v", 8);
    auto r = height_reduce(t, c, aut);
    EXPECT_TRUE(run(aut, r.tree, a).accepted);
    EXPECT_FALSE(r.tree[0].is_leaf());
    EXPECT_LT(r.tree.size(), t.size());
}

TEST(HeightReduce, ProtectedLeafSurvives) {
    auto a = fixture::unions();
    Composer c(a, 1, LogicMode::FO);
    auto aut = default_automaton(a);
    auto t = fixture::comb(a, "union", "v", 12);
    // deepest-but-one leaf: the right child of the lowest union
    std::uint64_t key = 0;
    for (std::size_t v = 0; v < t.size(); ++v)
        if (t[v].is_leaf()) key = t[v].key;
    auto r = height_reduce(t, c, aut, {key});
    EXPECT_TRUE(r.tree.find_key(key).has_value());
    EXPECT_TRUE(no_repeated_path_pair(r.tree, a, aut, 1, LogicMode::FO, {key}));
}

TEST(HeightReduce, RandomTreesMeetPostcondition) {
    std::mt19937_64 rng(5);
    RandomTreeOptions opt;
    opt.max_leaves = 7;
    for (auto a : {fixture::unions(), fixture::cographs(), fixture::words(), fixture::trees()}) {
        auto aut = default_automaton(a);
        for (int m : {1, 2}) {
            Composer c(a, m, LogicMode::FO, wide());
            for (int i = 0; i < 15; ++i) {
                auto t = random_tree(a, rng, opt);
                auto r = height_reduce(t, c, aut);
                auto A = evaluate(t, a).structure, B = evaluate(r.tree, a).structure;
                EXPECT_TRUE(no_repeated_path_pair(r.tree, a, aut, m, LogicMode::FO)) << to_sexp(t, a);
                EXPECT_TRUE(height_fixpoint(r.tree, annotate(r.tree, c, aut)));
                EXPECT_TRUE(is_induced_substructure_by_id(B, A));
                EXPECT_EQ(fo_type(A, m, wide()), fo_type(B, m, wide())) << to_sexp(t, a);
                EXPECT_LE(r.tree.size(), t.size());
            }
        }
    }
}

TEST(DegreeReduce, ThreeLeavesRankThreeUnchanged) {
    auto a = fixture::unions();
    Composer c(a, 3, LogicMode::FO);
    auto t = fixture::flat(a, "union", "v", 3);
    auto r = degree_reduce(t, c, default_automaton(a));
    EXPECT_EQ(r.tree, t);
    EXPECT_EQ(r.report.degree_steps, 0u);
}

TEST(DegreeReduce, TenLeavesRankTwo) {
    auto a = fixture::unions();
    Composer c(a, 2, LogicMode::FO);
    auto aut = default_automaton(a);
    auto t = fixture::flat(a, "union", "v", 10);
    auto r = degree_reduce(t, c, aut);
    EXPECT_LE(r.tree[0].children.size(), 3u);
    EXPECT_GE(r.tree[0].children.size(), 2u);
    auto b = evaluate(r.tree, a).structure;
    EXPECT_EQ(fo_type(b, 2), fo_type(expand_vocabulary(oracle::isolated(10), a.vocabulary()), 2));
    EXPECT_TRUE(degree_fixpoint(r.tree, a, annotate(r.tree, c, aut)));
}

TEST(DegreeReduce, DistinctChildrenUnchanged) {
    auto a = fixture::words();
    Composer c(a, 3, LogicMode::FO);
    auto t = parse_tree("(cat (leaf a) (leaf b) (leaf a))", a);
    auto r = degree_reduce(t, c, default_automaton(a));
    EXPECT_EQ(r.tree, t);
}

TEST(DegreeReduce, WideRankRejected) {
    auto a = parse_alphabet("leaf v point\nop t union 3\n");
    Composer c(a, 1, LogicMode::FO);
    auto t = fixture::flat(a, "t", "v", 5);
    EXPECT_THROW(degree_reduce(t, c, default_automaton(a)), UnsupportedShapeError);
    EXPECT_NO_THROW(height_reduce(t, c, default_automaton(a)));
}

// Independent check of the splice: evaluated types of prefix folds via the
// oracle; after reduction no two eligible prefixes share type and count.
TEST(DegreeReduce, RandomWideNodes) {
    std::mt19937_64 rng(23);
    for (auto a : {fixture::cographs(), fixture::words(), fixture::trees()}) {
        auto aut = default_automaton(a);
        Composer c(a, 2, LogicMode::FO, wide());
        for (int i = 0; i < 20; ++i) {
            RandomTreeOptions opt;
            opt.min_leaves = 4;
            opt.max_leaves = 7;
            opt.widen = 0.8;
            auto t = random_tree(a, rng, opt);
            auto r = degree_reduce(t, c, aut);
            auto A = evaluate(t, a).structure, B = evaluate(r.tree, a).structure;
            EXPECT_TRUE(is_induced_substructure_by_id(B, A));
            EXPECT_EQ(fo_type(A, 2, wide()), fo_type(B, 2, wide())) << to_sexp(t, a);
            EXPECT_TRUE(run(aut, r.tree, a).accepted);
            for (std::size_t v = 0; v < r.tree.size(); ++v)
                if (!r.tree[v].is_leaf()) EXPECT_GE(r.tree[v].children.size(), 2u);
            EXPECT_TRUE(degree_fixpoint(r.tree, a, annotate(r.tree, c, aut)));
        }
    }
}

TEST(Kernelize, CographTenLeavesMso) {
    auto a = fixture::cographs();
    KernelOptions opt;
    opt.limits.mso_max_size = 10;
    auto aut = default_automaton(a);
    std::mt19937_64 rng(77);
    RandomTreeOptions ro;
    ro.min_leaves = ro.max_leaves = 10;
    auto t = random_tree(a, rng, ro);
    auto k = kernelize(t, a, 2, LogicMode::MSO, aut, {}, opt);
    auto A = evaluate(t, a).structure;
    EXPECT_TRUE(k.certificate.ok());
    EXPECT_TRUE(k.certificate.oracle_checked);
    EXPECT_LE(k.kernel.size(), A.size());
    EXPECT_EQ(mso_type(k.kernel, 2, opt.limits), mso_type(A, 2, opt.limits));

    ElementSet w{A.id(3)};
    auto kw = kernelize(t, a, 2, LogicMode::MSO, aut, w, opt);
    EXPECT_TRUE(kw.kernel.contains(A.id(3)));
    EXPECT_TRUE(kw.certificate.ok());
}

TEST(Kernelize, IdentityWhenAlreadySmall) {
    auto a = fixture::words();
    auto t = parse_tree("(cat (leaf a) (leaf b))", a);
    auto k = kernelize(t, a, 2, LogicMode::FO, default_automaton(a));
    EXPECT_EQ(k.kernel, evaluate(t, a).structure);
    EXPECT_TRUE(k.certificate.ok());
}

// Marking W: the expansion by the marks has the same type in A and B, so
// the unmarked parts agree on formulas about W.
TEST(Kernelize, ProtectedElementsKeepTheirContext) {
    std::mt19937_64 rng(31);
    for (auto a : {fixture::unions(), fixture::cographs(), fixture::words(), fixture::trees()}) {
        auto aut = default_automaton(a);
        for (int i = 0; i < 10; ++i) {
            RandomTreeOptions ro;
            ro.max_leaves = 6;
            auto t = random_tree(a, rng, ro);
            auto A = evaluate(t, a).structure;
            std::vector<ElementId> pick;
            for (std::size_t j = 0; j < std::min<std::size_t>(2, A.size()); ++j) pick.push_back(A.id(rng() % A.size()));
            ElementSet w(pick);
            KernelOptions opt;
            opt.limits = wide();
            auto k = kernelize(t, a, 2, LogicMode::FO, aut, w, opt);
            EXPECT_TRUE(k.certificate.ok()) << to_sexp(t, a);
            for (auto e : w) EXPECT_TRUE(k.kernel.contains(e));
        }
    }
}

TEST(Kernelize, MarkedTreeBuildRoot) {
    auto a = fixture::trees();
    auto t = fixture::comb(a, "node", "x", 9);
    auto A = evaluate(t, a).structure;
    // the element introduced by the root node
    ElementSet w{make_element_id(t[0].key, 0)};
    auto k = kernelize(t, a, 1, LogicMode::FO, default_automaton(a), w);
    EXPECT_TRUE(k.kernel.contains(make_element_id(t[0].key, 0)));
    EXPECT_TRUE(k.certificate.ok());
    EXPECT_LT(k.kernel.size(), A.size());
}

TEST(Kernelize, ForeignElementRejected) {
    auto a = fixture::unions();
    auto t = fixture::comb(a, "union", "v", 3);
    EXPECT_THROW(kernelize(t, a, 1, LogicMode::FO, default_automaton(a), ElementSet{ElementId{999999}}), DomainError);
}

TEST(Scale, IntervalAlreadyMet) {
    auto a = fixture::words();
    Composer c(a, 1, LogicMode::FO);
    auto t = fixture::comb(a, "cat", "a", 5);
    auto r = scale_generate(t, c, default_automaton(a), {1, LogicMode::FO, 4, 6});
    EXPECT_EQ(r.tree, t);
    EXPECT_EQ(r.report.steps, 0u);
}

TEST(Scale, WordUp) {
    auto a = fixture::words();
    Composer c(a, 1, LogicMode::FO);
    auto t = fixture::comb(a, "cat", "a", 5);
    auto r = scale_generate(t, c, default_automaton(a), {1, LogicMode::FO, 20, 30});
    auto B = evaluate(r.tree, a).structure;
    EXPECT_GE(B.size(), 20u);
    EXPECT_LE(B.size(), 30u);
    EXPECT_TRUE(r.report.ok());
    EXPECT_EQ(fo_type(B, 1, wide()), fo_type(evaluate(t, a).structure, 1));
    EXPECT_TRUE(is_induced_substructure_by_id(evaluate(t, a).structure, B));
}

TEST(Scale, UnionHorizontal) {
    auto a = fixture::unions();
    Composer c(a, 2, LogicMode::FO);
    auto t = fixture::flat(a, "union", "v", 3);
    auto r = scale_generate(t, c, default_automaton(a), {2, LogicMode::FO, 8, 9});
    EXPECT_EQ(r.tree.size(), 1 + evaluate(r.tree, a).structure.size());  // still one flat node
    EXPECT_GE(r.tree[0].children.size(), 8u);
    EXPECT_LE(r.tree[0].children.size(), 9u);
    EXPECT_TRUE(r.report.ok());
    EXPECT_TRUE(r.report.oracle_checked);
}

TEST(Scale, Down) {
    auto a = fixture::unions();
    Composer c(a, 2, LogicMode::FO);
    auto t = fixture::comb(a, "union", "v", 12);
    auto r = scale_generate(t, c, default_automaton(a), {2, LogicMode::FO, 4, 5});
    auto B = evaluate(r.tree, a).structure;
    EXPECT_GE(B.size(), 4u);
    EXPECT_LE(B.size(), 5u);
    EXPECT_TRUE(r.report.ok());
    EXPECT_TRUE(is_induced_substructure_by_id(B, evaluate(t, a).structure));
}

TEST(Scale, Infeasible) {
    auto a = fixture::unions();
    Composer c(a, 3, LogicMode::FO);
    auto t = fixture::flat(a, "union", "v", 3);  // K1 ≢3 2K1 ≢3 3K1: no repeat
    EXPECT_THROW(scale_generate(t, c, default_automaton(a), {3, LogicMode::FO, 10, 12}), InfeasibleError);
    // a single leaf cannot grow
    Composer c1(a, 1, LogicMode::FO);
    try {
        scale_generate(parse_tree("(leaf v)", a), c1, default_automaton(a), {1, LogicMode::FO, 5, 6});
        FAIL();
    } catch (const InfeasibleError& e) {
        EXPECT_FALSE(e.achievable().empty());
    }
}

TEST(Scale, GranularityAboveWidth) {
    // pumping the two-element block (a b) only reaches odd sizes
    auto a = fixture::words();
    Composer c(a, 1, LogicMode::FO);
    auto t = parse_tree("(cat (leaf a) (leaf b) (leaf a) (leaf b) (leaf a))", a);
    try {
        scale_generate(t, c, default_automaton(a), {1, LogicMode::FO, 10, 10});
        SUCCEED();  // some repeat of size one may exist
    } catch (const InfeasibleError& e) {
        for (auto x : e.achievable()) EXPECT_NE(x, 10u);
    }
}

TEST(Scale, RandomGrowAndShrink) {
    std::mt19937_64 rng(13);
    int grown = 0;
    for (auto a : {fixture::unions(), fixture::cographs(), fixture::words(), fixture::trees()}) {
        auto aut = default_automaton(a);
        Composer c(a, 1, LogicMode::FO);
        for (int i = 0; i < 10; ++i) {
            RandomTreeOptions ro;
            ro.min_leaves = 4;
            ro.max_leaves = 8;
            auto t = random_tree(a, rng, ro);
            const std::size_t n = evaluate(t, a).structure.size();
            for (auto [lo, hi] : {std::pair{n + 5, n + 7}, std::pair{std::size_t{2}, std::size_t{3}}}) {
                try {
                    auto r = scale_generate(t, c, aut, {1, LogicMode::FO, lo, hi});
                    EXPECT_TRUE(r.report.ok()) << to_sexp(t, a);
                    auto s = evaluate(r.tree, a).structure.size();
                    EXPECT_GE(s, lo);
                    EXPECT_LE(s, hi);
                    grown += lo > n;
                } catch (const InfeasibleError&) {
                }
            }
        }
    }
    EXPECT_GT(grown, 20);
}
