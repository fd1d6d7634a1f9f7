#include <gtest/gtest.h>

#include <random>

#include "ebsp/enumerate.hpp"
#include "ebsp/eval.hpp"
#include "ebsp/random_formula.hpp"
#include "ebsp/types.hpp"
#include "oracles.hpp"

using namespace ebsp;

namespace {

Structure word(std::size_t n) {
    // a^n over the linear order signature
    return oracle::linear_order(n);
}

/// Rank-2 template family: Q1 x. Q2 y. B(x,y) with B a conjunction of
/// literals over {E(x,y), E(y,x), E(x,x), x=y, L1(y)}; in MSO also
/// QS X. Q y. (±X(y) op lit(y)).
std::vector<FormulaPtr> templates(LogicMode mode) {
    const Vocabulary voc({{"E", 2}}, 1);
    std::vector<std::string> lits = {"E(x,y)", "E(y,x)", "E(x,x)", "x=y", "L1(y)"};
    std::vector<FormulaPtr> out;
    const char* q[] = {"exists", "forall"};
    for (int mask = 0; mask < 32; ++mask)
        for (int sign = 0; sign < 32; sign += 7) {
            std::string body;
            for (int i = 0; i < 5; ++i) {
                if (!(mask >> i & 1)) continue;
                if (!body.empty()) body += " & ";
                body += ((sign >> i) & 1 ? "~" : "") + lits[static_cast<std::size_t>(i)];
            }
            if (body.empty()) body = "x=x";
            for (auto a : q)
                for (auto b : q) out.push_back(parse_formula(std::string(a) + " x. " + b + " y. " + body, voc, mode));
        }
    if (mode == LogicMode::MSO)
        for (auto a : {"existsSet", "forallSet"})
            for (auto b : q)
                for (auto lit : {"E(y,y)", "L1(y)", "y=y"})
                    for (auto op : {" & ", " | ", " -> "})
                        for (auto neg : {"", "~"})
                            out.push_back(parse_formula(std::string(a) + " X. " + b + " y. (" + neg + "X(y)" + op + lit + ")",
                                                        voc, mode));
    return out;
}

}  // namespace

TEST(FoType, IsomorphicStructuresShareFingerprint) {
    std::mt19937_64 rng(1);
    for (auto& s : enumerate_structures(make_vocabulary({{"E", 2}}), 3)) {
        auto p = oracle::permuted(s, rng);
        for (int m = 0; m <= 3; ++m) EXPECT_EQ(fo_type(s, m), fo_type(p, m));
    }
}

TEST(FoType, EdgeVersusTwoVertices) {
    auto k2 = oracle::graph(2, {{0, 1}});
    auto two = oracle::isolated(2);
    EXPECT_EQ(fo_type(k2, 1), fo_type(two, 1));
    EXPECT_NE(fo_type(k2, 2).text, fo_type(two, 2).text);
    EXPECT_FALSE(equiv(k2, two, 2, LogicMode::FO));
}

TEST(FoType, LinearOrders) {
    EXPECT_TRUE(equiv(oracle::linear_order(3), oracle::linear_order(4), 2, LogicMode::FO));
    EXPECT_FALSE(equiv(oracle::linear_order(2), oracle::linear_order(3), 2, LogicMode::FO));
    // sanity prediction from the 2^m - 1 threshold
    EXPECT_TRUE(equiv(oracle::linear_order(7), oracle::linear_order(8), 3, LogicMode::FO));
    EXPECT_FALSE(equiv(oracle::linear_order(6), oracle::linear_order(7), 3, LogicMode::FO));
}

TEST(FoType, WordsAtRankOne) { EXPECT_TRUE(equiv(word(5), word(9), 1, LogicMode::FO)); }

TEST(FoType, BudgetCap) {
    EXPECT_THROW(fo_type(oracle::isolated(11), 1), BudgetError);
    OracleLimits big;
    big.fo_max_size = 12;
    EXPECT_NO_THROW(fo_type(oracle::isolated(11), 1, big));
    EXPECT_THROW(mso_type(oracle::isolated(9), 1), BudgetError);
    EXPECT_THROW(mso_type(oracle::isolated(2), 4), BudgetError);
}

TEST(FoType, DeterministicText) {
    auto a = oracle::cycle(5);
    EXPECT_EQ(fo_type(a, 3).text, fo_type(a, 3).text);
    EXPECT_EQ(fo_type(a, 2).hex().size(), 16u);
}

TEST(MsoType, Examples) {
    auto c4 = oracle::cycle(4);
    EXPECT_EQ(mso_type(c4, 2), mso_type(c4, 2));
    EXPECT_FALSE(equiv(oracle::cycle(3), oracle::cycle(4), 3, LogicMode::MSO));
    EXPECT_TRUE(equiv(oracle::isolated(2), oracle::isolated(3), 1, LogicMode::MSO));
    // 2-colorability separates C3 from C4, in agreement with the type oracle
    auto f = parse_formula("existsSet X. forall x. forall y. (E(x,y) -> ((X(x) & ~X(y)) | (X(y) & ~X(x))))",
                           Vocabulary({{"E", 2}}, 0), LogicMode::MSO);
    EXPECT_NE(eval_formula(*f, oracle::cycle(3)), eval_formula(*f, c4));
}

TEST(Types, RefinementInRank) {
    auto all = enumerate_structures(make_vocabulary({{"E", 2}}), 3);
    for (int m = 0; m < 2; ++m)
        for (auto mode : {LogicMode::FO, LogicMode::MSO})
            for (std::size_t i = 0; i < all.size(); ++i)
                for (std::size_t j = i + 1; j < all.size(); ++j)
                    if (equiv(all[i], all[j], m + 1, mode)) {
                        EXPECT_TRUE(equiv(all[i], all[j], m, mode));
                    }
}

TEST(Types, MsoRefinesFo) {
    auto all = enumerate_structures(make_vocabulary({{"E", 2}}), 3);
    for (int m = 0; m <= 2; ++m) {
        std::vector<TypeFingerprint> f, s;
        for (auto& a : all) {
            f.push_back(fo_type(a, m));
            s.push_back(mso_type(a, m));
        }
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t j = i + 1; j < all.size(); ++j)
                if (s[i] == s[j]) {
                    EXPECT_TRUE(f[i] == f[j]);
                }
    }
}

TEST(Types, CongruentWithSatisfaction) {
    // structures: all labeled digraphs up to 3 elements, plus simple graphs on 4
    auto all = enumerate_structures(make_vocabulary({{"E", 2}}, 1), 3);
    EnumerationOptions sg;
    sg.simple_graphs = true;
    for (auto& s : enumerate_structures(make_vocabulary({{"E", 2}}, 1), 4, sg))
        if (s.size() == 4) all.push_back(s);
    for (auto mode : {LogicMode::FO, LogicMode::MSO}) {
        auto family = templates(mode);
        std::vector<TypeFingerprint> t;
        for (auto& a : all) t.push_back(type_of(a, 2, mode));
        std::vector<std::vector<char>> truth(all.size());
        for (std::size_t i = 0; i < all.size(); ++i)
            for (auto& f : family) truth[i].push_back(eval_formula(*f, all[i]));
        std::size_t separatedPairs = 0;
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t j = i + 1; j < all.size(); ++j) {
                if (t[i] == t[j])
                    EXPECT_EQ(truth[i], truth[j]);
                else
                    ++separatedPairs;
            }
        EXPECT_GT(separatedPairs, 0u);
    }
}

TEST(Types, RandomSentencesAgreeOnEquivalentPairs) {
    std::mt19937_64 rng(4);
    auto voc = make_vocabulary({{"E", 2}});
    auto all = enumerate_structures(voc, 3);
    for (auto mode : {LogicMode::FO, LogicMode::MSO}) {
        RandomFormulaOptions opt;
        opt.mode = mode;
        opt.max_rank = 2;
        std::vector<FormulaPtr> fs;
        for (int i = 0; i < 60; ++i) fs.push_back(random_sentence(*voc, opt, rng));
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t j = i + 1; j < all.size(); ++j) {
                if (!equiv(all[i], all[j], 2, mode)) continue;
                for (auto& f : fs) EXPECT_EQ(eval_formula(*f, all[i]), eval_formula(*f, all[j]));
            }
    }
}

TEST(Types, CollisionDetected) {
    auto a = make_fingerprint(LogicMode::FO, 1, "x");
    auto b = a;
    b.text = "y";
    EXPECT_THROW((void)(a == b), CollisionError);
}
