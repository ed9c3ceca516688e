#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "set2seq/metrics/report.hpp"
#include "oracles.hpp"

using namespace set2seq;

using set2seq::testing::discordant_by_pairs;

TEST(KendallTau, IdentityReverseAndHandCase) {
    auto t = Permutation({3, 1, 4, 0, 2});
    EXPECT_EQ(kendall_tau(t, t), 100.0);
    EXPECT_EQ(kendall_tau(t.reversed(), t), -100.0);
    EXPECT_NEAR(kendall_tau(Permutation({0, 2, 1}), Permutation({0, 1, 2})), 100.0 / 3.0, 1e-12);
    EXPECT_THROW(kendall_tau(Permutation({0}), Permutation({0})), Error);
    EXPECT_THROW(kendall_tau(Permutation({0, 1}), Permutation({0, 1, 2})), Error);
}

TEST(KendallTau, MatchesPairEnumerationExactly) {
    SeededRng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(2, 50));
        Permutation a(rng.permutation(n)), b(rng.permutation(n));
        const auto d = discordant_by_pairs(a, b);
        ASSERT_EQ(discordant_pairs(a, b), d) << a.str() << " vs " << b.str();
        const double pairs = static_cast<double>(n * (n - 1) / 2);
        ASSERT_EQ(kendall_tau(a, b), 100.0 * (1.0 - 2.0 * static_cast<double>(d) / pairs));
        ASSERT_EQ(kendall_tau(a, b), kendall_tau(b, a));
        ASSERT_EQ(kendall_tau(a, a), 100.0);
    }
}

TEST(Pmr, Fractions) {
    std::vector<Permutation> t{Permutation({0, 1}), Permutation({1, 0}), Permutation({0, 1, 2}), Permutation({2, 1, 0})};
    EXPECT_EQ(pmr(t, t), 100.0);
    std::vector<Permutation> none{Permutation({1, 0}), Permutation({0, 1}), Permutation({0, 2, 1}), Permutation({2, 0, 1})};
    EXPECT_EQ(pmr(none, t), 0.0);
    auto one = none;
    one[2] = t[2];
    EXPECT_EQ(pmr(one, t), 25.0);
    // pmr = 100 implies every per-instance tau is 100
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(kendall_tau(t[i], t[i]), 100.0);
    EXPECT_THROW(pmr({t[0]}, t), Error);
}

TEST(ValidityRate, GeneratorTargetsAndHandFixture) {
    for (auto kind : {GrammarKind::anbncn, GrammarKind::anbkcnk, GrammarKind::dyck}) {
        auto cfg = GrammarConfig::defaults(kind);
        cfg.count = 200;
        cfg.n_max = 8;
        cfg.k_max = 4;
        auto ds = gen_grammar(cfg);
        std::vector<Permutation> t;
        for (const auto& i : ds) t.push_back(*i.target);
        EXPECT_EQ(validity_rate(checker_for(ds[0]), ds, t), 100.0);
    }
    for (int order : {2, 3, 4, 5}) {
        RulesetConfig rc;
        rc.n_rel = order;
        rc.count = 50;
        rc.card_min = 6;
        rc.card_max = 9;
        auto ds = gen_ruleset(rc);
        std::vector<Permutation> t;
        for (const auto& i : ds) t.push_back(*i.target);
        EXPECT_EQ(validity_rate(checker_for(ds[0]), ds, t), 100.0);
    }

    // 10 ANBNCN(n=2) instances; predictions chosen by hand: 6 grammatical, 4 not.
    SeededRng rng(2);
    Dataset ds;
    std::vector<Permutation> preds;
    const std::vector<std::string> wanted{"aabbcc", "abcabc", "aabbcc", "ccbbaa", "aabbcc",
                                          "aabbcc", "aabcbc", "aabbcc", "abacbc", "aabbcc"};
    for (const auto& w : wanted) {
        auto inst = make_grammar_instance(GrammarKind::anbncn, "aabbcc", rng);
        // realise the wanted symbol string from the instance's tokens
        auto sym = grammar_symbols(inst);
        std::vector<bool> used(6, false);
        std::vector<std::size_t> order;
        for (char c : w)
            for (std::size_t i = 0; i < 6; ++i)
                if (!used[i] && sym[i] == c) {
                    used[i] = true;
                    order.push_back(i);
                    break;
                }
        preds.emplace_back(order);
        ds.push_back(std::move(inst));
    }
    EXPECT_EQ(ordered_symbols(ds[1], preds[1]), "abcabc");
    EXPECT_EQ(validity_rate(checker_for(ds[0]), ds, preds), 60.0);
}

TEST(AvgTourLength, SquareAndMeanOfParts) {
    Matrix<double> sq(4, 2);
    sq << 0, 0, 0, 1, 1, 1, 1, 0;
    Instance inst;
    inst.elements = sq;
    EXPECT_NEAR(avg_tour_length({inst}, {Permutation::identity(4)}, true), 4.0, 1e-15);
    TspConfig tc;
    tc.count = 20;
    tc.with_targets = false;
    auto ds = gen_tsp(tc);
    SeededRng rng(3);
    std::vector<Permutation> preds;
    double total = 0;
    for (const auto& i : ds) {
        preds.emplace_back(rng.permutation(i.size()));
        total += tour_length(i.elements, preds.back(), true);
    }
    EXPECT_NEAR(avg_tour_length(ds, preds, true), total / 20, 1e-12);
}

TEST(ComparablePrediction, GrammarDuplicatesDoNotCount) {
    SeededRng rng(4);
    auto inst = make_grammar_instance(GrammarKind::anbncn, "aaabbbccc", rng);
    // swap two 'a' tokens in the target: same string, same canonical form
    auto t = inst.target->indices();
    std::swap(t[0], t[2]);
    Permutation swapped(t);
    EXPECT_NE(swapped, *inst.target);
    EXPECT_EQ(comparable_prediction(inst, swapped), *inst.target);
    Instance tsp;
    tsp.task = "tsp";
    tsp.elements = Matrix<double>::Zero(3, 2);
    EXPECT_EQ(comparable_prediction(tsp, Permutation({2, 0, 1})), Permutation({2, 0, 1}));
    EXPECT_FALSE(checker_for(tsp));
}

TEST(AggregateRuns, SampleStdAndOrder) {
    auto run = [](double v) {
        EvalReport r;
        r.task = "t";
        r.config_hash = "h";
        r.metrics["pmr"] = Summary{v, 1.0, 50};
        return r;
    };
    auto one = aggregate_runs({run(42)});
    EXPECT_EQ(one.metrics["pmr"].std, 0.0);
    EXPECT_EQ(one.metrics["pmr"].count, 1u);
    auto three = aggregate_runs({run(10), run(20), run(30)});
    EXPECT_DOUBLE_EQ(three.metrics["pmr"].mean, 20.0);
    EXPECT_DOUBLE_EQ(three.metrics["pmr"].std, 10.0);
    auto shuffled = aggregate_runs({run(30), run(10), run(20)});
    EXPECT_DOUBLE_EQ(shuffled.metrics["pmr"].mean, three.metrics["pmr"].mean);
    EXPECT_DOUBLE_EQ(shuffled.metrics["pmr"].std, three.metrics["pmr"].std);
    EXPECT_THROW(aggregate_runs({}), Error);
}

TEST(ReportOutput, CsvColumnsAndJsonRoundTrip) {
    EvalReport r;
    r.task = "grammar:anbncn";
    r.config_hash = "00ff";
    r.metrics["tau"] = Summary{87.5, 1.25, 3};
    r.metrics["validity"] = Summary{100, 0, 3};
    std::ostringstream os;
    write_report_csv({r}, os);
    EXPECT_EQ(os.str(),
              "task,metric,mean,std,count,config_hash\n"
              "grammar:anbncn,tau,87.5,1.25,3,00ff\n"
              "grammar:anbncn,validity,100,0,3,00ff\n");
    auto back = report_from_json(report_to_json(r));
    EXPECT_EQ(back.task, r.task);
    EXPECT_EQ(back.metrics["tau"].std, 1.25);
    EXPECT_EQ(pm(r.metrics["tau"]), "87.50 ± 1.25");
}
