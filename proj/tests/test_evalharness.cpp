#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support.hpp"

using namespace normsage;
using namespace testing_support;

namespace {

// Oracle: count every (positive, negative) pair; ties score one half.
double brute_force_auc(const std::vector<std::pair<double, bool>>& s) {
    double wins = 0, pairs = 0;
    for (const auto& p : s)
        if (p.second)
            for (const auto& n : s)
                if (!n.second) {
                    pairs += 1;
                    wins += p.first > n.first ? 1.0 : p.first == n.first ? 0.5 : 0.0;
                }
    return wins / pairs;
}

GroundingCheck with_distribution(double e, double c, double i) {
    GroundingCheck g;
    g.distribution = {e, c, i};
    g.relevance = e + c;
    g.verdict = e >= c && e >= i ? 1 : c >= i ? -1 : 0;
    return g;
}

EvalExample example(int gold, std::optional<std::string> speaker = std::nullopt) {
    EvalExample ex;
    ex.chunk = single_chunk({{"A", "hello"}, {"B", "hi"}});
    ex.norm_text = "Greet people.";
    ex.speaker = std::move(speaker);
    ex.gold = gold;
    return ex;
}

const std::string kGold = NORMSAGE_SOURCE_DIR "/data/gold/grounding.jsonl";
const std::string kCorrectnessGold = NORMSAGE_SOURCE_DIR "/data/gold/correctness.jsonl";

}  // namespace

TEST(AucBinary, WorkedExamples) {
    EXPECT_EQ(auc_binary({{0.9, true}, {0.8, true}, {0.3, false}}), 1.0);
    EXPECT_EQ(auc_binary({{0.9, true}, {0.6, false}, {0.4, true}}), 0.5);
    EXPECT_EQ(auc_binary({{0.5, true}, {0.5, false}}), 0.5);
}

TEST(AucBinary, SingleClassIsUndefined) {
    EXPECT_THROW(auc_binary({{0.1, true}, {0.2, true}}), UndefinedAucError);
    EXPECT_THROW(auc_binary({}), UndefinedAucError);
}

TEST(AucBinary, MatchesBruteForceOnSmallInputs) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 3000; ++trial) {
        std::size_t np = 1 + rng() % 6, nn = 1 + rng() % 6;
        int levels = 1 + static_cast<int>(rng() % 5);  // few levels force ties
        std::vector<std::pair<double, bool>> s;
        for (std::size_t i = 0; i < np; ++i) s.emplace_back(static_cast<double>(rng() % levels) / levels, true);
        for (std::size_t i = 0; i < nn; ++i) s.emplace_back(static_cast<double>(rng() % levels) / levels, false);
        std::shuffle(s.begin(), s.end(), rng);
        EXPECT_EQ(auc_binary(s), brute_force_auc(s));
    }
}

TEST(AucBinary, ReorderingInvariant) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::pair<double, bool>> s;
    for (int i = 0; i < 40; ++i) s.emplace_back(u(rng), i % 3 == 0);
    double a = auc_binary(s);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(s.begin(), s.end(), rng);
        EXPECT_EQ(auc_binary(s), a);
    }
}

TEST(EvalGrounding2, PerfectAndAllIrrelevant) {
    std::vector<EvalExample> ex{example(1), example(-1), example(0), example(0)};
    std::vector<GroundingCheck> perfect{with_distribution(0.9, 0.05, 0.05), with_distribution(0.1, 0.8, 0.1),
                                        with_distribution(0.1, 0.1, 0.8), with_distribution(0.05, 0.05, 0.9)};
    auto r = eval_grounding_2class(ex, perfect, 0.6);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.auc, 1.0);
    EXPECT_EQ(r.n, 4u);

    std::vector<GroundingCheck> none(4, with_distribution(0.1, 0.1, 0.8));
    auto r2 = eval_grounding_2class(ex, none, 0.6);
    EXPECT_EQ(r2.accuracy, 0.5);
    EXPECT_EQ(r2.auc, 0.5);
    EXPECT_THROW(eval_grounding_2class(ex, std::vector<GroundingCheck>(3), 0.6), PreconditionError);
}

TEST(EvalGrounding3, AllCorrectAndUniform) {
    std::vector<EvalExample> ex{example(1), example(-1), example(0)};
    std::vector<GroundingCheck> right{with_distribution(0.8, 0.1, 0.1), with_distribution(0.1, 0.8, 0.1),
                                      with_distribution(0.1, 0.1, 0.8)};
    auto r = eval_grounding_3class(ex, right, false);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.auc, 1.0);
    std::vector<GroundingCheck> uniform(3, with_distribution(1.0 / 3, 1.0 / 3, 1.0 / 3));
    auto u = eval_grounding_3class(ex, uniform, false);
    for (const auto& [c, a] : u.per_class_auc) EXPECT_EQ(a, 0.5) << c;
}

TEST(EvalGrounding3, MacroAucMatchesPairEnumeration) {
    std::vector<EvalExample> ex{example(1), example(1), example(-1), example(-1), example(0), example(0)};
    std::vector<GroundingCheck> p{with_distribution(0.6, 0.3, 0.1), with_distribution(0.3, 0.3, 0.4),
                                  with_distribution(0.2, 0.5, 0.3), with_distribution(0.4, 0.4, 0.2),
                                  with_distribution(0.1, 0.2, 0.7), with_distribution(0.3, 0.2, 0.5)};
    double sum = 0;
    for (int c : {-1, 0, 1}) {
        std::vector<std::pair<double, bool>> s;
        for (std::size_t i = 0; i < ex.size(); ++i) s.emplace_back(p[i].distribution.of(c), ex[i].gold == c);
        sum += brute_force_auc(s);
    }
    auto r = eval_grounding_3class(ex, p, false);
    EXPECT_DOUBLE_EQ(r.auc, sum / 3);

    auto micro = eval_grounding_3class(ex, p, false, AucAveraging::micro);
    std::vector<std::pair<double, bool>> pooled;
    for (int c : {-1, 0, 1})
        for (std::size_t i = 0; i < ex.size(); ++i) pooled.emplace_back(p[i].distribution.of(c), ex[i].gold == c);
    EXPECT_DOUBLE_EQ(micro.auc, brute_force_auc(pooled));
    EXPECT_EQ(micro.accuracy, r.accuracy);
}

TEST(EvalGrounding3, Errors) {
    std::vector<EvalExample> ex{example(1), example(0)};
    std::vector<GroundingCheck> no_dist(2);
    EXPECT_THROW(eval_grounding_3class(ex, no_dist, false), PreconditionError);
    std::vector<GroundingCheck> ok{with_distribution(0.8, 0.1, 0.1), with_distribution(0.1, 0.1, 0.8)};
    EXPECT_THROW(eval_grounding_3class(ex, ok, true), PreconditionError);
}

TEST(EvalGrounding3, TwoClassViewAgrees) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.01, 1);
    std::vector<EvalExample> ex;
    std::vector<GroundingCheck> p;
    for (int i = 0; i < 30; ++i) {
        ex.push_back(example(static_cast<int>(i % 3) - 1));
        double a = u(rng), b = u(rng), c = u(rng), s = a + b + c;
        p.push_back(with_distribution(a / s, b / s, c / s));
    }
    // 2-class report from the 3-class predictions: relevance = entail + contradict mass
    auto direct = eval_grounding_2class(ex, p, 0.6);
    std::vector<std::pair<double, bool>> s;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ex.size(); ++i) {
        double rel = p[i].distribution.entail + p[i].distribution.contradict;
        s.emplace_back(rel, ex[i].gold != 0);
        correct += ((rel >= 0.6) == (ex[i].gold != 0));
    }
    EXPECT_DOUBLE_EQ(direct.auc, brute_force_auc(s));
    EXPECT_DOUBLE_EQ(direct.accuracy, static_cast<double>(correct) / ex.size());
}

TEST(EvalCorrectness, PerfectAndInverted) {
    std::vector<EvalExample> ex{example(1), example(1), example(-1), example(-1)};
    std::vector<CorrectnessCheck> perfect{{1, 0.9, "", {}}, {1, 0.8, "", {}}, {-1, 0.2, "", {}}, {-1, 0.1, "", {}}};
    auto r = eval_correctness(ex, perfect, 0.7);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.auc, 1.0);
    std::vector<CorrectnessCheck> inverted{{-1, 0.1, "", {}}, {-1, 0.2, "", {}}, {1, 0.8, "", {}}, {1, 0.9, "", {}}};
    auto inv = eval_correctness(ex, inverted, 0.7);
    EXPECT_EQ(inv.auc, 0.0);
    EXPECT_EQ(inv.accuracy, 0.0);
    EXPECT_EQ(inv.confusion[0][1], 2u);  // gold +1 predicted -1
}

TEST(EvalReport, AccuracyIsConfusionTrace) {
    std::vector<EvalExample> ex{example(1), example(-1), example(0), example(1)};
    std::vector<GroundingCheck> p{with_distribution(0.8, 0.1, 0.1), with_distribution(0.7, 0.2, 0.1),
                                  with_distribution(0.1, 0.1, 0.8), with_distribution(0.1, 0.1, 0.8)};
    auto r = eval_grounding_3class(ex, p, false);
    std::size_t trace = 0;
    for (std::size_t i = 0; i < r.labels.size(); ++i) trace += r.confusion[i][i];
    EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(trace) / r.n);
    auto j = to_json_report(r);
    EXPECT_EQ(j["n"], 4);
    EXPECT_TRUE(j["per_class_auc"].contains("-1"));
    EXPECT_NE(format_report(r, "grounding").find("Acc"), std::string::npos);
}

TEST(LoadGold, ShippedFixtures) {
    auto g = load_gold(kGold, EvalTask::grounding3);
    ASSERT_EQ(g.size(), 12u);
    EXPECT_EQ(g[0].speaker, "Mr. Khan");
    EXPECT_EQ(g[0].gold, -1);
    EXPECT_TRUE(g[0].gold_explanation);
    EXPECT_EQ(g[0].chunk.utterances.size(), 4u);
    std::map<int, int> counts;
    for (const auto& e : g) ++counts[e.gold];
    EXPECT_EQ(counts, (std::map<int, int>{{-1, 4}, {0, 3}, {1, 5}}));
    EXPECT_EQ(load_gold(kCorrectnessGold, EvalTask::correctness).size(), 12u);
}

TEST(LoadGold, ErrorsCarryLineNumbers) {
    TempDir dir;
    write_bytes(dir / "bad.jsonl",
                "{\"dialogue\":[\"A: hi\"],\"norm\":\"Greet.\",\"gold\":1}\n{\"dialogue\":[\"A: hi\"],\"norm\":\"Greet.\",\"gold\":2}\n");
    try {
        load_gold(dir / "bad.jsonl", EvalTask::grounding3);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    write_bytes(dir / "zero.jsonl", "{\"norm\":\"Be kind.\",\"gold\":0}\n");
    EXPECT_THROW(load_gold(dir / "zero.jsonl", EvalTask::correctness), ParseError);
    write_bytes(dir / "speaker.jsonl", "{\"dialogue\":[\"A: hi\"],\"norm\":\"Greet.\",\"speaker\":\"Z\",\"gold\":1}\n");
    EXPECT_THROW(load_gold(dir / "speaker.jsonl", EvalTask::grounding3), ParseError);
    write_bytes(dir / "empty.jsonl", "");
    EXPECT_TRUE(load_gold(dir / "empty.jsonl", EvalTask::grounding2).empty());
}

TEST(PredictGrounding, LocalizedPromptsDifferFromConversationLevel) {
    auto gold = load_gold(kGold, EvalTask::grounding3);
    TemplateStore t;
    ScriptedBackend b;
    for (const auto& ex : gold) {
        auto resp = grounding(ex.gold == 1 ? 0.8 : 0.1, ex.gold == -1 ? 0.8 : 0.1, ex.gold == 0 ? 0.8 : 0.1, ex.gold);
        b.add(t.render_grd(ex.chunk, ex.norm_text).text, resp);
        b.add(t.render_grd(ex.chunk, ex.norm_text, ex.speaker).text, resp);
    }
    auto plain = predict_grounding(gold, b, t, false);
    auto plain_prompts = b.captured();
    b.clear_captured();
    auto localized = predict_grounding(gold, b, t, true);
    auto localized_prompts = b.captured();
    ASSERT_EQ(plain_prompts.size(), 12u);
    ASSERT_EQ(localized_prompts.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) {
        EXPECT_NE(plain_prompts[i], localized_prompts[i]);
        EXPECT_NE(plain_prompts[i].find("the conversation"), std::string::npos);
        EXPECT_NE(localized_prompts[i].find("what's spoken by " + *gold[i].speaker), std::string::npos);
        EXPECT_EQ(localized[i].speaker, gold[i].speaker);
    }
    EXPECT_EQ(eval_grounding_3class(gold, localized, true).accuracy, 1.0);
    EXPECT_EQ(eval_grounding_3class(gold, plain, false).accuracy, 1.0);
}

TEST(PredictCorrectness, UsesCorTemplate) {
    auto gold = load_gold(kCorrectnessGold, EvalTask::correctness);
    TemplateStore t;
    ScriptedBackend b;
    for (const auto& ex : gold) b.add(t.render_cor(ex.norm_text).text, with_confidence(ex.gold == 1 ? 0.9 : 0.2, ex.gold == 1));
    auto preds = predict_correctness(gold, b, t);
    auto r = eval_correctness(gold, preds, 0.7);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.auc, 1.0);
}
