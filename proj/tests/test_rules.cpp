#include <doctest.h>

#include <random>

#include "coa/rules.hpp"
#include "oracles.hpp"

using namespace coa;
using namespace coa::rules;

namespace {

ExpertRuleEvaluation eval_of(const std::string& expert, const std::string& rule,
                             std::map<std::string, Judgment> judgments) {
    ExpertRuleEvaluation e;
    e.expert_id = expert;
    e.rule_id = rule;
    e.judgments = std::move(judgments);
    return e;
}

constexpr Judgment I = Judgment::kIncrease;
constexpr Judgment D = Judgment::kDecrease;
constexpr Judgment N = Judgment::kNoImpact;

}  // namespace

TEST_CASE("rule_objective_alignment is the increase-decrease fraction gap") {
    // 3 increase, 1 decrease, 1 no_impact over five experts.
    std::vector<ExpertRuleEvaluation> evals{
        eval_of("e1", "r1", {{"o1", I}}), eval_of("e2", "r1", {{"o1", I}}),
        eval_of("e3", "r1", {{"o1", I}}), eval_of("e4", "r1", {{"o1", D}}),
        eval_of("e5", "r1", {{"o1", N}}),
    };
    CHECK(rule_objective_alignment(evals, "r1", "o1") ==
          doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("rule_objective_alignment endpoints and errors") {
    std::vector<ExpertRuleEvaluation> unanimous{
        eval_of("e1", "r1", {{"o1", I}}),
        eval_of("e2", "r1", {{"o1", I}}),
    };
    CHECK(rule_objective_alignment(unanimous, "r1", "o1") == 1.0);

    std::vector<ExpertRuleEvaluation> balanced{
        eval_of("e1", "r1", {{"o1", I}}),
        eval_of("e2", "r1", {{"o1", D}}),
    };
    CHECK(rule_objective_alignment(balanced, "r1", "o1") == 0.0);

    CHECK_THROWS_WITH_AS(rule_objective_alignment(unanimous, "r1", "o_missing"),
                         doctest::Contains("o_missing"), ValidationError);
}

TEST_CASE("rule_objective_alignment ignores evaluator labels and set duplication") {
    std::vector<ExpertRuleEvaluation> evals{
        eval_of("e1", "r1", {{"o1", I}}),
        eval_of("e2", "r1", {{"o1", D}}),
        eval_of("e3", "r1", {{"o1", I}}),
    };
    const double base = rule_objective_alignment(evals, "r1", "o1");

    std::vector<ExpertRuleEvaluation> relabeled = evals;
    relabeled[0].expert_id = "zz";
    relabeled[2].expert_id = "aa";
    std::swap(relabeled[0], relabeled[2]);
    CHECK(rule_objective_alignment(relabeled, "r1", "o1") == base);

    std::vector<ExpertRuleEvaluation> doubled = evals;
    for (auto copy : evals) {
        copy.expert_id += "_dup";
        doubled.push_back(copy);
    }
    CHECK(rule_objective_alignment(doubled, "r1", "o1") == base);
}

TEST_CASE("alignment magnitude is capped by the non-abstaining fraction") {
    std::mt19937_64 rng(29ULL);
    const Judgment letters[3] = {I, D, N};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ExpertRuleEvaluation> evals;
        const int n = 1 + static_cast<int>(rng() % 9);
        int no_impact = 0;
        for (int e = 0; e < n; ++e) {
            const Judgment j = letters[rng() % 3];
            if (j == N) ++no_impact;
            evals.push_back(eval_of("e" + std::to_string(e), "r", {{"o", j}}));
        }
        const double phi = rule_objective_alignment(evals, "r", "o");
        const double cap = 1.0 - static_cast<double>(no_impact) / static_cast<double>(n);
        CHECK(std::fabs(phi) <= cap + 1e-15);
    }
}

TEST_CASE("rule_weight is the unweighted mean over the domain objectives") {
    const std::map<std::string, double> phi{{"o1", 1.0}, {"o2", 0.0}, {"o3", 0.4}};
    CHECK(rule_weight(phi, {"o1", "o2", "o3"}) ==
          doctest::Approx(1.4 / 3.0).epsilon(1e-12));
    CHECK(rule_weight({{"o1", 0.35}, {"o2", 0.35}}, {"o1", "o2"}) == 0.35);
    CHECK(rule_weight({{"o1", -0.2}}, {"o1"}) == -0.2);
}

TEST_CASE("rule_weight lists every missing objective") {
    CHECK_THROWS_WITH_AS(rule_weight({{"o1", 0.5}}, {"o1", "o2", "o3"}),
                         doctest::Contains("o2"), ValidationError);
    CHECK_THROWS_WITH_AS(rule_weight({{"o1", 0.5}}, {"o1", "o2", "o3"}),
                         doctest::Contains("o3"), ValidationError);
}

TEST_CASE("rule_weight is odd under alignment negation") {
    std::mt19937_64 rng(31ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::map<std::string, double> phi, neg;
        std::vector<std::string> objectives;
        for (int i = 0; i < 4; ++i) {
            const std::string id = "o" + std::to_string(i);
            const double v = unit(rng);
            phi[id] = v;
            neg[id] = -v;
            objectives.push_back(id);
        }
        CHECK(rule_weight(neg, objectives) ==
              doctest::Approx(-rule_weight(phi, objectives)).epsilon(1e-12));
    }
}

namespace {

Registry small_registry() {
    Registry reg;
    reg.domains = {{"MH1", "Informational queries", "Factual questions."}};
    Objective o1{"o1", ObjectiveKind::kGoodOutcome, "t1", 0.9, 0.9, 0.5};
    Objective o2{"o2", ObjectiveKind::kBadOutcome, "t2", 0.9, 0.9, 0.5};
    reg.objectives["MH1"] = {o1, o2};
    Rule r1;
    r1.id = "r1";
    r1.text = "rule one";
    r1.domain = "MH1";
    Rule r2 = r1;
    r2.id = "r2";
    r2.text = "rule two";
    reg.rules["MH1"] = {r1, r2};
    return reg;
}

}  // namespace

TEST_CASE("aggregate_profiles computes alignments, counts, and weights") {
    const Registry reg = small_registry();
    std::vector<ExpertRuleEvaluation> evals{
        eval_of("e1", "r1", {{"o1", I}, {"o2", I}}),
        eval_of("e2", "r1", {{"o1", I}, {"o2", D}}),
        eval_of("e3", "r1", {{"o1", N}}),  // skipped o2: excluded from that denominator
        eval_of("e1", "r2", {{"o1", D}, {"o2", N}}),
        eval_of("e2", "r2", {{"o1", D}, {"o2", N}}),
    };
    const auto profiles = aggregate_profiles(evals, reg);
    REQUIRE(profiles.size() == 2);

    const auto& p1 = profiles[0];
    CHECK(p1.rule_id == "r1");
    CHECK(p1.objective_alignment.at("o1") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(p1.objective_alignment.at("o2") == 0.0);  // 1 up 1 down over 2 evaluators
    CHECK(p1.evaluator_count.at("o1") == 3);
    CHECK(p1.evaluator_count.at("o2") == 2);
    CHECK(p1.weight == doctest::Approx((2.0 / 3.0 + 0.0) / 2.0).epsilon(1e-15));

    const auto& p2 = profiles[1];
    CHECK(p2.objective_alignment.at("o1") == -1.0);
    CHECK(p2.weight == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("aggregate_profiles enforces ids and uniqueness") {
    const Registry reg = small_registry();
    std::vector<ExpertRuleEvaluation> unknown_rule{eval_of("e1", "r9", {{"o1", I}})};
    CHECK_THROWS_WITH_AS(aggregate_profiles(unknown_rule, reg), doctest::Contains("r9"),
                         ValidationError);

    std::vector<ExpertRuleEvaluation> unknown_objective{eval_of("e1", "r1", {{"o9", I}})};
    CHECK_THROWS_WITH_AS(aggregate_profiles(unknown_objective, reg), doctest::Contains("o9"),
                         ValidationError);

    std::vector<ExpertRuleEvaluation> duplicate{
        eval_of("e1", "r1", {{"o1", I}}),
        eval_of("e1", "r1", {{"o1", D}}),
    };
    CHECK_THROWS_WITH_AS(aggregate_profiles(duplicate, reg), doctest::Contains("e1"),
                         ValidationError);
}

TEST_CASE("recomputing the weight from a profile matches the stored value") {
    const Registry reg = small_registry();
    std::vector<ExpertRuleEvaluation> evals{
        eval_of("e1", "r1", {{"o1", I}, {"o2", D}}),
        eval_of("e2", "r1", {{"o1", I}, {"o2", N}}),
        eval_of("e3", "r1", {{"o1", D}, {"o2", I}}),
    };
    for (const auto& profile : aggregate_profiles(evals, reg)) {
        double sum = 0.0;
        for (const auto& [id, phi] : profile.objective_alignment) sum += phi;
        const double mean = sum / static_cast<double>(profile.objective_alignment.size());
        CHECK(std::fabs(mean - profile.weight) <= 1e-9);
    }
}

namespace {

GradedResponse graded(const std::string& id, double adherence_r1, double truth) {
    GradedResponse g;
    g.id = id;
    g.domain = "MH1";
    g.adherence["r1"] = {adherence_r1, std::nullopt};
    g.ground_truth = truth;
    return g;
}

Rule weighted_rule(const std::string& id, double weight) {
    Rule r;
    r.id = id;
    r.domain = "MH1";
    r.weight = weight;
    return r;
}

}  // namespace

TEST_CASE("rule_usefulness is the contribution-truth correlation") {
    const Rule r1 = weighted_rule("r1", 0.4);
    // Contributions exactly proportional to truth: correlation 1.
    std::vector<GradedResponse> proportional{
        graded("a", 0.2, 0.08), graded("b", 0.5, 0.2), graded("c", -0.4, -0.16)};
    CHECK(rule_usefulness(proportional, r1) == doctest::Approx(1.0).epsilon(1e-12));

    // Constant contributions: undefined.
    std::vector<GradedResponse> flat{graded("a", 0.3, 0.1), graded("b", 0.3, 0.4),
                                     graded("c", 0.3, 0.2)};
    CHECK_THROWS_AS(rule_usefulness(flat, r1), DegenerateError);

    // Fewer than 3 points: undefined.
    std::vector<GradedResponse> two{graded("a", 0.1, 0.2), graded("b", 0.4, 0.3)};
    CHECK_THROWS_AS(rule_usefulness(two, r1), ValidationError);
}

TEST_CASE("rule_usefulness matches the direct Pearson oracle") {
    const Rule r1 = weighted_rule("r1", 0.37);
    std::vector<GradedResponse> responses{
        graded("a", 0.9, 0.7),  graded("b", -0.3, -0.1), graded("c", 0.2, 0.35),
        graded("d", -0.8, -0.6), graded("e", 0.5, 0.1),
    };
    std::vector<double> contributions, truths;
    for (const auto& g : responses) {
        contributions.push_back(g.adherence.at("r1").value * 0.37);
        truths.push_back(*g.ground_truth);
    }
    CHECK(rule_usefulness(responses, r1) ==
          doctest::Approx(oracle::pearson(contributions, truths)).epsilon(1e-12));
}

TEST_CASE("expert_signal_correlations reproduces self-correlation and the oracle") {
    // Four rules in one domain whose signals equal their usefulness: all 1.
    std::vector<RuleSignals> signals;
    std::map<std::string, double> usefulness;
    for (int i = 0; i < 4; ++i) {
        RuleSignals s;
        s.rule_id = "r" + std::to_string(i);
        s.domain = "MH1";
        s.support_rate = 0.1 * i;
        s.weight = 0.1 * i;
        s.importance_mean = 0.1 * i;
        signals.push_back(s);
        usefulness[s.rule_id] = 0.1 * i;
    }
    const SignalCorrelationTable table = expert_signal_correlations(signals, usefulness);
    for (const auto& name : {kSignalSupport, kSignalAlignment, kSignalImportance}) {
        CHECK(*table.cells.at(name).at("MH1").r == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(*table.cells.at(name).at("avg").r == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("expert_signal_correlations marks constant signals undefined") {
    std::vector<RuleSignals> signals;
    std::map<std::string, double> usefulness;
    for (int i = 0; i < 4; ++i) {
        RuleSignals s;
        s.rule_id = "r" + std::to_string(i);
        s.domain = "MH1";
        s.support_rate = 0.5;  // constant: undefined correlation
        s.weight = 0.1 * i;
        s.importance_mean = 0.05 * i;
        signals.push_back(s);
        usefulness[s.rule_id] = 0.2 * i;
    }
    const SignalCorrelationTable table = expert_signal_correlations(signals, usefulness);
    CHECK(!table.cells.at(kSignalSupport).at("MH1").r.has_value());
    CHECK(!table.cells.at(kSignalSupport).at("MH1").note.empty());
    CHECK(table.cells.at(kSignalAlignment).at("MH1").r.has_value());
}

TEST_CASE("expert_signal_correlations averages per-domain correlations") {
    std::mt19937_64 rng(37ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<RuleSignals> signals;
    std::map<std::string, double> usefulness;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> support_by_domain;
    for (const std::string domain : {"MH1", "MH2", "MH3"}) {
        for (int i = 0; i < 5; ++i) {
            RuleSignals s;
            s.rule_id = domain + "_r" + std::to_string(i);
            s.domain = domain;
            s.support_rate = unit(rng);
            s.weight = unit(rng);
            s.importance_mean = unit(rng);
            signals.push_back(s);
            const double u = unit(rng);
            usefulness[s.rule_id] = u;
            support_by_domain[domain].first.push_back(s.support_rate);
            support_by_domain[domain].second.push_back(u);
        }
    }
    const SignalCorrelationTable table = expert_signal_correlations(signals, usefulness);
    double expected_avg = 0.0;
    for (const auto& [domain, series] : support_by_domain) {
        const double r = oracle::pearson(series.first, series.second);
        CHECK(*table.cells.at(kSignalSupport).at(domain).r == doctest::Approx(r).epsilon(1e-12));
        expected_avg += r;
    }
    expected_avg /= 3.0;
    CHECK(*table.cells.at(kSignalSupport).at("avg").r ==
          doctest::Approx(expected_avg).epsilon(1e-12));
}

TEST_CASE("expert_signal_correlations requires 3 rules per domain") {
    std::vector<RuleSignals> signals;
    std::map<std::string, double> usefulness;
    for (int i = 0; i < 2; ++i) {
        RuleSignals s;
        s.rule_id = "r" + std::to_string(i);
        s.domain = "MH1";
        signals.push_back(s);
        usefulness[s.rule_id] = 0.1 * i;
    }
    CHECK_THROWS_AS(expert_signal_correlations(signals, usefulness), ValidationError);
}
