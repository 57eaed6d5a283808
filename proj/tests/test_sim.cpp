#include <doctest.h>

#include <cmath>

#include "coa/sim.hpp"
#include "coa/toml.hpp"
#include "oracles.hpp"

using namespace coa;
using namespace coa::sim;

namespace {

SimConfig base_config() {
    SimConfig c;
    c.futures = 6;
    c.humans = 5;
    c.actions = 50;
    c.objectives = 3;
    c.span_wills = true;
    c.rules = 0;
    return c;
}

// Brute-force conflated group alignment straight off the world arrays.
double oracle_conflated_group(const SimWorld& w, int a, Welfare welfare) {
    double total = 0.0;
    for (int h = 0; h < w.humans(); ++h) {
        double person = 0.0;
        for (int f = 0; f < w.futures(); ++f) person += w.will(h, f) * w.shift_human(h, a, f);
        for (int jv = 0; jv < w.value_objectives(); ++jv) {
            person += w.will_value[h * w.value_objectives() + jv] *
                      w.value_adherence[a * w.value_objectives() + jv];
        }
        total += person;
    }
    if (welfare == Welfare::kMean) total /= static_cast<double>(w.humans());
    return total;
}

}  // namespace

TEST_CASE("sample_world validates its config") {
    SimConfig bad = base_config();
    bad.futures = 0;
    CHECK_THROWS_AS(sample_world(bad, 1), ValidationError);
    bad = base_config();
    bad.humans = 0;
    CHECK_THROWS_AS(sample_world(bad, 1), ValidationError);
    bad = base_config();
    bad.noise = -0.1;
    CHECK_THROWS_AS(sample_world(bad, 1), ValidationError);
    bad = base_config();
    bad.objectives = 9;  // more objectives than futures: no partition
    CHECK_THROWS_AS(sample_world(bad, 1), ValidationError);
}

TEST_CASE("sample_world is deterministic in (config, seed)") {
    const SimWorld a = sample_world(base_config(), 42);
    const SimWorld b = sample_world(base_config(), 42);
    CHECK(a.will_future == b.will_future);
    CHECK(a.dp_true == b.dp_true);
    CHECK(a.dp_human == b.dp_human);
    const SimWorld c = sample_world(base_config(), 43);
    CHECK(a.dp_true != c.dp_true);
}

TEST_CASE("noiseless worlds predict exactly the true shifts") {
    SimConfig config = base_config();
    config.noise = 0.0;
    const SimWorld w = sample_world(config, 7);
    for (int h = 0; h < w.humans(); ++h) {
        for (int a = 0; a < w.actions(); ++a) {
            for (int f = 0; f < w.futures(); ++f) {
                CHECK(w.shift_human(h, a, f) == w.shift_true(a, f));  // bitwise
            }
        }
    }
}

TEST_CASE("probability-shift rows sum to zero across 1000 actions") {
    SimConfig config = base_config();
    config.actions = 1000;
    config.noise = 0.25;
    const SimWorld w = sample_world(config, 11);
    for (int a = 0; a < w.actions(); ++a) {
        double sum = 0.0;
        for (int f = 0; f < w.futures(); ++f) sum += w.shift_true(a, f);
        CHECK(std::fabs(sum) < 1e-9);
    }
    for (int h = 0; h < w.humans(); ++h) {
        for (int a = 0; a < w.actions(); ++a) {
            double sum = 0.0;
            for (int f = 0; f < w.futures(); ++f) sum += w.shift_human(h, a, f);
            CHECK(std::fabs(sum) < 1e-9);
        }
    }
}

TEST_CASE("conflated_alignment on hand-built worlds") {
    SimConfig config;
    config.futures = 2;
    config.humans = 1;
    config.actions = 1;
    config.objectives = 0;
    config.span_wills = false;
    SimWorld w = sample_world(config, 1);
    w.will_future = {1.0, -1.0};
    w.dp_human = {0.2, -0.2};
    CHECK(conflated_alignment(w, 0, 0) == doctest::Approx(0.4).epsilon(1e-15));

    // Zero shift: zero alignment.
    w.dp_human = {0.0, 0.0};
    CHECK(conflated_alignment(w, 0, 0) == 0.0);

    // Linearity: doubling the predicted shift doubles the alignment.
    w.dp_human = {0.13, -0.13};
    const double once = conflated_alignment(w, 0, 0);
    w.dp_human = {0.26, -0.26};
    CHECK(conflated_alignment(w, 0, 0) == doctest::Approx(2.0 * once).epsilon(1e-12));
}

TEST_CASE("conflated_group_alignment aggregates per welfare function") {
    SimConfig config = base_config();
    config.humans = 3;
    const SimWorld w = sample_world(config, 5);
    for (int a = 0; a < 5; ++a) {
        CHECK(conflated_group_alignment(w, a, Welfare::kUtilitarianSum) ==
              doctest::Approx(oracle_conflated_group(w, a, Welfare::kUtilitarianSum))
                  .epsilon(1e-12));
        CHECK(conflated_group_alignment(w, a, Welfare::kMean) ==
              doctest::Approx(oracle_conflated_group(w, a, Welfare::kMean)).epsilon(1e-12));
    }

    SimConfig solo = base_config();
    solo.humans = 1;
    const SimWorld lone = sample_world(solo, 5);
    CHECK(conflated_group_alignment(lone, 0, Welfare::kUtilitarianSum) ==
          conflated_alignment(lone, 0, 0));
}

TEST_CASE("objective_group_alignment aggregates objective wills") {
    SimConfig config = base_config();
    config.humans = 2;
    SimWorld w = sample_world(config, 9);
    w.will_objective = {1.0, 0.2, -0.3,   // human 0
                        0.5, 0.2, -0.3};  // human 1
    CHECK(objective_group_alignment(w, 0, Welfare::kMean) ==
          doctest::Approx(0.75).epsilon(1e-15));
    CHECK(objective_group_alignment(w, 0, Welfare::kUtilitarianSum) ==
          doctest::Approx(1.5).epsilon(1e-15));

    SimConfig none = base_config();
    none.objectives = 0;
    none.span_wills = false;
    const SimWorld empty = sample_world(none, 9);
    CHECK_THROWS_WITH_AS(objective_group_alignment(empty, 0, Welfare::kMean),
                         doctest::Contains("objective wills"), ValidationError);
}

TEST_CASE("objective_shift picks out indicator futures") {
    SimConfig config;
    config.futures = 4;
    config.humans = 1;
    config.actions = 1;
    config.objectives = 2;
    SimWorld w = sample_world(config, 3);
    // Partition: futures {0,2} -> objective 0, futures {1,3} -> objective 1.
    w.objective_future = {1, 0, 1, 0, 0, 1, 0, 1};
    w.dp_true = {0.3, -0.1, -0.3, 0.1};
    CHECK(objective_shift(w, 0, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(objective_shift(w, 1, 0) == doctest::Approx(0.0).epsilon(1e-15));
    w.dp_true = {0.3, -0.3, 0.0, 0.0};
    CHECK(objective_shift(w, 0, 0) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(objective_shift(w, 1, 0) == doctest::Approx(-0.3).epsilon(1e-15));
}

TEST_CASE("objective_shift of an everywhere-true objective conserves mass") {
    SimConfig config = base_config();
    config.objectives = 1;  // single objective covers every future
    const SimWorld w = sample_world(config, 13);
    for (int a = 0; a < w.actions(); ++a) {
        CHECK(std::fabs(objective_shift(w, 0, a)) < 1e-12);
    }
}

TEST_CASE("objective_shift matches brute-force future enumeration") {
    const SimWorld w = sample_world(base_config(), 17);
    for (int a = 0; a < 10; ++a) {
        for (int j = 0; j < w.objectives(); ++j) {
            double expected = 0.0;
            for (int f = 0; f < w.futures(); ++f) {
                expected += w.objective_future[j * w.futures() + f] * w.shift_true(a, f);
            }
            CHECK(objective_shift(w, j, a) == doctest::Approx(expected).epsilon(1e-15));
        }
    }
}

TEST_CASE("chain equals conflated in noiseless spanning worlds") {
    SimConfig config = base_config();
    config.noise = 0.0;
    config.span_wills = true;
    config.actions = 200;
    for (const Welfare welfare : {Welfare::kUtilitarianSum, Welfare::kMean}) {
        const SimWorld w = sample_world(config, 19);
        CHECK(max_chain_conflated_gap(w, welfare) < 1e-9);
    }
}

TEST_CASE("chain and conflated diverge when objectives cannot express wills") {
    SimConfig config = base_config();
    config.noise = 0.0;
    config.span_wills = false;  // wills drawn freely
    const SimWorld w = sample_world(config, 23);
    CHECK(max_chain_conflated_gap(w, Welfare::kMean) > 1e-6);
}

TEST_CASE("value objectives add their welfare-weighted adherence to the chain") {
    SimConfig config = base_config();
    config.value_objectives = 1;
    config.noise = 0.0;
    SimWorld w = sample_world(config, 29);
    const double before = chain_group_alignment(w, 0, Welfare::kMean);
    // Force phi(H,j_val) = 1 and phi(j_val, a0) = 1: adds exactly 1.
    for (int h = 0; h < w.humans(); ++h) w.will_value[h] = 1.0;
    w.value_adherence[0] = 1.0;
    double prior_term = 0.0;
    {
        SimWorld base = sample_world(config, 29);
        double mean_will = 0.0;
        for (int h = 0; h < base.humans(); ++h) mean_will += base.will_value[h];
        mean_will /= static_cast<double>(base.humans());
        prior_term = mean_will * base.value_adherence[0];
    }
    const double after = chain_group_alignment(w, 0, Welfare::kMean);
    CHECK(after - (before - prior_term) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-objective single-future chain reduces to the degenerate product") {
    SimConfig config;
    config.futures = 2;
    config.humans = 2;
    config.actions = 1;
    config.objectives = 2;  // objective 0 owns future 0, objective 1 owns future 1
    config.noise = 0.0;
    SimWorld w = sample_world(config, 31);
    const double expected = objective_group_alignment(w, 0, Welfare::kUtilitarianSum) *
                                objective_shift(w, 0, 0) +
                            objective_group_alignment(w, 1, Welfare::kUtilitarianSum) *
                                objective_shift(w, 1, 0);
    CHECK(chain_group_alignment(w, 0, Welfare::kUtilitarianSum) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("fit_rule_weight recovers exact linear worlds with zero residual") {
    SimConfig config = base_config();
    config.rules = 3;
    config.rules_linear = true;
    config.fit_noise = 0.0;
    config.actions = 400;
    const SimWorld w = sample_world(config, 37);
    for (int j = 0; j < w.objectives(); ++j) {
        for (int r = 0; r < w.rules(); ++r) {
            const RuleFit fit = fit_rule_weight(w, r, j);
            CHECK(fit.slope ==
                  doctest::Approx(w.true_rule_weight[j * w.rules() + r]).epsilon(1e-7));
            CHECK(fit.residual_variance < 1e-12);
        }
    }
}

TEST_CASE("fit_rule_weight matches the closed-form slope for a single rule") {
    SimConfig config = base_config();
    config.rules = 1;
    config.rules_linear = true;
    config.fit_noise = 0.05;
    config.actions = 300;
    const SimWorld w = sample_world(config, 41);
    for (int j = 0; j < w.objectives(); ++j) {
        std::vector<double> x, y;
        for (int a = 0; a < w.actions(); ++a) {
            x.push_back(w.rule_adherence(a, 0));
            y.push_back(objective_shift(w, j, a));
        }
        const RuleFit fit = fit_rule_weight(w, 0, j);
        CHECK(fit.slope == doctest::Approx(oracle::slope_through_origin(x, y)).epsilon(1e-9));
        // Residual variance agrees with the direct mean squared residual.
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double e = y[i] - fit.slope * x[i];
            rss += e * e;
        }
        CHECK(fit.residual_variance ==
              doctest::Approx(rss / static_cast<double>(x.size())).epsilon(1e-9));
    }
}

TEST_CASE("backfitting agrees with joint least squares on noisy linear worlds") {
    SimConfig config = base_config();
    config.rules = 3;
    config.rules_linear = true;
    config.fit_noise = 0.02;
    config.actions = 1000;
    const SimWorld w = sample_world(config, 43);
    for (int j = 0; j < w.objectives(); ++j) {
        std::vector<std::vector<double>> xs;
        std::vector<double> y;
        for (int a = 0; a < w.actions(); ++a) {
            std::vector<double> row;
            for (int r = 0; r < w.rules(); ++r) row.push_back(w.rule_adherence(a, r));
            xs.push_back(row);
            y.push_back(objective_shift(w, j, a));
        }
        const std::vector<double> beta = oracle::least_squares(xs, y);
        for (int r = 0; r < w.rules(); ++r) {
            const RuleFit fit = fit_rule_weight(w, r, j);
            CHECK(fit.slope == doctest::Approx(beta[static_cast<std::size_t>(r)]).epsilon(1e-6));
            // Within 3 standard errors of the generating weight.
            CHECK(std::fabs(fit.slope - w.true_rule_weight[j * w.rules() + r]) <=
                  3.0 * fit.std_error);
        }
    }
}

TEST_CASE("fit_rule_weight rejects zero-adherence-variance rules") {
    SimConfig config = base_config();
    config.rules = 1;
    config.actions = 10;
    SimWorld w = sample_world(config, 47);
    for (int a = 0; a < w.actions(); ++a) w.adherence[a] = 0.0;
    CHECK_THROWS_AS(fit_rule_weight(w, 0, 0), DegenerateError);
}

TEST_CASE("a null relationship fits a zero slope") {
    SimConfig config = base_config();
    config.rules = 1;
    config.rules_linear = false;  // shifts unrelated to adherence
    config.actions = 50;
    SimWorld w = sample_world(config, 53);
    // Zero out every shift: dp(j|a) = 0 for all a.
    std::fill(w.dp_true.begin(), w.dp_true.end(), 0.0);
    const RuleFit fit = fit_rule_weight(w, 0, 0);
    CHECK(fit.slope == 0.0);
    CHECK(fit.residual_variance == 0.0);
}

TEST_CASE("conflation_gap: noise enters actions, never objectives") {
    SimConfig config = base_config();
    config.identical_wills = true;
    config.noise = 0.2;
    config.actions = 200;
    const SimWorld w = sample_world(config, 59);
    const ConflationGap gap = conflation_gap(w);
    CHECK(gap.mean_objective_disagreement == 0.0);  // exactly zero
    for (double d : gap.objective_disagreement) CHECK(d == 0.0);
    CHECK(gap.mean_action_disagreement > 0.0);
}

TEST_CASE("conflation_gap: homogeneous noiseless population has no disagreement") {
    SimConfig config = base_config();
    config.identical_wills = true;
    config.noise = 0.0;
    const SimWorld w = sample_world(config, 61);
    const ConflationGap gap = conflation_gap(w);
    CHECK(gap.mean_action_disagreement == 0.0);
    CHECK(gap.mean_objective_disagreement == 0.0);
}

TEST_CASE("noise sweep: action disagreement is nondecreasing in noise") {
    SimConfig config = base_config();
    config.identical_wills = true;
    config.actions = 1000;
    const SweepResult sweep = noise_sweep(config, 67, {0.0, 0.1, 0.3});
    REQUIRE(sweep.gaps.size() == 3);
    CHECK(sweep.gaps[0].mean_action_disagreement == 0.0);
    CHECK(sweep.gaps[0].mean_action_disagreement <= sweep.gaps[1].mean_action_disagreement);
    CHECK(sweep.gaps[1].mean_action_disagreement <= sweep.gaps[2].mean_action_disagreement);
    for (const auto& gap : sweep.gaps) CHECK(gap.mean_objective_disagreement == 0.0);
}

TEST_CASE("sim TOML config round-trip") {
    const std::string text = R"(
# world setup
[world]
futures = 6
humans = 12
actions = 500
noise = 0.15
shift_scale = 0.2
identical_wills = true
welfare = "utilitarian_sum"

[objectives]
count = 3
span_wills = false
value_count = 1

[rules]
count = 4
linear = true
fit_noise = 0.01

[sweep]
noise = [0.0, 0.1, 0.3]
)";
    const toml::Table table = toml::parse(text, "test.toml");
    const SimConfig config = sim_config_from_toml(table);
    CHECK(config.futures == 6);
    CHECK(config.humans == 12);
    CHECK(config.actions == 500);
    CHECK(config.noise == 0.15);
    CHECK(config.shift_scale == 0.2);
    CHECK(config.identical_wills);
    CHECK(config.welfare == Welfare::kUtilitarianSum);
    CHECK(config.objectives == 3);
    CHECK(!config.span_wills);
    CHECK(config.value_objectives == 1);
    CHECK(config.rules == 4);
    CHECK(config.rules_linear);
    CHECK(config.fit_noise == 0.01);
    CHECK(sweep_noise_levels(table) == std::vector<double>{0.0, 0.1, 0.3});
}

TEST_CASE("TOML parser rejects malformed input") {
    CHECK_THROWS_AS(toml::parse("[unclosed\nkey = 1", "x.toml"), ValidationError);
    CHECK_THROWS_AS(toml::parse("[s]\nkey 1", "x.toml"), ValidationError);
    CHECK_THROWS_AS(toml::parse("[s]\nkey = ", "x.toml"), ValidationError);
}
