#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "coa/error.hpp"
#include "coa/toml.hpp"

namespace coa::sim {

enum class Welfare { kUtilitarianSum, kMean };

const char* to_string(Welfare w);
Welfare welfare_from_string(const std::string& s);

struct SimConfig {
    int futures = 4;
    int humans = 8;
    int actions = 100;
    double noise = 0.0;        // prediction-noise sigma on probability shifts
    double shift_scale = 0.1;  // magnitude of the true shifts
    bool identical_wills = false;

    int objectives = 2;     // outcome objectives; 0 disables the chain estimator
    bool span_wills = true;  // wills generated through the objective partition
    int value_objectives = 0;

    int rules = 0;
    bool rules_linear = true;  // objective shifts built from the linear rule model
    double fit_noise = 0.0;

    Welfare welfare = Welfare::kMean;

    void validate() const;  // throws ValidationError on an infeasible world
};

// A synthetic world instantiating wills over futures, actions as probability
// shifts, per-human noisy predictions, binary outcome objectives, optional
// value objectives, and rules with per-action adherence. Pure function of
// (config, seed); every probability-shift row sums to zero.
struct SimWorld {
    SimConfig config;
    std::uint64_t seed = 0;

    std::vector<double> will_future;      // [h*F + f] in [-1,1]
    std::vector<double> will_objective;   // [h*J + j] in [-1,1]
    std::vector<int> objective_future;    // [j*F + f] binary indicator
    std::vector<double> dp_true;          // [a*F + f], rows sum to 0
    std::vector<double> dp_human;         // [(h*A + a)*F + f], rows sum to 0
    std::vector<double> adherence;        // [a*R + r] in [-1,1]
    std::vector<double> true_rule_weight; // [j*R + r], rules_linear worlds only
    std::vector<double> value_adherence;  // [a*Jv + jv] in [-1,1]
    std::vector<double> will_value;       // [h*Jv + jv] in [-1,1]

    int futures() const { return config.futures; }
    int humans() const { return config.humans; }
    int actions() const { return config.actions; }
    int objectives() const { return config.objectives; }
    int value_objectives() const { return config.value_objectives; }
    int rules() const { return config.rules; }

    double will(int h, int f) const { return will_future[h * config.futures + f]; }
    double objective_will(int h, int j) const { return will_objective[h * config.objectives + j]; }
    double shift_true(int a, int f) const { return dp_true[a * config.futures + f]; }
    double shift_human(int h, int a, int f) const {
        return dp_human[(static_cast<std::size_t>(h) * config.actions + a) * config.futures + f];
    }
    double rule_adherence(int a, int r) const { return adherence[a * config.rules + r]; }
};

SimWorld sample_world(const SimConfig& config, std::uint64_t seed);

/// phi(h,a) = sum_f phi(h,f) * dp_h(f|a), plus the per-human value term when
/// value objectives exist.
double conflated_alignment(const SimWorld& world, int h, int a);

/// Welfare aggregation of per-human conflated alignments.
double conflated_group_alignment(const SimWorld& world, int a, Welfare welfare);

/// Welfare aggregation of per-human objective wills. Throws when the world
/// has no objective wills.
double objective_group_alignment(const SimWorld& world, int j, Welfare welfare);

/// dp(j|a) = sum_f phi(j,f) * dp(f|a) under the true model.
double objective_shift(const SimWorld& world, int j, int a);

/// Same under human h's predicted shifts.
double objective_shift_human(const SimWorld& world, int j, int a, int h);

/// Chain estimate: sum_j phi(H,j) * dp*(j|a), plus sum over value
/// objectives of phi(H,j) * phi(j,a).
double chain_group_alignment(const SimWorld& world, int a, Welfare welfare);

/// max over actions of |chain - conflated|.
double max_chain_conflated_gap(const SimWorld& world, Welfare welfare);

struct RuleFit {
    double slope = 0.0;
    double residual_variance = 0.0;
    double std_error = 0.0;
    int sweeps = 0;  // backfitting sweeps until convergence
};

/// Least-squares slope of the rule-specific objective shift on adherence.
/// The rule-specific shift subtracts the other rules' modeled contributions
/// at their current estimates; estimates are iterated to convergence.
RuleFit fit_rule_weight(const SimWorld& world, int rule, int objective);

struct ObjectiveFit {
    std::vector<RuleFit> per_rule;
    int sweeps = 0;
};

ObjectiveFit fit_objective_weights(const SimWorld& world, int objective);

struct ConflationGap {
    std::vector<double> action_disagreement;     // per-action variance across humans
    std::vector<double> objective_disagreement;  // per-objective variance across humans
    double mean_action_disagreement = 0.0;
    double mean_objective_disagreement = 0.0;
};

/// Variance across humans of action-level vs objective-level alignments.
/// Prediction noise enters only the action channel.
ConflationGap conflation_gap(const SimWorld& world);

struct SweepResult {
    std::vector<double> noise_levels;
    std::vector<ConflationGap> gaps;
};

/// Re-samples the world at each noise level with common random numbers:
/// only the noise magnitude varies between sweep points.
SweepResult noise_sweep(const SimConfig& base, std::uint64_t seed,
                        const std::vector<double>& noise_levels);

SimConfig sim_config_from_toml(const toml::Table& table);
std::vector<double> sweep_noise_levels(const toml::Table& table);

}  // namespace coa::sim
