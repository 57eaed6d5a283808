#include "coa/sim.hpp"

#include <algorithm>
#include <cmath>

namespace coa::sim {

namespace {

// splitmix64: tiny, portable, identical draws on every platform.
struct Stream {
    std::uint64_t state;

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }  // [0,1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    double gauss() {
        const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
        const double u2 = unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

enum StreamTag : std::uint64_t {
    kTagObjectiveWills = 1,
    kTagFutureWills = 2,
    kTagShifts = 3,
    kTagNoise = 4,
    kTagAdherence = 5,
    kTagRuleWeights = 6,
    kTagValueAdherence = 7,
    kTagValueWills = 8,
    kTagFitNoise = 9,
};

// Independent per-purpose streams so parallel sweeps and noise levels share
// the same base draws.
Stream stream_for(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    std::uint64_t z = seed;
    z ^= (tag + 1) * 0x9e3779b97f4a7c15ULL;
    z ^= (index + 1) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Stream{z ^ (z >> 31)};
}

double welfare_of(const std::vector<double>& values, Welfare welfare) {
    double sum = 0.0;
    for (double v : values) sum += v;
    if (welfare == Welfare::kUtilitarianSum) return sum;
    return sum / static_cast<double>(values.size());
}

// Population variance with an exact-equality short circuit, so identical
// inputs report exactly zero disagreement.
double population_variance(const std::vector<double>& values) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += (v - mean) * (v - mean);
    return sum / static_cast<double>(values.size());
}

}  // namespace

const char* to_string(Welfare w) {
    switch (w) {
        case Welfare::kUtilitarianSum: return "utilitarian_sum";
        case Welfare::kMean: return "mean";
    }
    return "?";
}

Welfare welfare_from_string(const std::string& s) {
    if (s == "utilitarian_sum") return Welfare::kUtilitarianSum;
    if (s == "mean") return Welfare::kMean;
    throw ValidationError("unknown welfare function '" + s + "'");
}

void SimConfig::validate() const {
    if (futures < 2) throw ValidationError("world needs at least 2 futures");
    if (humans < 1) throw ValidationError("world needs at least 1 human");
    if (actions < 1) throw ValidationError("world needs at least 1 action");
    if (noise < 0.0) throw ValidationError("noise level must be >= 0");
    if (shift_scale <= 0.0) throw ValidationError("shift scale must be > 0");
    if (objectives < 0 || value_objectives < 0 || rules < 0) {
        throw ValidationError("counts must be >= 0");
    }
    if (objectives > futures) {
        throw ValidationError("objectives cannot outnumber futures (binary partition)");
    }
    if (span_wills && objectives == 0) {
        throw ValidationError("span_wills requires at least one objective");
    }
    if (rules > 0 && rules_linear && objectives == 0) {
        throw ValidationError("a linear rule world needs objectives to shift");
    }
    if (fit_noise < 0.0) throw ValidationError("fit noise must be >= 0");
}

SimWorld sample_world(const SimConfig& config, std::uint64_t seed) {
    config.validate();
    SimWorld w;
    w.config = config;
    w.seed = seed;
    const int F = config.futures, H = config.humans, A = config.actions;
    const int J = config.objectives, Jv = config.value_objectives, R = config.rules;

    // Binary outcome objectives partition the futures round-robin.
    if (J > 0) {
        w.objective_future.assign(static_cast<std::size_t>(J) * F, 0);
        for (int f = 0; f < F; ++f) w.objective_future[(f % J) * F + f] = 1;
    }

    // Objective wills, identical across humans when configured.
    if (J > 0) {
        w.will_objective.resize(static_cast<std::size_t>(H) * J);
        for (int h = 0; h < H; ++h) {
            const int source = config.identical_wills ? 0 : h;
            Stream s = stream_for(seed, kTagObjectiveWills, static_cast<std::uint64_t>(source));
            for (int j = 0; j < J; ++j) w.will_objective[h * J + j] = s.uniform(-1.0, 1.0);
        }
    }
    if (Jv > 0) {
        w.will_value.resize(static_cast<std::size_t>(H) * Jv);
        for (int h = 0; h < H; ++h) {
            const int source = config.identical_wills ? 0 : h;
            Stream s = stream_for(seed, kTagValueWills, static_cast<std::uint64_t>(source));
            for (int jv = 0; jv < Jv; ++jv) w.will_value[h * Jv + jv] = s.uniform(-1.0, 1.0);
        }
    }

    // Future-level wills: through the partition when spanning, free otherwise.
    w.will_future.resize(static_cast<std::size_t>(H) * F);
    if (config.span_wills) {
        for (int h = 0; h < H; ++h) {
            for (int f = 0; f < F; ++f) {
                w.will_future[h * F + f] = w.will_objective[h * J + (f % J)];
            }
        }
    } else {
        for (int h = 0; h < H; ++h) {
            const int source = config.identical_wills ? 0 : h;
            Stream s = stream_for(seed, kTagFutureWills, static_cast<std::uint64_t>(source));
            for (int f = 0; f < F; ++f) w.will_future[h * F + f] = s.uniform(-1.0, 1.0);
        }
    }

    // Rule adherence per action.
    if (R > 0) {
        w.adherence.resize(static_cast<std::size_t>(A) * R);
        for (int a = 0; a < A; ++a) {
            Stream s = stream_for(seed, kTagAdherence, static_cast<std::uint64_t>(a));
            for (int r = 0; r < R; ++r) w.adherence[a * R + r] = s.uniform(-1.0, 1.0);
        }
    }

    // True probability shifts. Linear rule worlds derive them from the rule
    // model with zero-sum columns; free worlds draw and re-center.
    w.dp_true.resize(static_cast<std::size_t>(A) * F);
    const bool linear = R > 0 && config.rules_linear;
    if (linear) {
        w.true_rule_weight.resize(static_cast<std::size_t>(J) * R);
        Stream s = stream_for(seed, kTagRuleWeights, 0);
        for (int r = 0; r < R; ++r) {
            double column_sum = 0.0;
            for (int j = 0; j < J; ++j) {
                const double v = s.uniform(-0.5, 0.5) * config.shift_scale;
                w.true_rule_weight[j * R + r] = v;
                column_sum += v;
            }
            const double mean = column_sum / static_cast<double>(J);
            for (int j = 0; j < J; ++j) w.true_rule_weight[j * R + r] -= mean;
        }
        std::vector<int> block_size(J, 0);
        for (int f = 0; f < F; ++f) ++block_size[f % J];
        std::vector<double> target(J);
        for (int a = 0; a < A; ++a) {
            for (int j = 0; j < J; ++j) {
                double t = 0.0;
                for (int r = 0; r < R; ++r) t += w.adherence[a * R + r] * w.true_rule_weight[j * R + r];
                target[j] = t;
            }
            if (config.fit_noise > 0.0) {
                Stream n = stream_for(seed, kTagFitNoise, static_cast<std::uint64_t>(a));
                std::vector<double> eps(J);
                double eps_mean = 0.0;
                for (int j = 0; j < J; ++j) {
                    eps[j] = config.fit_noise * n.gauss();
                    eps_mean += eps[j];
                }
                eps_mean /= static_cast<double>(J);
                for (int j = 0; j < J; ++j) target[j] += eps[j] - eps_mean;
            }
            for (int f = 0; f < F; ++f) {
                const int j = f % J;
                w.dp_true[a * F + f] = target[j] / static_cast<double>(block_size[j]);
            }
        }
    } else {
        for (int a = 0; a < A; ++a) {
            Stream s = stream_for(seed, kTagShifts, static_cast<std::uint64_t>(a));
            double row_sum = 0.0;
            for (int f = 0; f < F; ++f) {
                const double v = s.uniform(-1.0, 1.0) * config.shift_scale;
                w.dp_true[a * F + f] = v;
                row_sum += v;
            }
            const double mean = row_sum / static_cast<double>(F);
            for (int f = 0; f < F; ++f) w.dp_true[a * F + f] -= mean;
        }
    }

    // Per-human predictions: the true shifts plus re-centered noise. The
    // noiseless case copies bitwise so predictions equal truth exactly.
    w.dp_human.resize(static_cast<std::size_t>(H) * A * F);
    if (config.noise == 0.0) {
        for (int h = 0; h < H; ++h) {
            std::copy(w.dp_true.begin(), w.dp_true.end(),
                      w.dp_human.begin() + static_cast<std::size_t>(h) * A * F);
        }
    } else {
        for (int h = 0; h < H; ++h) {
            for (int a = 0; a < A; ++a) {
                Stream s = stream_for(seed, kTagNoise,
                                      static_cast<std::uint64_t>(h) * A + a);
                const std::size_t base = (static_cast<std::size_t>(h) * A + a) * F;
                double row_sum = 0.0;
                for (int f = 0; f < F; ++f) {
                    const double v = w.dp_true[a * F + f] + config.noise * s.gauss();
                    w.dp_human[base + f] = v;
                    row_sum += v;
                }
                const double mean = row_sum / static_cast<double>(F);
                for (int f = 0; f < F; ++f) w.dp_human[base + f] -= mean;
            }
        }
    }

    // Value-objective adherence per action.
    if (Jv > 0) {
        w.value_adherence.resize(static_cast<std::size_t>(A) * Jv);
        for (int a = 0; a < A; ++a) {
            Stream s = stream_for(seed, kTagValueAdherence, static_cast<std::uint64_t>(a));
            for (int jv = 0; jv < Jv; ++jv) w.value_adherence[a * Jv + jv] = s.uniform(-1.0, 1.0);
        }
    }
    return w;
}

double conflated_alignment(const SimWorld& world, int h, int a) {
    const int F = world.futures();
    double sum = 0.0;
    for (int f = 0; f < F; ++f) sum += world.will(h, f) * world.shift_human(h, a, f);
    const int Jv = world.value_objectives();
    for (int jv = 0; jv < Jv; ++jv) {
        sum += world.will_value[h * Jv + jv] * world.value_adherence[a * Jv + jv];
    }
    return sum;
}

double conflated_group_alignment(const SimWorld& world, int a, Welfare welfare) {
    std::vector<double> per_human(world.humans());
    for (int h = 0; h < world.humans(); ++h) per_human[h] = conflated_alignment(world, h, a);
    return welfare_of(per_human, welfare);
}

double objective_group_alignment(const SimWorld& world, int j, Welfare welfare) {
    if (world.objectives() == 0 || world.will_objective.empty()) {
        throw ValidationError("objective wills required: world has no objectives");
    }
    if (j < 0 || j >= world.objectives()) throw ValidationError("objective index out of range");
    std::vector<double> wills(world.humans());
    for (int h = 0; h < world.humans(); ++h) wills[h] = world.objective_will(h, j);
    return welfare_of(wills, welfare);
}

double objective_shift(const SimWorld& world, int j, int a) {
    const int F = world.futures();
    double sum = 0.0;
    for (int f = 0; f < F; ++f) {
        if (world.objective_future[j * F + f] != 0) sum += world.shift_true(a, f);
    }
    return sum;
}

double objective_shift_human(const SimWorld& world, int j, int a, int h) {
    const int F = world.futures();
    double sum = 0.0;
    for (int f = 0; f < F; ++f) {
        if (world.objective_future[j * F + f] != 0) sum += world.shift_human(h, a, f);
    }
    return sum;
}

double chain_group_alignment(const SimWorld& world, int a, Welfare welfare) {
    if (world.objectives() == 0 && world.value_objectives() == 0) {
        throw ValidationError("objective wills required: world has no objectives");
    }
    double sum = 0.0;
    for (int j = 0; j < world.objectives(); ++j) {
        sum += objective_group_alignment(world, j, welfare) * objective_shift(world, j, a);
    }
    const int Jv = world.value_objectives();
    for (int jv = 0; jv < Jv; ++jv) {
        std::vector<double> wills(world.humans());
        for (int h = 0; h < world.humans(); ++h) wills[h] = world.will_value[h * Jv + jv];
        sum += welfare_of(wills, welfare) * world.value_adherence[a * Jv + jv];
    }
    return sum;
}

double max_chain_conflated_gap(const SimWorld& world, Welfare welfare) {
    double worst = 0.0;
    for (int a = 0; a < world.actions(); ++a) {
        const double gap = std::fabs(chain_group_alignment(world, a, welfare) -
                                     conflated_group_alignment(world, a, welfare));
        worst = std::max(worst, gap);
    }
    return worst;
}

ObjectiveFit fit_objective_weights(const SimWorld& world, int objective) {
    const int R = world.rules();
    const int A = world.actions();
    if (R == 0) throw ValidationError("world has no rules to fit");
    if (objective < 0 || objective >= world.objectives()) {
        throw ValidationError("objective index out of range");
    }

    std::vector<double> y(A);
    for (int a = 0; a < A; ++a) y[a] = objective_shift(world, objective, a);

    std::vector<double> sxx(R, 0.0);
    for (int r = 0; r < R; ++r) {
        for (int a = 0; a < A; ++a) {
            const double x = world.rule_adherence(a, r);
            sxx[r] += x * x;
        }
        if (sxx[r] == 0.0) {
            throw DegenerateError("rule " + std::to_string(r) +
                                  " has zero adherence variance; fit undefined");
        }
    }

    // Backfitting over the rules with the single-rule attribution
    // dp_r(j|a) = dp(j|a) - sum_{r* != r} adherence(a,r*) * c_{r*}.
    constexpr int kMaxSweeps = 100;
    constexpr double kTolerance = 1e-9;
    std::vector<double> c(R, 0.0);
    int sweeps = 0;
    for (; sweeps < kMaxSweeps; ++sweeps) {
        double max_delta = 0.0;
        for (int r = 0; r < R; ++r) {
            double sxy = 0.0;
            for (int a = 0; a < A; ++a) {
                double residual = y[a];
                for (int r2 = 0; r2 < R; ++r2) {
                    if (r2 != r) residual -= world.rule_adherence(a, r2) * c[r2];
                }
                sxy += world.rule_adherence(a, r) * residual;
            }
            const double updated = sxy / sxx[r];
            max_delta = std::max(max_delta, std::fabs(updated - c[r]));
            c[r] = updated;
        }
        if (max_delta < kTolerance) {
            ++sweeps;
            break;
        }
    }

    ObjectiveFit fit;
    fit.sweeps = sweeps;
    const double n = static_cast<double>(A);
    for (int r = 0; r < R; ++r) {
        RuleFit rf;
        rf.slope = c[r];
        rf.sweeps = sweeps;
        double syy = 0.0, sxy = 0.0;
        for (int a = 0; a < A; ++a) {
            double residual = y[a];
            for (int r2 = 0; r2 < R; ++r2) {
                if (r2 != r) residual -= world.rule_adherence(a, r2) * c[r2];
            }
            syy += residual * residual;
            sxy += world.rule_adherence(a, r) * residual;
        }
        // <dp_r^2> - slope * <dp_r x>: the mean squared residual of the fit.
        rf.residual_variance = std::max(0.0, (syy - c[r] * sxy) / n);
        if (A > 1) {
            rf.std_error = std::sqrt(rf.residual_variance * n / ((n - 1.0) * sxx[r]));
        }
        fit.per_rule.push_back(rf);
    }
    return fit;
}

RuleFit fit_rule_weight(const SimWorld& world, int rule, int objective) {
    if (rule < 0 || rule >= world.rules()) throw ValidationError("rule index out of range");
    return fit_objective_weights(world, objective).per_rule[static_cast<std::size_t>(rule)];
}

ConflationGap conflation_gap(const SimWorld& world) {
    if (world.humans() < 2) throw ValidationError("disagreement needs at least 2 humans");
    ConflationGap gap;
    std::vector<double> values(world.humans());
    for (int a = 0; a < world.actions(); ++a) {
        for (int h = 0; h < world.humans(); ++h) values[h] = conflated_alignment(world, h, a);
        gap.action_disagreement.push_back(population_variance(values));
    }
    for (int j = 0; j < world.objectives(); ++j) {
        for (int h = 0; h < world.humans(); ++h) values[h] = world.objective_will(h, j);
        gap.objective_disagreement.push_back(population_variance(values));
    }
    double sum = 0.0;
    for (double v : gap.action_disagreement) sum += v;
    gap.mean_action_disagreement =
        gap.action_disagreement.empty() ? 0.0 : sum / static_cast<double>(gap.action_disagreement.size());
    sum = 0.0;
    for (double v : gap.objective_disagreement) sum += v;
    gap.mean_objective_disagreement = gap.objective_disagreement.empty()
                                          ? 0.0
                                          : sum / static_cast<double>(gap.objective_disagreement.size());
    return gap;
}

SweepResult noise_sweep(const SimConfig& base, std::uint64_t seed,
                        const std::vector<double>& noise_levels) {
    if (noise_levels.empty()) throw ValidationError("noise sweep needs at least one level");
    SweepResult result;
    for (double level : noise_levels) {
        SimConfig config = base;
        config.noise = level;
        // Same seed at every level: only the noise magnitude varies.
        const SimWorld world = sample_world(config, seed);
        result.noise_levels.push_back(level);
        result.gaps.push_back(conflation_gap(world));
    }
    return result;
}

SimConfig sim_config_from_toml(const toml::Table& table) {
    SimConfig config;
    config.futures = static_cast<int>(table.get_int("world", "futures", config.futures));
    config.humans = static_cast<int>(table.get_int("world", "humans", config.humans));
    config.actions = static_cast<int>(table.get_int("world", "actions", config.actions));
    config.noise = table.get_double("world", "noise", config.noise);
    config.shift_scale = table.get_double("world", "shift_scale", config.shift_scale);
    config.identical_wills = table.get_bool("world", "identical_wills", config.identical_wills);
    config.welfare =
        welfare_from_string(table.get_string("world", "welfare", to_string(config.welfare)));
    config.objectives = static_cast<int>(table.get_int("objectives", "count", config.objectives));
    config.span_wills = table.get_bool("objectives", "span_wills", config.span_wills);
    config.value_objectives =
        static_cast<int>(table.get_int("objectives", "value_count", config.value_objectives));
    config.rules = static_cast<int>(table.get_int("rules", "count", config.rules));
    config.rules_linear = table.get_bool("rules", "linear", config.rules_linear);
    config.fit_noise = table.get_double("rules", "fit_noise", config.fit_noise);
    config.validate();
    return config;
}

std::vector<double> sweep_noise_levels(const toml::Table& table) {
    return table.get_double_array("sweep", "noise", {0.0, 0.1, 0.3});
}

}  // namespace coa::sim
