#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coa/core.hpp"
#include "coa/registry.hpp"

namespace coa::rules {

// One expert's evaluation of one rule: a judgment per objective of the
// rule's domain, plus the optional support / importance signals.
struct ExpertRuleEvaluation {
    std::string expert_id;
    std::string rule_id;
    std::map<std::string, Judgment> judgments;  // objective id -> judgment
    std::optional<bool> support;                // pre-evaluation personal support
    std::optional<double> importance;           // [0,1] after ingestion
};

/// phi_rj = (#increase - #decrease) / #evaluators over the experts who
/// judged (rule, objective). Throws when no evaluator covered the cell.
double rule_objective_alignment(const std::vector<ExpertRuleEvaluation>& evals,
                                const std::string& rule_id, const std::string& objective_id);

/// Unweighted mean of per-objective alignments over the domain's objective
/// set. Throws ValidationError listing objectives with no value.
double rule_weight(const std::map<std::string, double>& per_objective,
                   const std::vector<std::string>& domain_objectives);

struct RuleAlignmentProfile {
    std::string rule_id;
    std::string domain;
    std::map<std::string, double> objective_alignment;  // phi_rj
    std::map<std::string, int> evaluator_count;         // per objective
    double weight = 0.0;                                // phi(r,J)
};

/// Aggregates evaluations into per-rule profiles for every rule of the
/// registry that has evaluations. Duplicate (expert, rule) pairs and unknown
/// rule/objective ids are ValidationErrors.
std::vector<RuleAlignmentProfile> aggregate_profiles(
    const std::vector<ExpertRuleEvaluation>& evals, const Registry& registry);

/// Pearson correlation between a rule's per-response contribution
/// (adherence * weight) and the expert ground truth. Requires >= 3 graded
/// responses carrying both; throws DegenerateError on zero variance.
double rule_usefulness(const std::vector<GradedResponse>& responses, const Rule& rule);

// Per-rule aggregate signals derived from the expert panel.
struct RuleSignals {
    std::string rule_id;
    std::string domain;
    double support_rate = 0.0;     // fraction of experts supporting
    double weight = 0.0;           // phi(r,J)
    double importance_mean = 0.0;  // mean normalized importance
};

struct SignalCell {
    std::optional<double> r;  // absent when the correlation is undefined
    std::string note;
};

// signal name -> domain id (or "avg") -> correlation cell.
struct SignalCorrelationTable {
    std::vector<std::string> domains;
    std::map<std::string, std::map<std::string, SignalCell>> cells;
};

inline constexpr const char* kSignalSupport = "support";
inline constexpr const char* kSignalAlignment = "net_objectives_rule_alignment";
inline constexpr const char* kSignalImportance = "importance";

/// Correlates each expert signal with per-rule usefulness, per domain, and
/// averages the per-domain correlations. Constant signals yield an
/// undefined cell with a note, never a silent zero. Requires >= 3 rules
/// with usefulness per domain.
SignalCorrelationTable expert_signal_correlations(
    const std::vector<RuleSignals>& signals,
    const std::map<std::string, double>& usefulness_per_rule);

/// Aggregates per-expert support/importance into per-rule RuleSignals.
/// weight is taken from the registry rule.
std::vector<RuleSignals> aggregate_signals(const std::vector<ExpertRuleEvaluation>& evals,
                                           const Registry& registry);

// io
std::vector<ExpertRuleEvaluation> load_evaluations_csv(const std::string& path);

/// Merges `expert_id,rule_id,support,importance` rows into the evaluations.
/// Importance is normalized to [0,1] when the file's values fall outside it.
void load_signals_csv(std::vector<ExpertRuleEvaluation>& evals, const std::string& path,
                      std::vector<std::string>* warnings = nullptr);

nlohmann::json profiles_to_json(const std::vector<RuleAlignmentProfile>& profiles);
nlohmann::json signal_table_to_json(const SignalCorrelationTable& table);

}  // namespace coa::rules
