#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coa/error.hpp"

namespace coa {

// A behavior domain, e.g. a category of user prompts.
struct DomainId {
    std::string id;  // short key, e.g. "MH1"
    std::string title;
    std::string description;
};

enum class ObjectiveKind { kGoodOutcome, kBadOutcome, kValue };

const char* to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(const std::string& s);

// A ratified normative objective: a desired outcome, an avoided outcome, or
// a deontological value constraint. Scores are fractions in [0,1].
struct Objective {
    std::string id;
    ObjectiveKind kind = ObjectiveKind::kGoodOutcome;
    std::string text;
    double support_overall = 0.0;
    double support_bridging = 0.0;
    double preference = 0.0;
};

// A behavior rule with its expert-derived objective alignments.
// weight must equal the arithmetic mean of objective_alignments values.
struct Rule {
    std::string id;
    std::string text;
    std::string domain;
    std::map<std::string, double> objective_alignments;  // objective id -> phi in [-1,1]
    double weight = 0.0;
};

// Degree in [-1,1] to which a response follows a rule; likert is the 1..5
// grade it was derived from, absent for synthetically produced scores.
struct AdherenceScore {
    double value = 0.0;
    std::optional<int> likert;
};

// A {prompt, response} pair with per-rule adherence and optional reward /
// ground-truth fields.
struct GradedResponse {
    std::string id;
    std::string prompt;
    std::string response;
    std::string domain;
    std::map<std::string, AdherenceScore> adherence;  // rule id -> score
    std::optional<double> rbr;
    std::optional<double> rbr_ablated;
    std::optional<double> ground_truth;  // expert mean in [-1,1]
};

// An expert's categorical judgment of a rule's effect on one objective.
enum class Judgment { kIncrease, kDecrease, kNoImpact };

const char* to_string(Judgment j);
Judgment judgment_from_string(const std::string& s);

/// Maps a 1..5 Likert grade onto [-1,1]: 5 -> 1 ("follows"), 1 -> -1
/// ("breaks"), interior levels linear. Throws ValidationError out of range.
double likert_to_score(int level);

/// Mean of likert_to_score over a non-empty panel of 1..5 ratings.
double mean_expert_alignment(const std::vector<int>& ratings);

AdherenceScore adherence_from_likert(int level);

}  // namespace coa
