#include "coa/core.hpp"

#include <string>

namespace coa {

const char* to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::kGoodOutcome: return "good_outcome";
        case ObjectiveKind::kBadOutcome: return "bad_outcome";
        case ObjectiveKind::kValue: return "value";
    }
    return "?";
}

ObjectiveKind objective_kind_from_string(const std::string& s) {
    if (s == "good_outcome") return ObjectiveKind::kGoodOutcome;
    if (s == "bad_outcome") return ObjectiveKind::kBadOutcome;
    if (s == "value") return ObjectiveKind::kValue;
    throw ValidationError("unknown objective kind '" + s + "'");
}

const char* to_string(Judgment j) {
    switch (j) {
        case Judgment::kIncrease: return "increase";
        case Judgment::kDecrease: return "decrease";
        case Judgment::kNoImpact: return "no_impact";
    }
    return "?";
}

Judgment judgment_from_string(const std::string& s) {
    if (s == "increase") return Judgment::kIncrease;
    if (s == "decrease") return Judgment::kDecrease;
    if (s == "no_impact") return Judgment::kNoImpact;
    throw ValidationError("unknown judgment '" + s + "'");
}

double likert_to_score(int level) {
    if (level < 1 || level > 5) {
        throw ValidationError("Likert level " + std::to_string(level) + " outside 1..5");
    }
    return (level - 3) / 2.0;
}

double mean_expert_alignment(const std::vector<int>& ratings) {
    if (ratings.empty()) {
        throw ValidationError("mean_expert_alignment requires at least one rating");
    }
    double sum = 0.0;
    for (int r : ratings) sum += likert_to_score(r);
    return sum / static_cast<double>(ratings.size());
}

AdherenceScore adherence_from_likert(int level) {
    AdherenceScore score;
    score.value = likert_to_score(level);
    score.likert = level;
    return score;
}

}  // namespace coa
