#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coa/core.hpp"
#include "coa/grader.hpp"
#include "coa/registry.hpp"

namespace coa::rbr {

enum class Weighting { kObjectiveAlignment, kUniform };
enum class Applicability { kAllDomainRules, kGraderFlagged };

struct RbrConfig {
    Weighting weighting = Weighting::kObjectiveAlignment;
    Applicability applicability = Applicability::kAllDomainRules;
    RetryPolicy retry;
    int concurrency = 1;  // >= 1
    // Opt-in fallback to uniform weights when the weight sum is <= 0.
    bool uniform_fallback_on_degenerate_weights = false;

    void check() const;
};

/// Weight-normalized adherence average: sum(adh * w) / sum(w) over the keys
/// of `weights`. Every weighted rule needs an adherence score (missing ones
/// are a ValidationError listing the rules). A non-positive weight sum is a
/// DegenerateError unless uniform_fallback is set.
double rbr_score(const std::map<std::string, AdherenceScore>& adherence,
                 const std::map<std::string, double>& weights,
                 bool uniform_fallback = false);

/// Unweighted mean of adherence scores; identical to rbr_score with unit
/// weights. Throws on an empty map.
double ablated_rbr(const std::map<std::string, AdherenceScore>& adherence);

/// Grades one (prompt, response, rule) triple and maps the verdict through
/// the Likert mapping. A not-applicable verdict is a ProtocolError here;
/// batch grading is where exclusion happens.
AdherenceScore grade_adherence(Grader& grader, const std::string& prompt,
                               const std::string& response, const Rule& rule);

struct ItemError {
    std::string id;
    std::string rule_id;  // empty for response-level failures
    std::string message;
};

struct BatchResult {
    std::vector<GradedResponse> responses;  // input order; failed items carry no rbr
    std::vector<ItemError> errors;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
};

/// Grades every (response, domain-rule) pair subject to the concurrency
/// cap, then computes weighted and ablated RBR per response. Failures are
/// isolated per response; the batch never aborts on a single grader error.
/// Output is input-ordered and independent of the concurrency cap.
BatchResult grade_batch(Grader& grader, const std::vector<GradedResponse>& responses,
                        const Registry& registry, const RbrConfig& config);

// io: JSON-lines {"id", "domain"?, "prompt", "response", "ground_truth"?}
std::vector<GradedResponse> load_responses_jsonl(const std::string& path);

/// Graded JSON-lines mirroring input ids with the adherence map and rbr;
/// failed items carry an "error" field instead.
void write_graded_jsonl(const BatchResult& result, const std::string& path);

std::vector<GradedResponse> load_graded_jsonl(const std::string& path);

}  // namespace coa::rbr
