#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coa/core.hpp"

namespace coa::metrics {

// Predicted vs ground-truth values over the same ids.
struct PairedSeries {
    std::vector<std::string> ids;
    std::vector<double> predicted;
    std::vector<double> truth;

    void check_invariants() const;  // equal lengths >= 2, unique ids
};

/// Product-moment correlation. Throws DegenerateError on zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);
double pearson(const PairedSeries& series);

/// Mann-Whitney rank AUC: P(score+ > score-) + 0.5 P(tie). Exact under
/// ties. Throws DegenerateError unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct BinarizedTruth {
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<std::string> excluded;  // ids exactly at the threshold
};

/// label = 1 iff truth > threshold; items exactly at the threshold are
/// excluded and reported.
BinarizedTruth binarize_truth(const std::vector<std::string>& ids,
                              const std::vector<double>& scores,
                              const std::vector<double>& truth, double threshold);

// One evaluator's ordered judgments over a shared (rule, objective) cell
// ordering.
struct JudgmentVector {
    std::string evaluator;
    std::vector<Judgment> cells;
};

/// Fraction of cells with identical categorical judgments (equivalently
/// 1 - normalized Hamming distance). Throws on length mismatch.
double dice_hamming(const JudgmentVector& a, const JudgmentVector& b);

/// Mean similarity of the candidate to each expert, divided by the mean
/// pairwise expert-expert similarity, so an average expert scores ~1.
/// Requires >= 2 experts and nonzero expert-expert similarity.
double normalized_consistency(const JudgmentVector& candidate,
                              const std::vector<JudgmentVector>& experts);

}  // namespace coa::metrics
