#include "coa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace coa::metrics {

void PairedSeries::check_invariants() const {
    if (ids.size() != predicted.size() || ids.size() != truth.size()) {
        throw ValidationError("paired series lengths differ");
    }
    if (ids.size() < 2) throw ValidationError("paired series needs at least 2 items");
    const std::set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size()) throw ValidationError("duplicate ids in paired series");
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("series lengths differ");
    if (x.size() < 2) throw ValidationError("correlation needs at least 2 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateError("correlation undefined: a series has zero variance");
    }
    return sxy / std::sqrt(sxx * syy);
}

double pearson(const PairedSeries& series) {
    series.check_invariants();
    return pearson(series.predicted, series.truth);
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ValidationError("scores/labels lengths differ");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) {
        if (l == 1) ++n_pos;
        else if (l == 0) ++n_neg;
        else throw ValidationError("labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0) {
        throw DegenerateError("AUC undefined: both classes required");
    }

    // Rank statistic with average ranks over ties:
    // AUC = (R+ - n+(n+ + 1)/2) / (n+ n-).
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t k = i;
        while (k + 1 < order.size() && scores[order[k + 1]] == scores[order[i]]) ++k;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(k + 1)) / 2.0;
        for (std::size_t t = i; t <= k; ++t) {
            if (labels[order[t]] == 1) rank_sum_pos += avg_rank;
        }
        i = k + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

BinarizedTruth binarize_truth(const std::vector<std::string>& ids,
                              const std::vector<double>& scores,
                              const std::vector<double>& truth, double threshold) {
    if (ids.size() != truth.size() || ids.size() != scores.size()) {
        throw ValidationError("ids/scores/truth lengths differ");
    }
    BinarizedTruth out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (truth[i] == threshold) {
            out.excluded.push_back(ids[i]);
            continue;
        }
        out.ids.push_back(ids[i]);
        out.scores.push_back(scores[i]);
        out.labels.push_back(truth[i] > threshold ? 1 : 0);
    }
    return out;
}

double dice_hamming(const JudgmentVector& a, const JudgmentVector& b) {
    if (a.cells.size() != b.cells.size()) {
        throw ValidationError("judgment vectors have different lengths (" +
                              std::to_string(a.cells.size()) + " vs " +
                              std::to_string(b.cells.size()) + ")");
    }
    if (a.cells.empty()) throw ValidationError("empty judgment vectors");
    std::size_t matches = 0;
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        if (a.cells[i] == b.cells[i]) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(a.cells.size());
}

double normalized_consistency(const JudgmentVector& candidate,
                              const std::vector<JudgmentVector>& experts) {
    if (experts.size() < 2) {
        throw ValidationError("consistency normalization needs at least 2 experts");
    }
    double candidate_sum = 0.0;
    for (const auto& e : experts) candidate_sum += dice_hamming(candidate, e);
    const double candidate_mean = candidate_sum / static_cast<double>(experts.size());

    double pair_sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < experts.size(); ++i) {
        for (std::size_t k = i + 1; k < experts.size(); ++k) {
            pair_sum += dice_hamming(experts[i], experts[k]);
            ++pairs;
        }
    }
    const double expert_mean = pair_sum / static_cast<double>(pairs);
    if (expert_mean == 0.0) {
        throw DegenerateError("expert-expert similarity is zero; normalization undefined");
    }
    return candidate_mean / expert_mean;
}

}  // namespace coa::metrics
