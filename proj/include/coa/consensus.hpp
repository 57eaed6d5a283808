#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coa/core.hpp"

namespace coa::consensus {

// Segments smaller than this are excluded from the max-min minimum.
inline constexpr int kDefaultMinSegmentSize = 5;

// Participants x statements agreement votes. Cells are 1 (agree), 0
// (disagree) or missing; fractional in [0,1] after imputation.
struct VoteMatrix {
    std::vector<std::string> participants;
    std::vector<std::string> statements;
    // Row-major participants x statements.
    std::vector<std::optional<double>> votes;
    // segmentation name -> participant id -> segment label
    std::map<std::string, std::map<std::string, std::string>> segmentations;

    std::size_t participant_index(const std::string& id) const;
    std::size_t statement_index(const std::string& id) const;
    std::optional<double>& at(std::size_t p, std::size_t s);
    const std::optional<double>& at(std::size_t p, std::size_t s) const;
    bool fully_observed() const;

    // Dimensions match id lists, every participant labeled in every
    // segmentation, at least one observed vote per statement.
    void check_invariants() const;
};

enum class ImputeStrategy { kStatementMean, kSegmentMean };

/// Fills missing cells. kStatementMean uses the statement's observed mean;
/// kSegmentMean uses the (segment, statement) observed mean, falling back to
/// the statement mean when the segment has no observed votes. Observed cells
/// are preserved exactly. For kSegmentMean, `segmentation` selects the
/// segmentation (default: the first one).
VoteMatrix impute_votes(const VoteMatrix& matrix, ImputeStrategy strategy,
                        const std::string& segmentation = "");

/// Mean of a segment's (possibly fractional) votes on one statement.
double segment_agreement(const VoteMatrix& imputed, const std::string& segmentation,
                         const std::string& segment, const std::string& statement);

struct SegmentAgreement {
    std::string segmentation;
    std::string segment;
    double agreement = 0.0;
    std::size_t size = 0;
};

struct StatementBridging {
    std::string statement;
    std::vector<SegmentAgreement> segments;  // segments that met the size floor
    double alpha = 0.0;                      // min over segment agreements
};

struct BridgingReport {
    std::vector<StatementBridging> statements;  // original statement order
    std::vector<std::string> segmentations;
    std::vector<std::string> warnings;  // undersized segments excluded, etc.
};

/// Max-min bridging agreement per statement: alpha_s is the minimum
/// agreement over all segments of all segmentations, pooled. Segments below
/// min_segment_size are excluded with a warning recorded in the report.
BridgingReport maxmin_bridging(const VoteMatrix& imputed,
                               int min_segment_size = kDefaultMinSegmentSize);

/// Statement ids with alpha >= threshold, original order preserved.
std::vector<std::string> filter_bridging(const BridgingReport& report, double threshold);

// Per-participant total orders over the same N items.
struct RankingBallots {
    std::vector<std::string> items;  // the N item ids
    std::vector<std::string> participants;
    std::vector<std::vector<std::string>> ballots;  // each a permutation of items

    void check_invariants() const;
};

/// Positional preference score in [0,1]: 1 iff every ballot ranks the item
/// first, 0 iff every ballot ranks it last. Requires N >= 2.
double borda_preference(const RankingBallots& ballots, const std::string& item);

std::map<std::string, double> borda_scores(const RankingBallots& ballots);

enum class RejectReason { kOverallBelowThreshold, kBridgingBelowThreshold };

const char* to_string(RejectReason reason);

struct RatificationResult {
    std::vector<Objective> ratified;  // preference descending, ties by id ascending
    std::vector<std::pair<std::string, RejectReason>> rejected;
};

/// Keeps objectives with support_overall > overall_threshold AND
/// support_bridging > bridging_threshold (strict, matching the ">75%/>66%"
/// convention). When both checks fail the overall reason is recorded.
RatificationResult ratify(const std::vector<Objective>& objectives,
                          double overall_threshold, double bridging_threshold);

struct MarginResult {
    double margin = 0.0;
    bool degenerate = false;  // p was exactly 0 or 1
};

/// Normal-approximation margin of error z * sqrt(p(1-p)/n) at the given
/// two-sided confidence level.
MarginResult support_margin(double p, long n, double confidence);

/// Two-sided z for a confidence level in (0,1), e.g. 0.95 -> 1.95996...
double normal_quantile(double p);

// io
VoteMatrix load_votes_csv(const std::string& path);
void load_segments_csv(VoteMatrix& matrix, const std::string& path);
RankingBallots load_rankings_csv(const std::string& path);

/// JSON object keyed by statement id.
nlohmann::json bridging_report_to_json(const BridgingReport& report);

}  // namespace coa::consensus
