#include "coa/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "coa/csv.hpp"

using json = nlohmann::json;

namespace coa::consensus {

std::size_t VoteMatrix::participant_index(const std::string& id) const {
    for (std::size_t i = 0; i < participants.size(); ++i) {
        if (participants[i] == id) return i;
    }
    throw ValidationError("unknown participant '" + id + "'");
}

std::size_t VoteMatrix::statement_index(const std::string& id) const {
    for (std::size_t i = 0; i < statements.size(); ++i) {
        if (statements[i] == id) return i;
    }
    throw ValidationError("unknown statement '" + id + "'");
}

std::optional<double>& VoteMatrix::at(std::size_t p, std::size_t s) {
    return votes[p * statements.size() + s];
}

const std::optional<double>& VoteMatrix::at(std::size_t p, std::size_t s) const {
    return votes[p * statements.size() + s];
}

bool VoteMatrix::fully_observed() const {
    for (const auto& v : votes) {
        if (!v.has_value()) return false;
    }
    return true;
}

void VoteMatrix::check_invariants() const {
    if (votes.size() != participants.size() * statements.size()) {
        throw ValidationError("vote matrix dimensions do not match the id lists");
    }
    for (const auto& [name, labels] : segmentations) {
        for (const auto& p : participants) {
            if (labels.find(p) == labels.end()) {
                throw ValidationError("participant '" + p + "' unlabeled in segmentation '" +
                                      name + "'");
            }
        }
    }
    for (std::size_t s = 0; s < statements.size(); ++s) {
        bool any = false;
        for (std::size_t p = 0; p < participants.size(); ++p) any |= at(p, s).has_value();
        if (!any) {
            throw ValidationError("statement '" + statements[s] + "' has no observed votes");
        }
    }
}

namespace {

double statement_mean(const VoteMatrix& m, std::size_t s) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < m.participants.size(); ++p) {
        if (m.at(p, s).has_value()) {
            sum += *m.at(p, s);
            ++count;
        }
    }
    if (count == 0) {
        throw ValidationError("statement '" + m.statements[s] + "' has no observed votes");
    }
    return sum / static_cast<double>(count);
}

}  // namespace

VoteMatrix impute_votes(const VoteMatrix& matrix, ImputeStrategy strategy,
                        const std::string& segmentation) {
    VoteMatrix out = matrix;
    const std::map<std::string, std::string>* labels = nullptr;
    if (strategy == ImputeStrategy::kSegmentMean) {
        if (matrix.segmentations.empty()) {
            throw ValidationError("segment-mean imputation requires a segmentation");
        }
        const std::string& name =
            segmentation.empty() ? matrix.segmentations.begin()->first : segmentation;
        const auto it = matrix.segmentations.find(name);
        if (it == matrix.segmentations.end()) {
            throw ValidationError("unknown segmentation '" + name + "'");
        }
        labels = &it->second;
    }

    for (std::size_t s = 0; s < matrix.statements.size(); ++s) {
        const double fallback = statement_mean(matrix, s);
        for (std::size_t p = 0; p < matrix.participants.size(); ++p) {
            if (matrix.at(p, s).has_value()) continue;  // observed cells preserved exactly
            double fill = fallback;
            if (strategy == ImputeStrategy::kSegmentMean) {
                const std::string& label = labels->at(matrix.participants[p]);
                double sum = 0.0;
                std::size_t count = 0;
                for (std::size_t q = 0; q < matrix.participants.size(); ++q) {
                    if (labels->at(matrix.participants[q]) != label) continue;
                    if (!matrix.at(q, s).has_value()) continue;
                    sum += *matrix.at(q, s);
                    ++count;
                }
                if (count > 0) fill = sum / static_cast<double>(count);
            }
            out.at(p, s) = fill;
        }
    }
    return out;
}

double segment_agreement(const VoteMatrix& imputed, const std::string& segmentation,
                         const std::string& segment, const std::string& statement) {
    const auto seg_it = imputed.segmentations.find(segmentation);
    if (seg_it == imputed.segmentations.end()) {
        throw ValidationError("unknown segmentation '" + segmentation + "'");
    }
    const std::size_t s = imputed.statement_index(statement);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < imputed.participants.size(); ++p) {
        const auto label_it = seg_it->second.find(imputed.participants[p]);
        if (label_it == seg_it->second.end() || label_it->second != segment) continue;
        const auto& cell = imputed.at(p, s);
        if (!cell.has_value()) {
            throw ValidationError("segment agreement needs an imputed matrix; '" +
                                  imputed.participants[p] + "' is missing a vote");
        }
        sum += *cell;
        ++count;
    }
    if (count == 0) {
        throw ValidationError("segment '" + segment + "' of '" + segmentation + "' is empty");
    }
    return sum / static_cast<double>(count);
}

BridgingReport maxmin_bridging(const VoteMatrix& imputed, int min_segment_size) {
    if (imputed.segmentations.empty()) {
        throw ValidationError("maxmin_bridging requires at least one segmentation");
    }
    BridgingReport report;

    // Pool segments across all segmentations, applying the size floor once.
    struct Segment {
        std::string segmentation;
        std::string label;
        std::vector<std::size_t> members;
    };
    std::vector<Segment> segments;
    for (const auto& [name, labels] : imputed.segmentations) {
        report.segmentations.push_back(name);
        std::map<std::string, std::vector<std::size_t>> by_label;
        for (std::size_t p = 0; p < imputed.participants.size(); ++p) {
            const auto it = labels.find(imputed.participants[p]);
            if (it == labels.end()) {
                throw ValidationError("participant '" + imputed.participants[p] +
                                      "' unlabeled in segmentation '" + name + "'");
            }
            by_label[it->second].push_back(p);
        }
        for (auto& [label, members] : by_label) {
            if (static_cast<int>(members.size()) < min_segment_size) {
                report.warnings.push_back("segment '" + name + ":" + label + "' excluded (size " +
                                          std::to_string(members.size()) + " < " +
                                          std::to_string(min_segment_size) + ")");
                continue;
            }
            segments.push_back({name, label, std::move(members)});
        }
    }
    if (segments.empty()) {
        throw ValidationError("every segment is below the size floor of " +
                              std::to_string(min_segment_size));
    }

    for (std::size_t s = 0; s < imputed.statements.size(); ++s) {
        StatementBridging entry;
        entry.statement = imputed.statements[s];
        entry.alpha = 2.0;
        for (const auto& segment : segments) {
            double sum = 0.0;
            for (std::size_t p : segment.members) {
                const auto& cell = imputed.at(p, s);
                if (!cell.has_value()) {
                    throw ValidationError("maxmin_bridging needs an imputed matrix; '" +
                                          imputed.participants[p] + "' is missing a vote on '" +
                                          imputed.statements[s] + "'");
                }
                sum += *cell;
            }
            SegmentAgreement sa;
            sa.segmentation = segment.segmentation;
            sa.segment = segment.label;
            sa.size = segment.members.size();
            sa.agreement = sum / static_cast<double>(segment.members.size());
            entry.alpha = std::min(entry.alpha, sa.agreement);
            entry.segments.push_back(std::move(sa));
        }
        report.statements.push_back(std::move(entry));
    }
    return report;
}

std::vector<std::string> filter_bridging(const BridgingReport& report, double threshold) {
    if (threshold < 0.0 || threshold > 1.0) {
        throw ValidationError("bridging threshold outside [0,1]");
    }
    std::vector<std::string> out;
    for (const auto& s : report.statements) {
        if (s.alpha >= threshold) out.push_back(s.statement);
    }
    return out;
}

void RankingBallots::check_invariants() const {
    if (items.size() < 2) {
        throw ValidationError("rankings need at least 2 items (positional score divides by N-1)");
    }
    const std::set<std::string> universe(items.begin(), items.end());
    if (universe.size() != items.size()) throw ValidationError("duplicate item ids");
    for (std::size_t b = 0; b < ballots.size(); ++b) {
        const std::string who =
            b < participants.size() ? participants[b] : ("ballot " + std::to_string(b));
        std::set<std::string> seen;
        for (const auto& item : ballots[b]) {
            if (universe.count(item) == 0) {
                throw ValidationError(who + " ranks unknown item '" + item + "'");
            }
            if (!seen.insert(item).second) {
                throw ValidationError(who + " ranks item '" + item + "' twice");
            }
        }
        if (seen.size() != universe.size()) {
            for (const auto& item : items) {
                if (seen.count(item) == 0) {
                    throw ValidationError(who + " is missing a rank for item '" + item + "'");
                }
            }
        }
    }
}

double borda_preference(const RankingBallots& ballots, const std::string& item) {
    ballots.check_invariants();
    if (ballots.ballots.empty()) throw ValidationError("no ballots");
    if (std::find(ballots.items.begin(), ballots.items.end(), item) == ballots.items.end()) {
        throw ValidationError("unknown item '" + item + "'");
    }
    const double n = static_cast<double>(ballots.items.size());
    double sum = 0.0;
    for (const auto& ballot : ballots.ballots) {
        for (std::size_t r = 0; r < ballot.size(); ++r) {
            if (ballot[r] == item) {
                sum += 1.0 - static_cast<double>(r) / (n - 1.0);
                break;
            }
        }
    }
    return sum / static_cast<double>(ballots.ballots.size());
}

std::map<std::string, double> borda_scores(const RankingBallots& ballots) {
    std::map<std::string, double> out;
    for (const auto& item : ballots.items) out[item] = borda_preference(ballots, item);
    return out;
}

const char* to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::kOverallBelowThreshold: return "overall_below_threshold";
        case RejectReason::kBridgingBelowThreshold: return "bridging_below_threshold";
    }
    return "?";
}

RatificationResult ratify(const std::vector<Objective>& objectives, double overall_threshold,
                          double bridging_threshold) {
    if (overall_threshold < 0.0 || overall_threshold > 1.0 || bridging_threshold < 0.0 ||
        bridging_threshold > 1.0) {
        throw ValidationError("ratification thresholds outside [0,1]");
    }
    RatificationResult result;
    for (const auto& o : objectives) {
        if (o.support_overall <= overall_threshold) {
            result.rejected.emplace_back(o.id, RejectReason::kOverallBelowThreshold);
        } else if (o.support_bridging <= bridging_threshold) {
            result.rejected.emplace_back(o.id, RejectReason::kBridgingBelowThreshold);
        } else {
            result.ratified.push_back(o);
        }
    }
    std::sort(result.ratified.begin(), result.ratified.end(),
              [](const Objective& a, const Objective& b) {
                  if (a.preference != b.preference) return a.preference > b.preference;
                  return a.id < b.id;
              });
    return result;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantile probability outside (0,1)");
    // Acklam's rational approximation, then one Halley refinement with erfc.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley step against the exact CDF.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

MarginResult support_margin(double p, long n, double confidence) {
    if (p < 0.0 || p > 1.0) throw ValidationError("support fraction outside [0,1]");
    if (n < 1) throw ValidationError("sample size must be >= 1");
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw ValidationError("confidence level outside (0,1)");
    }
    if (p == 0.0 || p == 1.0) return {0.0, true};
    const double z = normal_quantile(1.0 - (1.0 - confidence) / 2.0);
    return {z * std::sqrt(p * (1.0 - p) / static_cast<double>(n)), false};
}

VoteMatrix load_votes_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    const std::size_t pc = table.column("participant_id");
    const std::size_t sc = table.column("statement_id");
    const std::size_t vc = table.column("vote");

    VoteMatrix m;
    std::map<std::string, std::size_t> p_index, s_index;
    struct Entry {
        std::size_t line;
        std::size_t p, s;
        std::optional<double> vote;
    };
    std::vector<Entry> entries;
    for (const auto& row : table.rows) {
        const std::string& pid = row.fields[pc];
        const std::string& sid = row.fields[sc];
        if (p_index.emplace(pid, m.participants.size()).second) m.participants.push_back(pid);
        if (s_index.emplace(sid, m.statements.size()).second) m.statements.push_back(sid);
        std::optional<double> vote;
        const std::string& raw = row.fields[vc];
        if (!raw.empty()) {
            if (raw == "1") vote = 1.0;
            else if (raw == "0") vote = 0.0;
            else {
                throw ValidationError(path + ":" + std::to_string(row.line) + ": vote '" + raw +
                                      "' is not 0, 1, or empty");
            }
        }
        entries.push_back({row.line, p_index[pid], s_index[sid], vote});
    }
    m.votes.assign(m.participants.size() * m.statements.size(), std::nullopt);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : entries) {
        if (!seen.insert({e.p, e.s}).second) {
            throw ValidationError(path + ":" + std::to_string(e.line) + ": duplicate vote for (" +
                                  m.participants[e.p] + ", " + m.statements[e.s] + ")");
        }
        m.at(e.p, e.s) = e.vote;
    }
    for (std::size_t s = 0; s < m.statements.size(); ++s) {
        bool any = false;
        for (std::size_t p = 0; p < m.participants.size(); ++p) any |= m.at(p, s).has_value();
        if (!any) {
            throw ValidationError(path + ": statement '" + m.statements[s] +
                                  "' has no observed votes");
        }
    }
    return m;
}

void load_segments_csv(VoteMatrix& matrix, const std::string& path) {
    const csv::Table table = csv::read_file(path);
    const std::size_t pc = table.column("participant_id");
    const std::size_t gc = table.column("segmentation");
    const std::size_t sc = table.column("segment");
    for (const auto& row : table.rows) {
        matrix.segmentations[row.fields[gc]][row.fields[pc]] = row.fields[sc];
    }
    // Every participant must be labeled in every provided segmentation.
    for (const auto& [name, labels] : matrix.segmentations) {
        for (const auto& p : matrix.participants) {
            if (labels.find(p) == labels.end()) {
                throw ValidationError(path + ": participant '" + p +
                                      "' unlabeled in segmentation '" + name + "'");
            }
        }
    }
}

RankingBallots load_rankings_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    const std::size_t pc = table.column("participant_id");
    const std::size_t ic = table.column("item_id");
    const std::size_t rc = table.column("rank");

    std::map<std::string, std::map<long, std::string>> by_participant;  // rank -> item
    std::set<std::string> items;
    std::vector<std::string> item_order;
    std::vector<std::string> participant_order;
    for (const auto& row : table.rows) {
        const std::string& pid = row.fields[pc];
        const std::string& item = row.fields[ic];
        long rank = 0;
        try {
            rank = std::stol(row.fields[rc]);
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(row.line) + ": rank '" +
                                  row.fields[rc] + "' is not an integer");
        }
        if (rank < 1) {
            throw ValidationError(path + ":" + std::to_string(row.line) + ": rank must be >= 1");
        }
        if (items.insert(item).second) item_order.push_back(item);
        if (by_participant.find(pid) == by_participant.end()) participant_order.push_back(pid);
        auto& ballot = by_participant[pid];
        if (!ballot.emplace(rank, item).second) {
            throw ValidationError(path + ":" + std::to_string(row.line) + ": participant '" + pid +
                                  "' has two items at rank " + std::to_string(rank));
        }
    }

    RankingBallots out;
    out.items = item_order;
    for (const auto& pid : participant_order) {
        const auto& ballot = by_participant[pid];
        std::vector<std::string> ordered;
        long expected = 1;
        for (const auto& [rank, item] : ballot) {
            if (rank != expected) {
                throw ValidationError(path + ": participant '" + pid + "' skips rank " +
                                      std::to_string(expected));
            }
            ordered.push_back(item);
            ++expected;
        }
        out.participants.push_back(pid);
        out.ballots.push_back(std::move(ordered));
    }
    out.check_invariants();
    return out;
}

json bridging_report_to_json(const BridgingReport& report) {
    json j = json::object();
    for (const auto& s : report.statements) {
        json segments = json::object();
        for (const auto& seg : s.segments) {
            segments[seg.segmentation + ":" + seg.segment] = {{"agreement", seg.agreement},
                                                              {"size", seg.size}};
        }
        j[s.statement] = {{"alpha", s.alpha}, {"segments", segments}};
    }
    return j;
}

}  // namespace coa::consensus
