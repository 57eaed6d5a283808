#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coa/core.hpp"
#include "coa/metrics.hpp"
#include "coa/registry.hpp"
#include "coa/rules.hpp"

namespace coa::metrics {

struct MetricCell {
    std::optional<double> value;
    std::string note;  // why the value is undefined, when it is
};

struct VariantMetrics {
    std::string name;  // "weighted" or "ablated"
    MetricCell pearson_r;
    MetricCell auc;
    std::size_t n = 0;
};

struct AlignmentReport {
    VariantMetrics weighted;
    VariantMetrics ablated;
    std::map<std::string, MetricCell> per_rule_usefulness;
    std::optional<rules::SignalCorrelationTable> signals;
    std::size_t items_with_truth = 0;
    std::vector<std::string> warnings;
};

struct ReportConfig {
    double binarize_threshold = 0.0;
    std::size_t min_ground_truth = 3;
};

/// Assembles the validation report: weighted and ablated Pearson/AUC side
/// by side plus per-rule usefulness. Responses without ground truth are
/// skipped; fewer than min_ground_truth remaining is a ValidationError.
AlignmentReport alignment_report(const std::vector<GradedResponse>& graded,
                                 const Registry& registry, const ReportConfig& config);

nlohmann::json report_to_json(const AlignmentReport& report);

/// Flat CSV, one metric per row: metric,domain,value.
std::string report_to_csv(const AlignmentReport& report);

/// Scatter data: id,rbr,ground_truth for every item carrying both.
std::string scatter_csv(const std::vector<GradedResponse>& graded);

}  // namespace coa::metrics
