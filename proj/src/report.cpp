#include "coa/report.hpp"

#include <sstream>

#include "coa/rbr.hpp"

using json = nlohmann::json;

namespace coa::metrics {

namespace {

MetricCell cell_of(double v) {
    MetricCell c;
    c.value = v;
    return c;
}

MetricCell undefined_cell(const std::string& note) {
    MetricCell c;
    c.note = note;
    return c;
}

VariantMetrics variant_metrics(const std::string& name, const std::vector<std::string>& ids,
                               const std::vector<double>& predicted,
                               const std::vector<double>& truth, double binarize_threshold,
                               std::vector<std::string>& warnings) {
    VariantMetrics m;
    m.name = name;
    m.n = ids.size();
    try {
        m.pearson_r = cell_of(pearson(predicted, truth));
    } catch (const Error& e) {
        m.pearson_r = undefined_cell(e.what());
    }
    try {
        const BinarizedTruth b = binarize_truth(ids, predicted, truth, binarize_threshold);
        for (const auto& id : b.excluded) {
            warnings.push_back(name + ": item '" + id + "' exactly at the binarization "
                               "threshold, excluded from AUC");
        }
        m.auc = cell_of(auc(b.scores, b.labels));
    } catch (const Error& e) {
        m.auc = undefined_cell(e.what());
    }
    return m;
}

}  // namespace

AlignmentReport alignment_report(const std::vector<GradedResponse>& graded,
                                 const Registry& registry, const ReportConfig& config) {
    AlignmentReport report;

    std::vector<std::string> ids;
    std::vector<double> weighted, ablated, truth;
    for (const auto& g : graded) {
        if (!g.ground_truth.has_value()) continue;
        if (!g.rbr.has_value() && g.adherence.empty()) continue;
        double w;
        if (g.rbr.has_value()) {
            w = *g.rbr;
        } else {
            // Recompute from adherence with registry weights.
            std::map<std::string, double> weights;
            for (const auto& [rule_id, score] : g.adherence) {
                (void)score;
                const Rule* rule = registry.find_rule(g.domain, rule_id);
                if (rule == nullptr) {
                    throw ValidationError("graded item '" + g.id + "' references unknown rule '" +
                                          rule_id + "' in domain '" + g.domain + "'");
                }
                weights[rule_id] = rule->weight;
            }
            w = rbr::rbr_score(g.adherence, weights);
        }
        const double abl = g.rbr_ablated.has_value() ? *g.rbr_ablated : rbr::ablated_rbr(g.adherence);
        ids.push_back(g.id);
        weighted.push_back(w);
        ablated.push_back(abl);
        truth.push_back(*g.ground_truth);
    }
    report.items_with_truth = ids.size();
    if (ids.size() < config.min_ground_truth) {
        throw ValidationError("alignment report needs >= " +
                              std::to_string(config.min_ground_truth) +
                              " items with ground truth, got " + std::to_string(ids.size()));
    }

    report.weighted = variant_metrics("weighted", ids, weighted, truth,
                                      config.binarize_threshold, report.warnings);
    report.ablated = variant_metrics("ablated", ids, ablated, truth, config.binarize_threshold,
                                     report.warnings);

    // Per-rule usefulness over every rule that appears in the graded set.
    std::map<std::string, const Rule*> rules_seen;
    for (const auto& g : graded) {
        for (const auto& [rule_id, score] : g.adherence) {
            (void)score;
            const Rule* rule = registry.find_rule(g.domain, rule_id);
            if (rule != nullptr) rules_seen.emplace(rule_id, rule);
        }
    }
    for (const auto& [rule_id, rule] : rules_seen) {
        try {
            report.per_rule_usefulness[rule_id] = cell_of(rules::rule_usefulness(graded, *rule));
        } catch (const Error& e) {
            report.per_rule_usefulness[rule_id] = undefined_cell(e.what());
        }
    }
    return report;
}

namespace {

json cell_to_json(const MetricCell& cell) {
    if (cell.value.has_value()) return *cell.value;
    return {{"undefined", cell.note}};
}

json variant_to_json(const VariantMetrics& m) {
    return {{"pearson_r", cell_to_json(m.pearson_r)}, {"auc", cell_to_json(m.auc)}, {"n", m.n}};
}

}  // namespace

json report_to_json(const AlignmentReport& report) {
    json usefulness = json::object();
    for (const auto& [rule_id, cell] : report.per_rule_usefulness) {
        usefulness[rule_id] = cell_to_json(cell);
    }
    json j = {{"weighted", variant_to_json(report.weighted)},
              {"ablated", variant_to_json(report.ablated)},
              {"per_rule_usefulness", usefulness},
              {"items_with_truth", report.items_with_truth},
              {"warnings", report.warnings}};
    if (report.signals.has_value()) j["signals"] = rules::signal_table_to_json(*report.signals);
    return j;
}

namespace {

// Shortest round-trip float formatting, matching the JSON outputs.
std::string number(double v) { return json(v).dump(); }

void csv_row(std::ostringstream& out, const std::string& metric, const std::string& domain,
             const MetricCell& cell) {
    out << metric << "," << domain << ",";
    if (cell.value.has_value()) out << number(*cell.value);
    else out << "undefined";
    out << "\n";
}

}  // namespace

std::string report_to_csv(const AlignmentReport& report) {
    std::ostringstream out;
    out << "metric,domain,value\n";
    csv_row(out, "pearson_r_weighted", "all", report.weighted.pearson_r);
    csv_row(out, "auc_weighted", "all", report.weighted.auc);
    csv_row(out, "pearson_r_ablated", "all", report.ablated.pearson_r);
    csv_row(out, "auc_ablated", "all", report.ablated.auc);
    for (const auto& [rule_id, cell] : report.per_rule_usefulness) {
        csv_row(out, "usefulness_" + rule_id, "all", cell);
    }
    if (report.signals.has_value()) {
        for (const auto& [signal, row] : report.signals->cells) {
            for (const auto& [domain, cell] : row) {
                MetricCell mc;
                mc.value = cell.r;
                mc.note = cell.note;
                csv_row(out, "signal_" + signal, domain, mc);
            }
        }
    }
    return out.str();
}

std::string scatter_csv(const std::vector<GradedResponse>& graded) {
    std::ostringstream out;
    out << "id,rbr,ground_truth\n";
    for (const auto& g : graded) {
        if (!g.rbr.has_value() || !g.ground_truth.has_value()) continue;
        out << g.id << "," << number(*g.rbr) << "," << number(*g.ground_truth) << "\n";
    }
    return out.str();
}

}  // namespace coa::metrics
