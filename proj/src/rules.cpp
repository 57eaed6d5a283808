#include "coa/rules.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "coa/csv.hpp"
#include "coa/metrics.hpp"

using json = nlohmann::json;

namespace coa::rules {

double rule_objective_alignment(const std::vector<ExpertRuleEvaluation>& evals,
                                const std::string& rule_id, const std::string& objective_id) {
    std::size_t increase = 0, decrease = 0, total = 0;
    for (const auto& e : evals) {
        if (e.rule_id != rule_id) continue;
        const auto it = e.judgments.find(objective_id);
        if (it == e.judgments.end()) continue;  // skipped cells leave the denominator
        ++total;
        if (it->second == Judgment::kIncrease) ++increase;
        else if (it->second == Judgment::kDecrease) ++decrease;
    }
    if (total == 0) {
        throw ValidationError("no evaluator judged (" + rule_id + ", " + objective_id + ")");
    }
    return (static_cast<double>(increase) - static_cast<double>(decrease)) /
           static_cast<double>(total);
}

double rule_weight(const std::map<std::string, double>& per_objective,
                   const std::vector<std::string>& domain_objectives) {
    if (domain_objectives.empty()) throw ValidationError("domain has no objectives");
    std::vector<std::string> missing;
    double sum = 0.0;
    for (const auto& id : domain_objectives) {
        const auto it = per_objective.find(id);
        if (it == per_objective.end()) {
            missing.push_back(id);
            continue;
        }
        sum += it->second;
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) {
            if (!list.empty()) list += ", ";
            list += id;
        }
        throw ValidationError("missing alignment for objectives: " + list);
    }
    return sum / static_cast<double>(domain_objectives.size());
}

std::vector<RuleAlignmentProfile> aggregate_profiles(
    const std::vector<ExpertRuleEvaluation>& evals, const Registry& registry) {
    // Locate each rule's domain and reject unknown or duplicated evaluations.
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, std::string> rule_domain;
    for (const auto& e : evals) {
        if (!seen.insert({e.expert_id, e.rule_id}).second) {
            throw ValidationError("duplicate evaluation of rule '" + e.rule_id + "' by expert '" +
                                  e.expert_id + "'");
        }
        const Rule* rule = nullptr;
        for (const auto& d : registry.domains) {
            rule = registry.find_rule(d.id, e.rule_id);
            if (rule != nullptr) break;
        }
        if (rule == nullptr) throw ValidationError("unknown rule id '" + e.rule_id + "'");
        rule_domain[e.rule_id] = rule->domain;
        for (const auto& [objective_id, judgment] : e.judgments) {
            (void)judgment;
            if (registry.find_objective(rule->domain, objective_id) == nullptr) {
                throw ValidationError("rule '" + e.rule_id + "': unknown objective id '" +
                                      objective_id + "' in domain '" + rule->domain + "'");
            }
        }
    }

    std::vector<RuleAlignmentProfile> profiles;
    std::set<std::string> done;
    for (const auto& e : evals) {
        if (!done.insert(e.rule_id).second) continue;
        const std::string& domain = rule_domain[e.rule_id];
        RuleAlignmentProfile profile;
        profile.rule_id = e.rule_id;
        profile.domain = domain;

        std::vector<std::string> objective_ids;
        for (const auto& o : *registry.objectives_for(domain)) objective_ids.push_back(o.id);
        for (const auto& objective_id : objective_ids) {
            std::size_t count = 0;
            for (const auto& ev : evals) {
                if (ev.rule_id == e.rule_id && ev.judgments.count(objective_id) > 0) ++count;
            }
            if (count == 0) continue;  // gap surfaces in rule_weight below
            profile.objective_alignment[objective_id] =
                rule_objective_alignment(evals, e.rule_id, objective_id);
            profile.evaluator_count[objective_id] = static_cast<int>(count);
        }
        profile.weight = rule_weight(profile.objective_alignment, objective_ids);
        profiles.push_back(std::move(profile));
    }
    std::sort(profiles.begin(), profiles.end(),
              [](const RuleAlignmentProfile& a, const RuleAlignmentProfile& b) {
                  return a.rule_id < b.rule_id;
              });
    return profiles;
}

double rule_usefulness(const std::vector<GradedResponse>& responses, const Rule& rule) {
    std::vector<double> contributions, truths;
    for (const auto& g : responses) {
        if (!g.ground_truth.has_value()) continue;
        const auto it = g.adherence.find(rule.id);
        if (it == g.adherence.end()) continue;
        contributions.push_back(it->second.value * rule.weight);
        truths.push_back(*g.ground_truth);
    }
    if (contributions.size() < 3) {
        throw ValidationError("rule '" + rule.id + "': usefulness needs >= 3 graded responses " +
                              "with ground truth, got " + std::to_string(contributions.size()));
    }
    try {
        return metrics::pearson(contributions, truths);
    } catch (const DegenerateError&) {
        throw DegenerateError("rule '" + rule.id + "': usefulness correlation undefined " +
                              "(zero contribution or truth variance)");
    }
}

std::vector<RuleSignals> aggregate_signals(const std::vector<ExpertRuleEvaluation>& evals,
                                           const Registry& registry) {
    std::map<std::string, RuleSignals> by_rule;
    std::map<std::string, std::pair<int, int>> support_counts;  // yes, answered
    std::map<std::string, std::pair<double, int>> importance_sums;
    for (const auto& e : evals) {
        const Rule* rule = nullptr;
        for (const auto& d : registry.domains) {
            rule = registry.find_rule(d.id, e.rule_id);
            if (rule != nullptr) break;
        }
        if (rule == nullptr) throw ValidationError("unknown rule id '" + e.rule_id + "'");
        auto& s = by_rule[e.rule_id];
        s.rule_id = e.rule_id;
        s.domain = rule->domain;
        s.weight = rule->weight;
        if (e.support.has_value()) {
            auto& [yes, answered] = support_counts[e.rule_id];
            ++answered;
            if (*e.support) ++yes;
        }
        if (e.importance.has_value()) {
            auto& [sum, count] = importance_sums[e.rule_id];
            sum += *e.importance;
            ++count;
        }
    }
    std::vector<RuleSignals> out;
    for (auto& [rule_id, s] : by_rule) {
        const auto sc = support_counts.find(rule_id);
        if (sc != support_counts.end() && sc->second.second > 0) {
            s.support_rate = static_cast<double>(sc->second.first) /
                             static_cast<double>(sc->second.second);
        }
        const auto im = importance_sums.find(rule_id);
        if (im != importance_sums.end() && im->second.second > 0) {
            s.importance_mean = im->second.first / static_cast<double>(im->second.second);
        }
        out.push_back(s);
    }
    return out;
}

SignalCorrelationTable expert_signal_correlations(
    const std::vector<RuleSignals>& signals,
    const std::map<std::string, double>& usefulness_per_rule) {
    std::map<std::string, std::vector<const RuleSignals*>> by_domain;
    for (const auto& s : signals) by_domain[s.domain].push_back(&s);

    SignalCorrelationTable table;
    const std::vector<std::pair<std::string, double RuleSignals::*>> signal_fields{
        {kSignalSupport, &RuleSignals::support_rate},
        {kSignalAlignment, &RuleSignals::weight},
        {kSignalImportance, &RuleSignals::importance_mean},
    };

    for (const auto& [domain, rules_in_domain] : by_domain) {
        table.domains.push_back(domain);
        std::vector<double> usefulness;
        for (const auto* s : rules_in_domain) {
            const auto it = usefulness_per_rule.find(s->rule_id);
            if (it == usefulness_per_rule.end()) {
                throw ValidationError("no usefulness value for rule '" + s->rule_id + "'");
            }
            usefulness.push_back(it->second);
        }
        if (rules_in_domain.size() < 3) {
            throw ValidationError("domain '" + domain + "' has fewer than 3 rules with signals");
        }
        for (const auto& [name, field] : signal_fields) {
            std::vector<double> values;
            for (const auto* s : rules_in_domain) values.push_back(s->*field);
            SignalCell cell;
            try {
                cell.r = metrics::pearson(values, usefulness);
            } catch (const DegenerateError& e) {
                cell.note = e.what();
            }
            table.cells[name][domain] = cell;
        }
    }

    // avg = mean of the defined per-domain correlations.
    for (const auto& [name, field] : signal_fields) {
        (void)field;
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& domain : table.domains) {
            const auto& cell = table.cells[name][domain];
            if (cell.r.has_value()) {
                sum += *cell.r;
                ++count;
            }
        }
        SignalCell avg;
        if (count > 0) avg.r = sum / static_cast<double>(count);
        else avg.note = "no domain with a defined correlation";
        table.cells[name]["avg"] = avg;
    }
    return table;
}

std::vector<ExpertRuleEvaluation> load_evaluations_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    const std::size_t ec = table.column("expert_id");
    const std::size_t rc = table.column("rule_id");
    const std::size_t oc = table.column("objective_id");
    const std::size_t jc = table.column("judgment");

    std::map<std::pair<std::string, std::string>, ExpertRuleEvaluation> by_key;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& row : table.rows) {
        const std::pair<std::string, std::string> key{row.fields[ec], row.fields[rc]};
        auto it = by_key.find(key);
        if (it == by_key.end()) {
            ExpertRuleEvaluation e;
            e.expert_id = key.first;
            e.rule_id = key.second;
            it = by_key.emplace(key, std::move(e)).first;
            order.push_back(key);
        }
        Judgment j;
        try {
            j = judgment_from_string(row.fields[jc]);
        } catch (const ValidationError& err) {
            throw ValidationError(path + ":" + std::to_string(row.line) + ": " + err.what());
        }
        if (!it->second.judgments.emplace(row.fields[oc], j).second) {
            throw ValidationError(path + ":" + std::to_string(row.line) + ": duplicate judgment " +
                                  "for (" + key.first + ", " + key.second + ", " + row.fields[oc] +
                                  ")");
        }
    }
    std::vector<ExpertRuleEvaluation> out;
    for (const auto& key : order) out.push_back(std::move(by_key[key]));
    return out;
}

namespace {

bool parse_bool(const std::string& raw, const std::string& where) {
    if (raw == "1" || raw == "true" || raw == "yes") return true;
    if (raw == "0" || raw == "false" || raw == "no") return false;
    throw ValidationError(where + ": support '" + raw + "' is not a boolean");
}

}  // namespace

void load_signals_csv(std::vector<ExpertRuleEvaluation>& evals, const std::string& path,
                      std::vector<std::string>* warnings) {
    const csv::Table table = csv::read_file(path);
    const std::size_t ec = table.column("expert_id");
    const std::size_t rc = table.column("rule_id");
    const std::size_t sc = table.column("support");
    const std::size_t ic = table.column("importance");

    struct Signal {
        std::size_t line;
        bool support;
        double importance;
    };
    std::map<std::pair<std::string, std::string>, Signal> parsed;
    double min_imp = 0.0, max_imp = 1.0;
    bool first = true;
    for (const auto& row : table.rows) {
        const std::string where = path + ":" + std::to_string(row.line);
        Signal s;
        s.line = row.line;
        s.support = parse_bool(row.fields[sc], where);
        try {
            s.importance = std::stod(row.fields[ic]);
        } catch (const std::exception&) {
            throw ValidationError(where + ": importance '" + row.fields[ic] + "' is not a number");
        }
        if (first) {
            min_imp = max_imp = s.importance;
            first = false;
        } else {
            min_imp = std::min(min_imp, s.importance);
            max_imp = std::max(max_imp, s.importance);
        }
        if (!parsed.emplace(std::make_pair(row.fields[ec], row.fields[rc]), s).second) {
            throw ValidationError(where + ": duplicate signal row for (" + row.fields[ec] + ", " +
                                  row.fields[rc] + ")");
        }
    }

    // Normalize importance to [0,1] whatever the elicitation scale was.
    const bool needs_rescale = min_imp < 0.0 || max_imp > 1.0;
    if (needs_rescale && warnings != nullptr) {
        warnings->push_back("importance rescaled from [" + std::to_string(min_imp) + ", " +
                            std::to_string(max_imp) + "] to [0,1]");
    }
    for (auto& [key, s] : parsed) {
        (void)key;
        if (!needs_rescale) continue;
        if (max_imp == min_imp) s.importance = 0.5;
        else s.importance = (s.importance - min_imp) / (max_imp - min_imp);
    }

    for (auto& e : evals) {
        const auto it = parsed.find({e.expert_id, e.rule_id});
        if (it == parsed.end()) continue;
        e.support = it->second.support;
        e.importance = it->second.importance;
    }
}

json profiles_to_json(const std::vector<RuleAlignmentProfile>& profiles) {
    json out = json::array();
    for (const auto& p : profiles) {
        json alignments = json::object();
        json counts = json::object();
        for (const auto& [id, phi] : p.objective_alignment) alignments[id] = phi;
        for (const auto& [id, n] : p.evaluator_count) counts[id] = n;
        out.push_back({{"rule_id", p.rule_id},
                       {"domain", p.domain},
                       {"objective_alignment", alignments},
                       {"evaluator_count", counts},
                       {"weight", p.weight}});
    }
    return out;
}

json signal_table_to_json(const SignalCorrelationTable& table) {
    json out = json::object();
    for (const auto& [signal, row] : table.cells) {
        json cells = json::object();
        for (const auto& [domain, cell] : row) {
            if (cell.r.has_value()) cells[domain] = *cell.r;
            else cells[domain] = {{"undefined", cell.note}};
        }
        out[signal] = cells;
    }
    return out;
}

}  // namespace coa::rules
