#include "coa/rbr.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include <json.hpp>

using json = nlohmann::json;

namespace coa::rbr {

void RbrConfig::check() const {
    if (concurrency < 1) throw ValidationError("concurrency cap must be >= 1");
    if (retry.max_attempts < 1) throw ValidationError("retry max_attempts must be >= 1");
}

double rbr_score(const std::map<std::string, AdherenceScore>& adherence,
                 const std::map<std::string, double>& weights, bool uniform_fallback) {
    if (weights.empty()) throw ValidationError("no applicable rules");
    std::string missing;
    for (const auto& [rule_id, w] : weights) {
        (void)w;
        if (adherence.find(rule_id) == adherence.end()) {
            if (!missing.empty()) missing += ", ";
            missing += rule_id;
        }
    }
    if (!missing.empty()) {
        throw ValidationError("missing adherence scores for rules: " + missing);
    }
    double weight_sum = 0.0;
    for (const auto& [rule_id, w] : weights) {
        (void)rule_id;
        weight_sum += w;
    }
    if (weight_sum <= 0.0) {
        if (!uniform_fallback) {
            throw DegenerateError("rule weights sum to " + std::to_string(weight_sum) +
                                  "; reward undefined without the uniform fallback");
        }
        double sum = 0.0;
        for (const auto& [rule_id, w] : weights) {
            (void)w;
            sum += adherence.at(rule_id).value;
        }
        return sum / static_cast<double>(weights.size());
    }
    double numerator = 0.0;
    for (const auto& [rule_id, w] : weights) {
        numerator += adherence.at(rule_id).value * w;
    }
    return numerator / weight_sum;
}

double ablated_rbr(const std::map<std::string, AdherenceScore>& adherence) {
    if (adherence.empty()) throw ValidationError("no adherence scores to average");
    double sum = 0.0;
    for (const auto& [rule_id, score] : adherence) {
        (void)rule_id;
        sum += score.value;
    }
    return sum / static_cast<double>(adherence.size());
}

AdherenceScore grade_adherence(Grader& grader, const std::string& prompt,
                               const std::string& response, const Rule& rule) {
    GraderRequest request;
    request.prompt = prompt;
    request.response = response;
    request.rule = rule;
    const GraderVerdict verdict = grader.grade(request);
    if (!verdict.likert.has_value()) {
        throw ProtocolError("grader flagged rule '" + rule.id +
                                "' not applicable outside grader-flagged mode",
                            verdict.rationale);
    }
    return adherence_from_likert(*verdict.likert);
}

BatchResult grade_batch(Grader& grader, const std::vector<GradedResponse>& responses,
                        const Registry& registry, const RbrConfig& config) {
    config.check();

    struct Task {
        std::size_t response_index;
        const Rule* rule;
    };
    struct Slot {
        std::optional<GraderVerdict> verdict;
        std::string error;
    };

    // Pre-resolve rulesets so task construction failures are per-item.
    BatchResult result;
    result.responses = responses;
    std::vector<const std::vector<Rule>*> rulesets(responses.size(), nullptr);
    std::vector<bool> item_failed(responses.size(), false);
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const auto& r = responses[i];
        if (r.domain.empty() || registry.find_domain(r.domain) == nullptr) {
            result.errors.push_back({r.id, "", "response has no registered domain (got '" +
                                                   r.domain + "')"});
            item_failed[i] = true;
            continue;
        }
        const auto* rules = registry.rules_for(r.domain);
        if (rules == nullptr || rules->empty()) {
            result.errors.push_back({r.id, "", "domain '" + r.domain + "' has no rules"});
            item_failed[i] = true;
            continue;
        }
        rulesets[i] = rules;
        for (const auto& rule : *rules) tasks.push_back({i, &rule});
    }

    // Each task writes only its own slot; output is schedule-independent.
    std::vector<Slot> slots(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1, std::memory_order_relaxed);
            if (t >= tasks.size()) return;
            const Task& task = tasks[t];
            GraderRequest request;
            request.prompt = responses[task.response_index].prompt;
            request.response = responses[task.response_index].response;
            request.rule = *task.rule;
            try {
                slots[t].verdict = grader.grade(request);
            } catch (const Error& e) {
                slots[t].error = e.what();
            }
        }
    };
    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(config.concurrency),
                              std::max<std::size_t>(tasks.size(), 1));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Aggregate per response, in input order.
    std::vector<std::map<std::string, AdherenceScore>> adherence(responses.size());
    std::vector<std::map<std::string, double>> weights(responses.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const Task& task = tasks[t];
        const std::size_t i = task.response_index;
        if (item_failed[i]) continue;
        const Slot& slot = slots[t];
        if (!slot.error.empty()) {
            result.errors.push_back({responses[i].id, task.rule->id, slot.error});
            item_failed[i] = true;
            continue;
        }
        if (!slot.verdict->likert.has_value()) {
            if (config.applicability == Applicability::kGraderFlagged) {
                continue;  // excluded from both sums
            }
            result.errors.push_back({responses[i].id, task.rule->id,
                                     "grader flagged the rule not applicable outside "
                                     "grader-flagged mode"});
            item_failed[i] = true;
            continue;
        }
        adherence[i][task.rule->id] = adherence_from_likert(*slot.verdict->likert);
        weights[i][task.rule->id] =
            config.weighting == Weighting::kUniform ? 1.0 : task.rule->weight;
    }

    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (item_failed[i]) {
            ++result.failed;
            continue;
        }
        auto& out = result.responses[i];
        out.adherence = adherence[i];
        if (adherence[i].empty()) {
            result.errors.push_back({out.id, "", "every rule was flagged not applicable"});
            ++result.failed;
            continue;
        }
        try {
            out.rbr = rbr_score(adherence[i], weights[i],
                                config.uniform_fallback_on_degenerate_weights);
            out.rbr_ablated = ablated_rbr(adherence[i]);
            ++result.succeeded;
        } catch (const Error& e) {
            out.rbr.reset();
            out.rbr_ablated.reset();
            result.errors.push_back({out.id, "", e.what()});
            ++result.failed;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// io
// ---------------------------------------------------------------------------

std::vector<GradedResponse> load_responses_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open responses file '" + path + "'");
    std::vector<GradedResponse> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        GradedResponse g;
        try {
            g.id = j.at("id").get<std::string>();
            g.prompt = j.at("prompt").get<std::string>();
            g.response = j.at("response").get<std::string>();
            g.domain = j.value("domain", "");
            if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
                g.ground_truth = j["ground_truth"].get<double>();
            }
        } catch (const json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(g));
    }
    return out;
}

namespace {

json graded_line(const GradedResponse& g) {
    json adherence = json::object();
    for (const auto& [rule_id, score] : g.adherence) {
        json s = {{"value", score.value}};
        if (score.likert.has_value()) s["likert"] = *score.likert;
        adherence[rule_id] = s;
    }
    json j = {{"id", g.id}, {"domain", g.domain}, {"adherence", adherence}};
    if (g.rbr.has_value()) j["rbr"] = *g.rbr;
    if (g.rbr_ablated.has_value()) j["rbr_ablated"] = *g.rbr_ablated;
    if (g.ground_truth.has_value()) j["ground_truth"] = *g.ground_truth;
    return j;
}

}  // namespace

void write_graded_jsonl(const BatchResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write graded file '" + path + "'");
    for (const auto& g : result.responses) {
        json j = graded_line(g);
        if (!g.rbr.has_value()) {
            // Attach the first matching error record for this id.
            for (const auto& e : result.errors) {
                if (e.id == g.id) {
                    j["error"] = e.rule_id.empty() ? e.message
                                                   : ("rule " + e.rule_id + ": " + e.message);
                    break;
                }
            }
        }
        out << j.dump() << "\n";
    }
}

std::vector<GradedResponse> load_graded_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open graded file '" + path + "'");
    std::vector<GradedResponse> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        GradedResponse g;
        try {
            g.id = j.at("id").get<std::string>();
            g.domain = j.value("domain", "");
            g.prompt = j.value("prompt", "");
            g.response = j.value("response", "");
            const json adherence = j.value("adherence", json::object());
            for (const auto& [rule_id, s] : adherence.items()) {
                AdherenceScore score;
                score.value = s.at("value").get<double>();
                if (score.value < -1.0 || score.value > 1.0) {
                    throw ValidationError(path + ":" + std::to_string(line_no) +
                                          ": adherence value outside [-1,1]");
                }
                if (s.contains("likert") && !s["likert"].is_null()) {
                    score.likert = s["likert"].get<int>();
                    if (score.value != likert_to_score(*score.likert)) {
                        throw ValidationError(path + ":" + std::to_string(line_no) +
                                              ": adherence value does not match its Likert grade");
                    }
                }
                g.adherence[rule_id] = score;
            }
            if (j.contains("rbr") && !j["rbr"].is_null()) g.rbr = j["rbr"].get<double>();
            if (j.contains("rbr_ablated") && !j["rbr_ablated"].is_null()) {
                g.rbr_ablated = j["rbr_ablated"].get<double>();
            }
            if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
                g.ground_truth = j["ground_truth"].get<double>();
            }
        } catch (const json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace coa::rbr
