// coa: chain-of-alignment measurement pipeline.
//
// Subcommands: bridge, ratify, rules, rbr, eval, simulate, validate.
// Exit codes: 0 success, 2 input/config error, 3 total-stage failure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coa/consensus.hpp"
#include "coa/core.hpp"
#include "coa/csv.hpp"
#include "coa/grader.hpp"
#include "coa/manifest.hpp"
#include "coa/metrics.hpp"
#include "coa/rbr.hpp"
#include "coa/registry.hpp"
#include "coa/report.hpp"
#include "coa/rules.hpp"
#include "coa/sim.hpp"
#include "coa/toml.hpp"
#include "coa/version.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitStageFailure = 3;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw coa::ValidationError("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path ensure_out_dir(const std::string& out) {
    if (out.empty()) throw coa::ValidationError("--out directory is required");
    fs::create_directories(out);
    return out;
}

void emit_manifest(const std::string& command, const json& config,
                   const std::vector<std::string>& inputs, const fs::path& out_dir,
                   const std::string& status) {
    coa::RunManifest manifest = coa::make_manifest(command, config, inputs);
    manifest.stages[command] = status;
    coa::write_manifest(manifest, out_dir.string());
}

// Adds a single all-participants segmentation when none was provided, so the
// max-min reduces to overall agreement. The synthetic segment bypasses the
// size floor.
bool ensure_segmentation(coa::consensus::VoteMatrix& matrix, std::vector<std::string>& warnings) {
    if (!matrix.segmentations.empty()) return false;
    for (const auto& p : matrix.participants) matrix.segmentations["all"][p] = "all";
    warnings.push_back("no segments provided; using a single all-participants segment");
    return true;
}

coa::consensus::ImputeStrategy impute_from_string(const std::string& s) {
    if (s == "statement_mean") return coa::consensus::ImputeStrategy::kStatementMean;
    if (s == "segment_mean") return coa::consensus::ImputeStrategy::kSegmentMean;
    throw coa::ValidationError("unknown imputation strategy '" + s + "'");
}

// ---------------------------------------------------------------------------
// bridge
// ---------------------------------------------------------------------------

struct BridgeArgs {
    std::string votes;
    std::string segments;
    double threshold = 0.5;
    int min_segment_size = coa::consensus::kDefaultMinSegmentSize;
    std::string impute = "statement_mean";
    std::string out;
};

int cmd_bridge(const BridgeArgs& args) {
    using namespace coa::consensus;
    const fs::path out_dir = ensure_out_dir(args.out);

    VoteMatrix matrix = load_votes_csv(args.votes);
    std::vector<std::string> inputs{args.votes};
    if (!args.segments.empty()) {
        load_segments_csv(matrix, args.segments);
        inputs.push_back(args.segments);
    }
    std::vector<std::string> warnings;
    const bool synthetic = ensure_segmentation(matrix, warnings);
    matrix.check_invariants();

    const VoteMatrix imputed = impute_votes(matrix, impute_from_string(args.impute));
    BridgingReport report = maxmin_bridging(imputed, synthetic ? 1 : args.min_segment_size);
    report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
    const std::vector<std::string> filtered = filter_bridging(report, args.threshold);

    write_json(out_dir / "bridging.json", bridging_report_to_json(report));
    write_json(out_dir / "filtered_statements.json", json(filtered));
    if (!report.warnings.empty()) {
        write_json(out_dir / "warnings.json", json(report.warnings));
        for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    }

    const json config = {{"threshold", args.threshold},
                         {"min_segment_size", args.min_segment_size},
                         {"impute", args.impute}};
    emit_manifest("bridge", config, inputs, out_dir, "ok");
    std::cout << "bridge: " << filtered.size() << " of " << report.statements.size()
              << " statements at alpha >= " << args.threshold << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// ratify
// ---------------------------------------------------------------------------

struct RatifyArgs {
    std::string votes;
    std::string segments;
    std::string rankings;
    std::string registry;
    std::string domain;
    std::string out_registry;
    double overall_threshold = 0.75;
    double bridging_threshold = 0.66;
    int min_segment_size = coa::consensus::kDefaultMinSegmentSize;
    std::string impute = "statement_mean";
    bool group_by_kind = false;
    std::string out;
};

int cmd_ratify(const RatifyArgs& args) {
    using namespace coa::consensus;
    const fs::path out_dir = ensure_out_dir(args.out);

    VoteMatrix matrix = load_votes_csv(args.votes);
    std::vector<std::string> inputs{args.votes, args.rankings};
    if (!args.segments.empty()) {
        load_segments_csv(matrix, args.segments);
        inputs.push_back(args.segments);
    }
    std::vector<std::string> warnings;
    const bool synthetic = ensure_segmentation(matrix, warnings);
    matrix.check_invariants();

    std::optional<coa::Registry> registry;
    if (!args.registry.empty()) {
        registry = coa::load_registry(args.registry);
        inputs.push_back(args.registry);
        if (args.domain.empty()) {
            throw coa::ValidationError("--domain is required when --registry is given");
        }
        if (registry->find_domain(args.domain) == nullptr) {
            throw coa::ValidationError("unknown domain '" + args.domain + "'");
        }
    }

    const VoteMatrix imputed = impute_votes(matrix, impute_from_string(args.impute));
    BridgingReport bridging = maxmin_bridging(imputed, synthetic ? 1 : args.min_segment_size);
    warnings.insert(warnings.end(), bridging.warnings.begin(), bridging.warnings.end());

    const RankingBallots ballots = load_rankings_csv(args.rankings);

    // Preference scores: one ranking universe, or per-kind groups when the
    // registry provides kinds.
    std::map<std::string, double> preference;
    if (args.group_by_kind) {
        if (!registry.has_value()) {
            throw coa::ValidationError("--group-rankings-by-kind requires --registry");
        }
        std::map<coa::ObjectiveKind, std::vector<std::string>> by_kind;
        for (const auto& item : ballots.items) {
            const coa::Objective* obj = registry->find_objective(args.domain, item);
            if (obj == nullptr) {
                throw coa::ValidationError("ranked item '" + item + "' is not an objective of '" +
                                           args.domain + "'");
            }
            by_kind[obj->kind].push_back(item);
        }
        for (const auto& [kind, items] : by_kind) {
            (void)kind;
            RankingBallots group;
            group.items = items;
            group.participants = ballots.participants;
            for (const auto& ballot : ballots.ballots) {
                std::vector<std::string> restricted;
                for (const auto& item : ballot) {
                    if (std::find(items.begin(), items.end(), item) != items.end()) {
                        restricted.push_back(item);
                    }
                }
                group.ballots.push_back(std::move(restricted));
            }
            for (const auto& [item, score] : borda_scores(group)) preference[item] = score;
        }
    } else {
        preference = borda_scores(ballots);
    }

    // Assemble objectives: support from votes, bridging from the max-min
    // report, preference from rankings.
    std::vector<coa::Objective> objectives;
    for (std::size_t s = 0; s < imputed.statements.size(); ++s) {
        const std::string& id = imputed.statements[s];
        coa::Objective obj;
        obj.id = id;
        if (registry.has_value()) {
            const coa::Objective* known = registry->find_objective(args.domain, id);
            if (known == nullptr) {
                throw coa::ValidationError("voted objective '" + id +
                                           "' is not registered in domain '" + args.domain + "'");
            }
            obj.kind = known->kind;
            obj.text = known->text;
        }
        double sum = 0.0;
        for (std::size_t p = 0; p < imputed.participants.size(); ++p) sum += *imputed.at(p, s);
        obj.support_overall = sum / static_cast<double>(imputed.participants.size());
        obj.support_bridging = bridging.statements[s].alpha;
        const auto pref = preference.find(id);
        if (pref == preference.end()) {
            throw coa::ValidationError("objective '" + id + "' does not appear in the rankings");
        }
        obj.preference = pref->second;
        objectives.push_back(std::move(obj));
    }

    const RatificationResult result = ratify(objectives, args.overall_threshold,
                                             args.bridging_threshold);

    json ratified = json::array();
    for (const auto& o : result.ratified) {
        json entry = {{"id", o.id},
                      {"support_overall", o.support_overall},
                      {"support_bridging", o.support_bridging},
                      {"preference", o.preference}};
        if (registry.has_value()) {
            entry["kind"] = coa::to_string(o.kind);
            entry["text"] = o.text;
        }
        ratified.push_back(entry);
    }
    json rejected = json::array();
    for (const auto& [id, reason] : result.rejected) {
        rejected.push_back({{"id", id}, {"reason", to_string(reason)}});
    }
    json objective_set = {{"ratified", ratified}, {"rejected", rejected}};
    if (!args.domain.empty()) objective_set["domain"] = args.domain;
    if (!warnings.empty()) {
        objective_set["warnings"] = warnings;
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    }
    write_json(out_dir / "objectives.json", objective_set);

    if (!args.out_registry.empty()) {
        if (!registry.has_value()) {
            throw coa::ValidationError("--out-registry requires --registry");
        }
        coa::Registry updated = *registry;
        for (auto& obj : updated.objectives[args.domain]) {
            for (const auto& scored : objectives) {
                if (scored.id == obj.id) {
                    obj.support_overall = scored.support_overall;
                    obj.support_bridging = scored.support_bridging;
                    obj.preference = scored.preference;
                }
            }
        }
        coa::save_registry(updated, args.out_registry);
    }

    const json config = {{"overall_threshold", args.overall_threshold},
                         {"bridging_threshold", args.bridging_threshold},
                         {"min_segment_size", args.min_segment_size},
                         {"impute", args.impute},
                         {"group_by_kind", args.group_by_kind},
                         {"domain", args.domain}};
    emit_manifest("ratify", config, inputs, out_dir, "ok");
    std::cout << "ratify: " << result.ratified.size() << " ratified, " << result.rejected.size()
              << " rejected\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// rules
// ---------------------------------------------------------------------------

struct RulesArgs {
    std::string evals;
    std::string signals;
    std::string registry;
    std::string out;
};

int cmd_rules(const RulesArgs& args) {
    if (args.registry.empty()) throw coa::ValidationError("--registry is required");
    const fs::path out_dir = ensure_out_dir(args.out);
    const coa::Registry registry = coa::load_registry(args.registry);
    const auto violations = coa::validate_registry(registry);
    if (!violations.empty()) {
        std::string message = "registry invalid:";
        for (const auto& v : violations) message += "\n  " + v.where + ": " + v.message;
        throw coa::ValidationError(message);
    }

    std::vector<coa::rules::ExpertRuleEvaluation> evals =
        coa::rules::load_evaluations_csv(args.evals);
    std::vector<std::string> inputs{args.evals, args.registry};
    std::vector<std::string> warnings;
    if (!args.signals.empty()) {
        coa::rules::load_signals_csv(evals, args.signals, &warnings);
        inputs.push_back(args.signals);
    }

    const auto profiles = coa::rules::aggregate_profiles(evals, registry);
    for (const auto& p : profiles) {
        int max_count = 0;
        for (const auto& [id, n] : p.evaluator_count) max_count = std::max(max_count, n);
        if (max_count <= 1) {
            warnings.push_back("rule '" + p.rule_id + "' was evaluated by a single expert; " +
                               "low-confidence alignment");
        }
    }

    json out = {{"profiles", coa::rules::profiles_to_json(profiles)}, {"warnings", warnings}};
    if (!args.signals.empty()) {
        json signal_rows = json::array();
        for (const auto& s : coa::rules::aggregate_signals(evals, registry)) {
            signal_rows.push_back({{"rule_id", s.rule_id},
                                   {"domain", s.domain},
                                   {"support_rate", s.support_rate},
                                   {"importance_mean", s.importance_mean},
                                   {"weight", s.weight}});
        }
        out["signals"] = signal_rows;
    }
    write_json(out_dir / "profiles.json", out);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

    // New registry with the evaluated weights; inputs are never mutated.
    coa::Registry updated = registry;
    for (const auto& p : profiles) {
        for (auto& rule : updated.rules[p.domain]) {
            if (rule.id == p.rule_id) {
                rule.objective_alignments = p.objective_alignment;
                rule.weight = p.weight;
            }
        }
    }
    coa::save_registry(updated, (out_dir / "registry_weighted.json").string());

    const json config = {{"signals", !args.signals.empty()}};
    emit_manifest("rules", config, inputs, out_dir, "ok");
    std::cout << "rules: " << profiles.size() << " rule profiles\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// rbr
// ---------------------------------------------------------------------------

struct RbrArgs {
    std::string responses;
    std::string registry;
    std::string mock_script;
    bool remote = false;
    std::string classifier;
    std::string weighting = "objective_alignment";
    std::string applicability = "all";
    int concurrency = 1;
    int retry_attempts = 3;
    long retry_backoff_ms = 100;
    bool uniform_fallback = false;
    std::string out;
};

int cmd_rbr(const RbrArgs& args) {
    using namespace coa::rbr;
    if (args.registry.empty()) throw coa::ValidationError("--registry is required");
    const fs::path out_dir = ensure_out_dir(args.out);

    // Exactly one grader backend.
    if (args.mock_script.empty() == !args.remote) {
        throw coa::ValidationError("select exactly one grader backend: --mock-script or --remote");
    }

    RbrConfig config;
    config.concurrency = args.concurrency;
    config.retry.max_attempts = args.retry_attempts;
    config.retry.initial_backoff = std::chrono::milliseconds(args.retry_backoff_ms);
    config.uniform_fallback_on_degenerate_weights = args.uniform_fallback;
    if (args.weighting == "objective_alignment") config.weighting = Weighting::kObjectiveAlignment;
    else if (args.weighting == "uniform") config.weighting = Weighting::kUniform;
    else throw coa::ValidationError("unknown weighting '" + args.weighting + "'");
    if (args.applicability == "all") config.applicability = Applicability::kAllDomainRules;
    else if (args.applicability == "grader_flagged") config.applicability = Applicability::kGraderFlagged;
    else throw coa::ValidationError("unknown applicability '" + args.applicability + "'");
    config.check();

    const coa::Registry registry = coa::load_registry(args.registry);
    std::vector<coa::GradedResponse> responses = load_responses_jsonl(args.responses);
    std::vector<std::string> inputs{args.responses, args.registry};

    // Backend construction validates configuration before any network call.
    std::unique_ptr<Grader> grader;
    if (!args.mock_script.empty()) {
        grader = std::make_unique<MockGrader>(MockGrader::from_json_file(args.mock_script));
        inputs.push_back(args.mock_script);
    } else {
        RemoteGrader::Options options = RemoteGrader::options_from_env();
        options.retry = config.retry;
        grader = std::make_unique<RemoteGrader>(std::move(options));
    }

    std::unique_ptr<DomainClassifier> classifier;
    if (!args.classifier.empty()) {
        classifier =
            std::make_unique<KeywordClassifier>(KeywordClassifier::from_json_file(args.classifier));
        inputs.push_back(args.classifier);
    }

    // Resolve domains up front; per-item failures stay isolated.
    BatchResult merged;
    merged.responses = responses;
    std::vector<std::size_t> to_grade;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        auto& r = merged.responses[i];
        try {
            const std::optional<std::string> tag =
                r.domain.empty() ? std::nullopt : std::make_optional(r.domain);
            r.domain = classify_domain(tag, r.prompt, registry, classifier.get());
            to_grade.push_back(i);
        } catch (const coa::Error& e) {
            merged.errors.push_back({r.id, "", e.what()});
            ++merged.failed;
        }
    }

    std::vector<coa::GradedResponse> batch_input;
    for (std::size_t i : to_grade) batch_input.push_back(merged.responses[i]);
    const BatchResult batch = grade_batch(*grader, batch_input, registry, config);
    for (std::size_t k = 0; k < to_grade.size(); ++k) {
        merged.responses[to_grade[k]] = batch.responses[k];
    }
    merged.errors.insert(merged.errors.end(), batch.errors.begin(), batch.errors.end());
    merged.succeeded = batch.succeeded;
    merged.failed += batch.failed;

    write_graded_jsonl(merged, (out_dir / "graded.jsonl").string());
    json error_rows = json::array();
    for (const auto& e : merged.errors) {
        error_rows.push_back({{"id", e.id}, {"rule", e.rule_id}, {"message", e.message}});
    }
    const json summary = {{"total", merged.responses.size()},
                          {"succeeded", merged.succeeded},
                          {"failed", merged.failed},
                          {"errors", error_rows}};
    write_json(out_dir / "summary.json", summary);

    const json manifest_config = {{"weighting", args.weighting},
                                  {"applicability", args.applicability},
                                  {"concurrency", args.concurrency},
                                  {"uniform_fallback", args.uniform_fallback},
                                  {"backend", args.remote ? "remote" : "mock"}};
    const std::string status = "ok (" + std::to_string(merged.succeeded) + "/" +
                               std::to_string(merged.responses.size()) + " graded)";
    emit_manifest("rbr", manifest_config, inputs, out_dir, status);
    std::cout << "rbr: " << merged.succeeded << "/" << merged.responses.size() << " graded\n";

    if (!merged.responses.empty() && merged.succeeded == 0) return kExitStageFailure;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string graded;
    std::string registry;
    std::string evals;
    std::string signals;
    double threshold = 0.0;
    std::size_t min_truth = 3;
    std::string out;
};

int cmd_eval(const EvalArgs& args) {
    if (args.registry.empty()) throw coa::ValidationError("--registry is required");
    const fs::path out_dir = ensure_out_dir(args.out);
    const coa::Registry registry = coa::load_registry(args.registry);
    const std::vector<coa::GradedResponse> graded = coa::rbr::load_graded_jsonl(args.graded);
    std::vector<std::string> inputs{args.graded, args.registry};

    coa::metrics::ReportConfig config;
    config.binarize_threshold = args.threshold;
    config.min_ground_truth = args.min_truth;
    coa::metrics::AlignmentReport report = coa::metrics::alignment_report(graded, registry, config);

    // Attach the expert-signal correlation table when signals are provided.
    if (!args.evals.empty() && !args.signals.empty()) {
        std::vector<coa::rules::ExpertRuleEvaluation> evals =
            coa::rules::load_evaluations_csv(args.evals);
        coa::rules::load_signals_csv(evals, args.signals, &report.warnings);
        inputs.push_back(args.evals);
        inputs.push_back(args.signals);
        std::map<std::string, double> usefulness;
        for (const auto& [rule_id, cell] : report.per_rule_usefulness) {
            if (cell.value.has_value()) usefulness[rule_id] = *cell.value;
        }
        std::vector<coa::rules::RuleSignals> signals;
        for (const auto& s : coa::rules::aggregate_signals(evals, registry)) {
            if (usefulness.count(s.rule_id) > 0) signals.push_back(s);
        }
        try {
            report.signals = coa::rules::expert_signal_correlations(signals, usefulness);
        } catch (const coa::Error& e) {
            report.warnings.push_back(std::string("signal correlations skipped: ") + e.what());
        }
    }

    write_json(out_dir / "report.json", coa::metrics::report_to_json(report));
    write_text(out_dir / "metrics.csv", coa::metrics::report_to_csv(report));
    write_text(out_dir / "scatter.csv", coa::metrics::scatter_csv(graded));
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";

    const json manifest_config = {{"binarize_threshold", args.threshold},
                                  {"min_ground_truth", args.min_truth}};
    emit_manifest("eval", manifest_config, inputs, out_dir, "ok");

    const auto show = [](const coa::metrics::MetricCell& cell) {
        return cell.value.has_value() ? json(*cell.value).dump() : std::string("undefined");
    };
    std::cout << "eval: weighted r=" << show(report.weighted.pearson_r)
              << " auc=" << show(report.weighted.auc)
              << " | ablated r=" << show(report.ablated.pearson_r)
              << " auc=" << show(report.ablated.auc) << " (n=" << report.items_with_truth
              << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_simulate(const SimulateArgs& args) {
    using namespace coa::sim;
    const fs::path out_dir = ensure_out_dir(args.out);
    const coa::toml::Table table = coa::toml::parse_file(args.config);
    const SimConfig config = sim_config_from_toml(table);
    const std::vector<double> noise_levels = sweep_noise_levels(table);

    std::ostringstream csv;
    csv << "quantity,param,value\n";
    const auto number = [](double v) { return json(v).dump(); };
    json summary;
    summary["seed"] = args.seed;
    summary["welfare"] = to_string(config.welfare);

    // Conflation-gap sweep over the configured noise levels.
    const SweepResult sweep = noise_sweep(config, args.seed, noise_levels);
    json sweep_rows = json::array();
    for (std::size_t i = 0; i < sweep.noise_levels.size(); ++i) {
        const double level = sweep.noise_levels[i];
        const ConflationGap& gap = sweep.gaps[i];
        csv << "action_disagreement," << number(level) << ","
            << number(gap.mean_action_disagreement) << "\n";
        csv << "objective_disagreement," << number(level) << ","
            << number(gap.mean_objective_disagreement) << "\n";
        sweep_rows.push_back({{"noise", level},
                              {"action_disagreement", gap.mean_action_disagreement},
                              {"objective_disagreement", gap.mean_objective_disagreement}});
    }
    summary["sweep"] = sweep_rows;

    // Chain-vs-conflated equivalence on the base world.
    const SimWorld world = sample_world(config, args.seed);
    if (config.objectives > 0) {
        const double gap = max_chain_conflated_gap(world, config.welfare);
        csv << "chain_conflated_max_abs_gap," << number(config.noise) << "," << number(gap)
            << "\n";
        const bool applicable = config.noise == 0.0 && config.span_wills;
        summary["equivalence"] = {{"max_abs_gap", gap},
                                  {"noiseless_spanning", applicable},
                                  {"pass", !applicable || gap < 1e-6}};
    }

    // Rule-weight recovery table on linear worlds.
    if (config.rules > 0 && config.rules_linear) {
        json fits = json::array();
        for (int j = 0; j < config.objectives; ++j) {
            const ObjectiveFit fit = fit_objective_weights(world, j);
            for (int r = 0; r < config.rules; ++r) {
                const RuleFit& rf = fit.per_rule[static_cast<std::size_t>(r)];
                const std::string param = "r" + std::to_string(r) + ":o" + std::to_string(j);
                const double truth = world.true_rule_weight[j * config.rules + r];
                csv << "fit_slope," << param << "," << number(rf.slope) << "\n";
                csv << "fit_true_slope," << param << "," << number(truth) << "\n";
                csv << "fit_std_error," << param << "," << number(rf.std_error) << "\n";
                csv << "fit_residual_variance," << param << "," << number(rf.residual_variance)
                    << "\n";
                fits.push_back({{"rule", r},
                                {"objective", j},
                                {"slope", rf.slope},
                                {"true_slope", truth},
                                {"std_error", rf.std_error},
                                {"residual_variance", rf.residual_variance},
                                {"within_3_se", std::fabs(rf.slope - truth) <= 3.0 * rf.std_error}});
            }
        }
        summary["rule_fits"] = fits;
    }

    write_text(out_dir / "results.csv", csv.str());
    write_json(out_dir / "summary.json", summary);

    const json manifest_config = {{"seed", args.seed}};
    emit_manifest("simulate", manifest_config, {args.config}, out_dir, "ok");
    std::cout << "simulate: " << noise_levels.size() << " noise levels, "
              << config.actions << " actions\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidateArgs {
    std::string registry;
    std::string out;
};

int cmd_validate(const ValidateArgs& args) {
    if (args.registry.empty()) throw coa::ValidationError("--registry is required");
    const coa::Registry registry = coa::load_registry(args.registry);
    const auto violations = coa::validate_registry(registry);
    json rows = json::array();
    for (const auto& v : violations) {
        rows.push_back({{"where", v.where}, {"message", v.message}});
        std::cerr << v.where << ": " << v.message << "\n";
    }
    if (!args.out.empty()) {
        const fs::path out_dir = ensure_out_dir(args.out);
        write_json(out_dir / "validation.json",
                   {{"violations", rows}, {"valid", violations.empty()}});
        emit_manifest("validate", json::object(), {args.registry}, out_dir,
                      violations.empty() ? "ok" : "invalid");
    }
    if (!violations.empty()) {
        std::cerr << "registry invalid: " << violations.size() << " violation(s)\n";
        return kExitInputError;
    }
    std::cout << "registry valid: " << registry.domains.size() << " domain(s)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chain-of-alignment measurement pipeline"};
    app.set_version_flag("--version", coa::kToolkitVersion);
    app.set_config("--config", "", "read option defaults from a TOML/INI file");
    app.require_subcommand(1);

    // Globals double as defaults for the matching subcommand options.
    std::string g_registry, g_out;
    std::uint64_t g_seed = 0;
    app.add_option("--registry", g_registry, "default domain registry JSON");
    app.add_option("--out", g_out, "default output directory");
    auto* g_seed_opt = app.add_option("--seed", g_seed, "default random seed");

    BridgeArgs bridge;
    auto* bridge_cmd = app.add_subcommand("bridge", "max-min bridging agreement over votes");
    bridge_cmd->add_option("--votes", bridge.votes, "votes CSV")->required();
    bridge_cmd->add_option("--segments", bridge.segments, "segments CSV");
    bridge_cmd->add_option("--threshold", bridge.threshold, "bridging filter threshold");
    bridge_cmd->add_option("--min-segment-size", bridge.min_segment_size, "segment size floor");
    bridge_cmd->add_option("--impute", bridge.impute, "statement_mean or segment_mean");
    bridge_cmd->add_option("--out", bridge.out, "output directory");

    RatifyArgs ratify;
    auto* ratify_cmd = app.add_subcommand("ratify", "support, bridging, and preference scores");
    ratify_cmd->add_option("--votes", ratify.votes, "support votes CSV")->required();
    ratify_cmd->add_option("--segments", ratify.segments, "segments CSV");
    ratify_cmd->add_option("--rankings", ratify.rankings, "rankings CSV")->required();
    ratify_cmd->add_option("--registry", ratify.registry, "domain registry JSON");
    ratify_cmd->add_option("--domain", ratify.domain, "domain id for the objectives");
    ratify_cmd->add_option("--out-registry", ratify.out_registry,
                           "write a registry with updated objective scores");
    ratify_cmd->add_option("--overall-threshold", ratify.overall_threshold, "overall support floor");
    ratify_cmd->add_option("--bridging-threshold", ratify.bridging_threshold,
                           "bridging support floor");
    ratify_cmd->add_option("--min-segment-size", ratify.min_segment_size, "segment size floor");
    ratify_cmd->add_option("--impute", ratify.impute, "statement_mean or segment_mean");
    ratify_cmd->add_flag("--group-rankings-by-kind", ratify.group_by_kind,
                         "Borda scores within each objective kind");
    ratify_cmd->add_option("--out", ratify.out, "output directory");

    RulesArgs rules;
    auto* rules_cmd = app.add_subcommand("rules", "aggregate expert rule evaluations");
    rules_cmd->add_option("--evals", rules.evals, "expert evaluations CSV")->required();
    rules_cmd->add_option("--signals", rules.signals, "support/importance signals CSV");
    rules_cmd->add_option("--registry", rules.registry, "domain registry JSON");
    rules_cmd->add_option("--out", rules.out, "output directory");

    RbrArgs rbr;
    auto* rbr_cmd = app.add_subcommand("rbr", "grade responses and compute rule-based rewards");
    rbr_cmd->add_option("--responses", rbr.responses, "responses JSON-lines")->required();
    rbr_cmd->add_option("--registry", rbr.registry, "domain registry JSON");
    rbr_cmd->add_option("--mock-script", rbr.mock_script, "mock grader script JSON");
    rbr_cmd->add_flag("--remote", rbr.remote, "use the remote grader endpoint");
    rbr_cmd->add_option("--classifier", rbr.classifier, "keyword classifier JSON");
    rbr_cmd->add_option("--weighting", rbr.weighting, "objective_alignment or uniform");
    rbr_cmd->add_option("--applicability", rbr.applicability, "all or grader_flagged");
    rbr_cmd->add_option("--concurrency", rbr.concurrency, "parallel grading cap");
    rbr_cmd->add_option("--retry-attempts", rbr.retry_attempts, "remote grader attempts");
    rbr_cmd->add_option("--retry-backoff-ms", rbr.retry_backoff_ms,
                        "initial backoff between attempts");
    rbr_cmd->add_flag("--uniform-fallback", rbr.uniform_fallback,
                      "fall back to uniform weights when the weight sum is <= 0");
    rbr_cmd->add_option("--out", rbr.out, "output directory");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "alignment metrics against expert ground truth");
    eval_cmd->add_option("--graded", eval.graded, "graded JSON-lines")->required();
    eval_cmd->add_option("--registry", eval.registry, "domain registry JSON");
    eval_cmd->add_option("--evals", eval.evals, "expert evaluations CSV (for signal table)");
    eval_cmd->add_option("--signals", eval.signals, "signals CSV (for signal table)");
    eval_cmd->add_option("--threshold", eval.threshold, "ground-truth binarization threshold");
    eval_cmd->add_option("--min-truth", eval.min_truth, "minimum items with ground truth");
    eval_cmd->add_option("--out", eval.out, "output directory");

    SimulateArgs simulate;
    auto* sim_cmd = app.add_subcommand("simulate", "synthetic-world theory checks");
    sim_cmd->add_option("--config", simulate.config, "simulation TOML config")->required();
    auto* sim_seed_opt = sim_cmd->add_option("--seed", simulate.seed, "random seed");
    sim_cmd->add_option("--out", simulate.out, "output directory");

    ValidateArgs validate;
    auto* validate_cmd = app.add_subcommand("validate", "check a domain registry");
    validate_cmd->add_option("--registry", validate.registry, "domain registry JSON");
    validate_cmd->add_option("--out", validate.out, "optional output directory");

    CLI11_PARSE(app, argc, argv);

    // Apply global fallbacks where the subcommand omitted the option.
    const auto fall_back = [](std::string& local, const std::string& global) {
        if (local.empty()) local = global;
    };
    fall_back(bridge.out, g_out);
    fall_back(ratify.out, g_out);
    fall_back(rules.out, g_out);
    fall_back(rbr.out, g_out);
    fall_back(eval.out, g_out);
    fall_back(simulate.out, g_out);
    fall_back(ratify.registry, g_registry);
    fall_back(rules.registry, g_registry);
    fall_back(rbr.registry, g_registry);
    fall_back(eval.registry, g_registry);
    fall_back(validate.registry, g_registry);
    if (sim_seed_opt->count() == 0 && g_seed_opt->count() > 0) simulate.seed = g_seed;

    try {
        if (bridge_cmd->parsed()) return cmd_bridge(bridge);
        if (ratify_cmd->parsed()) return cmd_ratify(ratify);
        if (rules_cmd->parsed()) return cmd_rules(rules);
        if (rbr_cmd->parsed()) return cmd_rbr(rbr);
        if (eval_cmd->parsed()) return cmd_eval(eval);
        if (sim_cmd->parsed()) return cmd_simulate(simulate);
        if (validate_cmd->parsed()) return cmd_validate(validate);
    } catch (const coa::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const coa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStageFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitOk;
}
