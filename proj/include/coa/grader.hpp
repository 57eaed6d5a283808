#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coa/core.hpp"
#include "coa/registry.hpp"

namespace coa::rbr {

inline constexpr const char* kGraderUrlEnv = "COA_GRADER_URL";
inline constexpr const char* kGraderApiKeyEnv = "COA_GRADER_API_KEY";
inline constexpr const char* kLikertTemplateId = "likert-v1";

// One grading request: how well does `response` to `prompt` adhere to
// `rule`? Exactly one request per (prompt, response, rule) triple.
struct GraderRequest {
    std::string prompt;
    std::string response;
    Rule rule;
    std::string template_id = kLikertTemplateId;
};

// likert absent means the grader flagged the rule as not applicable.
struct GraderVerdict {
    std::optional<int> likert;  // 1..5 when present
    std::string rationale;
    std::string grader_id;
    std::chrono::microseconds latency{0};
};

class Grader {
public:
    virtual ~Grader() = default;
    virtual GraderVerdict grade(const GraderRequest& request) = 0;
    virtual std::string id() const = 0;
};

// Deterministic offline grader: a content-addressed script mapping exact
// (prompt, response, rule) triples to Likert grades, with an optional fixed
// or content-hash fallback. Thread-safe once scripting is done.
class MockGrader : public Grader {
public:
    MockGrader() = default;
    MockGrader(MockGrader&& other) noexcept
        : script_(std::move(other.script_)),
          default_likert_(other.default_likert_),
          hash_fallback_(other.hash_fallback_),
          calls_(other.calls_.load()) {}

    // likert == nullopt scripts a "not applicable" verdict.
    void script(const std::string& prompt, const std::string& response,
                const std::string& rule_id, std::optional<int> likert);

    void set_default(std::optional<int> likert);
    void set_hash_fallback(bool enabled);

    // Script file schema:
    //   {"default": 3 | "hash" | null,
    //    "entries": [{"prompt": ..., "response": ..., "rule": ..., "likert": 1..5 | null}]}
    static MockGrader from_json_file(const std::string& path);

    GraderVerdict grade(const GraderRequest& request) override;
    std::string id() const override { return "mock"; }

    std::size_t call_count() const { return calls_; }

private:
    static std::string key(const std::string& prompt, const std::string& response,
                           const std::string& rule_id);

    std::map<std::string, std::optional<int>> script_;
    std::optional<int> default_likert_;
    bool hash_fallback_ = false;
    std::atomic<std::size_t> calls_{0};
};

struct RetryPolicy {
    int max_attempts = 3;  // >= 1
    std::chrono::milliseconds initial_backoff{100};
    double backoff_factor = 2.0;
};

// Chat-completion-style HTTP grader. The prompt template asks for a single
// integer 1-5 on the first line (or NA), rationale after; parsing accepts
// surrounding whitespace only. Transport failures are retried per policy;
// verdict parse failures are not.
class RemoteGrader : public Grader {
public:
    struct Options {
        std::string url;  // e.g. http://host:port/v1/chat/completions
        std::string api_key;
        std::string model = "grader";
        RetryPolicy retry;
        std::chrono::seconds timeout{30};
    };

    // Reads COA_GRADER_URL / COA_GRADER_API_KEY; throws ValidationError if
    // either is missing.
    static Options options_from_env();

    explicit RemoteGrader(Options options);

    GraderVerdict grade(const GraderRequest& request) override;
    std::string id() const override;

    // Exposed for tests: first line -> likert (nullopt for NA), rest is the
    // rationale.
    static std::pair<std::optional<int>, std::string> parse_verdict_text(const std::string& text);
    static std::string render_system_prompt();
    static std::string render_user_prompt(const GraderRequest& request);

private:
    Options options_;
};

// Domain classification hook for untagged prompts.
class DomainClassifier {
public:
    virtual ~DomainClassifier() = default;
    // Returns a domain id, or nullopt when the prompt is unclassifiable.
    virtual std::optional<std::string> classify(const std::string& prompt) = 0;
    virtual std::string id() const = 0;
};

// Ordered substring table: the first matching entry wins.
class KeywordClassifier : public DomainClassifier {
public:
    void add(const std::string& substring, const std::string& domain);

    // Schema: [{"contains": "...", "domain": "MH1"}, ...]
    static KeywordClassifier from_json_file(const std::string& path);

    std::optional<std::string> classify(const std::string& prompt) override;
    std::string id() const override { return "keywords"; }

private:
    std::vector<std::pair<std::string, std::string>> table_;
};

// Asks the chat endpoint for a domain id on the first line of its reply.
class RemoteClassifier : public DomainClassifier {
public:
    RemoteClassifier(RemoteGrader::Options options, std::vector<std::string> domain_ids);

    std::optional<std::string> classify(const std::string& prompt) override;
    std::string id() const override { return "remote"; }

private:
    RemoteGrader::Options options_;
    std::vector<std::string> domain_ids_;
};

/// Resolves a record's domain: an explicit tag wins, otherwise the
/// classifier is consulted. The result must be registered. Throws
/// ValidationError with "domain required" when neither path resolves.
std::string classify_domain(const std::optional<std::string>& explicit_tag,
                            const std::string& prompt, const Registry& registry,
                            DomainClassifier* classifier);

}  // namespace coa::rbr
