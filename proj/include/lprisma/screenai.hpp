#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lprisma/records.hpp"

namespace lprisma {

struct EligibilityCriteria {
    std::vector<std::string> inclusion;
    std::vector<std::string> exclusion;
    std::optional<std::string> notes;

    void validate() const;  // inclusion must be non-empty
    nlohmann::json to_json() const;
    static EligibilityCriteria from_json(const nlohmann::json& j);
};

struct PromptBundle {
    std::string record_id;
    std::string template_id;
    std::string rendered;
    std::string criteria_hash;
};

struct LlmConfig {
    std::string endpoint;
    std::string model_id;
    double temperature = 0.0;
    std::size_t max_tokens = 1024;
    double request_timeout = 60.0;  // seconds
    std::optional<std::string> cache_dir;  // response cache keyed by (model_id, prompt hash)
    bool dry_run = false;

    nlohmann::json to_json() const;
    static LlmConfig from_json(const nlohmann::json& j);
};

enum class Decision { Include, Exclude, Uncertain };
enum class Moderation { Pending, Approved, Rejected };

std::string decision_name(Decision d);
std::string moderation_name(Moderation m);

struct ScreeningVerdict {
    std::string record_id;
    Decision decision = Decision::Uncertain;
    std::string rationale;
    std::optional<std::string> summary;
    std::string raw_response;
    Moderation moderation = Moderation::Pending;
    std::optional<std::string> moderator;

    nlohmann::json to_json() const;
};

// Raw template text with {title}/{abstract}/{criteria} placeholders.
// Throws UnknownTemplate for ids other than "screening-v1" / "summary-v1".
std::string template_text(const std::string& template_id);

// Template ids: "screening-v1" (verdict) and "summary-v1" (summarisation).
// Rendered text contains the record title and every criterion verbatim and
// instructs a JSON-only reply {"decision","rationale","summary"}.
PromptBundle render_prompt(const Record& record, const EligibilityCriteria& criteria,
                           const std::string& template_id);

// Total function: extracts the first balanced JSON object in the text.
// Unknown decision strings and parse failures map to Uncertain.
struct ParsedVerdict {
    Decision decision = Decision::Uncertain;
    std::string rationale;
    std::optional<std::string> summary;
};
ParsedVerdict parse_verdict(const std::string& raw);

// Calls the chat endpoint (or emits the bundle only, in dry-run mode). The
// raw response is always persisted in the verdict before parsing. Rate-limit
// responses are retried with exponential backoff, max 5 attempts.
ScreeningVerdict screen_record(const LlmConfig& cfg, const PromptBundle& bundle);

ScreeningVerdict summarise_record(const LlmConfig& cfg, const Record& record,
                                  const EligibilityCriteria& criteria);

// Explicit moderation action; approval requires a moderator name.
ScreeningVerdict moderate(ScreeningVerdict verdict, Moderation status,
                          const std::string& moderator);

std::string verdicts_to_jsonl(const std::vector<ScreeningVerdict>& verdicts);

}  // namespace lprisma
