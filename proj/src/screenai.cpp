#include "lprisma/screenai.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "httplib.h"
#include "lprisma/errors.hpp"
#include "lprisma/hash.hpp"
#include "lprisma/jsonutil.hpp"

namespace lprisma {

namespace {

std::string criteria_text(const EligibilityCriteria& criteria) {
    std::string out = "Inclusion criteria:\n";
    for (const auto& c : criteria.inclusion) out += "- " + c + "\n";
    out += "Exclusion criteria:\n";
    for (const auto& c : criteria.exclusion) out += "- " + c + "\n";
    if (criteria.notes) out += "Notes: " + *criteria.notes + "\n";
    return out;
}

std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigInvalid("endpoint missing scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string chat_cache_key(const LlmConfig& cfg, const std::string& prompt) {
    return sha256_hex(cfg.model_id + "\x1f" + prompt);
}

std::string call_chat_endpoint(const LlmConfig& cfg, const std::string& prompt) {
    if (cfg.cache_dir) {
        namespace fs = std::filesystem;
        fs::path p = fs::path(*cfg.cache_dir) / (chat_cache_key(cfg, prompt) + ".txt");
        if (fs::exists(p)) return read_file(p.string());
    }
    auto [base, path] = split_endpoint(cfg.endpoint);
    httplib::Client client(base);
    client.set_read_timeout(static_cast<time_t>(cfg.request_timeout), 0);
    httplib::Headers headers;
    if (const char* token = std::getenv("LPRISMA_LLM_TOKEN"))
        headers.emplace("Authorization", std::string("Bearer ") + token);
    nlohmann::json body = {
        {"model", cfg.model_id},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", cfg.temperature},
        {"max_tokens", cfg.max_tokens}};

    int backoff_ms = 500;
    for (int attempt = 1;; ++attempt) {
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) throw Timeout("no response from " + cfg.endpoint);
        if (res->status == 429) {
            if (attempt >= 5) throw RateLimited("rate limited after 5 attempts");
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
            continue;
        }
        if (res->status != 200) throw HttpError(res->status, res->body.substr(0, 200));
        auto j = nlohmann::json::parse(res->body, nullptr, false);
        std::string content;
        if (!j.is_discarded() && j.contains("choices") && !j["choices"].empty())
            content = j["choices"][0]["message"]["content"].get<std::string>();
        else
            content = res->body;
        if (cfg.cache_dir) {
            namespace fs = std::filesystem;
            fs::create_directories(*cfg.cache_dir);
            atomic_write(
                (fs::path(*cfg.cache_dir) / (chat_cache_key(cfg, prompt) + ".txt")).string(),
                content);
        }
        return content;
    }
}

}  // namespace

void EligibilityCriteria::validate() const {
    if (inclusion.empty()) throw ConfigInvalid("eligibility criteria need at least one inclusion");
}

nlohmann::json EligibilityCriteria::to_json() const {
    nlohmann::json j;
    j["inclusion"] = inclusion;
    j["exclusion"] = exclusion;
    j["notes"] = notes ? nlohmann::json(*notes) : nlohmann::json(nullptr);
    return j;
}

EligibilityCriteria EligibilityCriteria::from_json(const nlohmann::json& j) {
    EligibilityCriteria c;
    c.inclusion = j.at("inclusion").get<std::vector<std::string>>();
    if (j.contains("exclusion")) c.exclusion = j.at("exclusion").get<std::vector<std::string>>();
    if (j.contains("notes") && !j.at("notes").is_null())
        c.notes = j.at("notes").get<std::string>();
    c.validate();
    return c;
}

nlohmann::json LlmConfig::to_json() const {
    nlohmann::json j;
    j["endpoint"] = endpoint;
    j["model_id"] = model_id;
    j["temperature"] = temperature;
    j["max_tokens"] = max_tokens;
    j["request_timeout"] = request_timeout;
    return j;
}

LlmConfig LlmConfig::from_json(const nlohmann::json& j) {
    LlmConfig c;
    c.endpoint = j.value("endpoint", "");
    c.model_id = j.value("model_id", "");
    c.temperature = j.value("temperature", 0.0);
    c.max_tokens = j.value("max_tokens", std::size_t{1024});
    c.request_timeout = j.value("request_timeout", 60.0);
    if (j.contains("cache_dir") && !j.at("cache_dir").is_null())
        c.cache_dir = j.at("cache_dir").get<std::string>();
    c.dry_run = j.value("dry_run", false);
    if (c.temperature < 0.0) throw ConfigInvalid("temperature must be >= 0");
    return c;
}

std::string decision_name(Decision d) {
    switch (d) {
        case Decision::Include: return "include";
        case Decision::Exclude: return "exclude";
        case Decision::Uncertain: return "uncertain";
    }
    return "uncertain";
}

std::string moderation_name(Moderation m) {
    switch (m) {
        case Moderation::Pending: return "pending";
        case Moderation::Approved: return "approved";
        case Moderation::Rejected: return "rejected";
    }
    return "pending";
}

std::string template_text(const std::string& template_id) {
    static const std::string kReply =
        "\nReply with a single JSON object only, no other text:\n"
        "{\"decision\": \"include\" | \"exclude\" | \"uncertain\", "
        "\"rationale\": \"one or two sentences\", "
        "\"summary\": \"one-paragraph summary of the record\"}\n";
    if (template_id == "screening-v1")
        return "You are screening a bibliographic record for a systematic literature review.\n"
               "Assess the record against the eligibility criteria below.\n\n"
               "Title: {title}\nAbstract: {abstract}\n\n{criteria}" + kReply;
    if (template_id == "summary-v1")
        return "You are summarising a bibliographic record for a systematic literature review.\n"
               "Write the summary so it aligns with the eligibility criteria below.\n\n"
               "Title: {title}\nAbstract: {abstract}\n\n{criteria}" + kReply;
    throw UnknownTemplate("unknown prompt template: " + template_id);
}

PromptBundle render_prompt(const Record& record, const EligibilityCriteria& criteria,
                           const std::string& template_id) {
    criteria.validate();
    if (record.title.empty()) throw MalformedInput("record has no title");
    PromptBundle bundle;
    bundle.record_id = record.id;
    bundle.template_id = template_id;
    bundle.criteria_hash = sha256_hex(dump_canonical(criteria.to_json()));

    std::string rendered = template_text(template_id);
    auto replace_once = [&](const std::string& key, const std::string& value) {
        auto pos = rendered.find(key);
        if (pos != std::string::npos) rendered.replace(pos, key.size(), value);
    };
    replace_once("{title}", record.title);
    replace_once("{abstract}", record.abstract.value_or("(no abstract available)"));
    replace_once("{criteria}", criteria_text(criteria));
    bundle.rendered = std::move(rendered);
    return bundle;
}

ParsedVerdict parse_verdict(const std::string& raw) {
    ParsedVerdict out;
    // locate the first balanced JSON object, respecting strings and escapes
    std::size_t start = raw.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t end = std::string::npos;
        for (std::size_t i = start; i < raw.size(); ++i) {
            char ch = raw[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (ch == '\\')
                    escaped = true;
                else if (ch == '"')
                    in_string = false;
            } else if (ch == '"') {
                in_string = true;
            } else if (ch == '{') {
                ++depth;
            } else if (ch == '}') {
                if (--depth == 0) {
                    end = i;
                    break;
                }
            }
        }
        if (end == std::string::npos) break;
        auto j = nlohmann::json::parse(raw.substr(start, end - start + 1), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            start = raw.find('{', start + 1);
            continue;
        }
        std::string decision =
            j.contains("decision") && j["decision"].is_string() ? j["decision"].get<std::string>()
                                                                : "";
        if (decision == "include")
            out.decision = Decision::Include;
        else if (decision == "exclude")
            out.decision = Decision::Exclude;
        else
            out.decision = Decision::Uncertain;
        if (j.contains("rationale") && j["rationale"].is_string())
            out.rationale = j["rationale"].get<std::string>();
        if (j.contains("summary") && j["summary"].is_string())
            out.summary = j["summary"].get<std::string>();
        return out;
    }
    return out;  // no parsable object: uncertain, empty rationale
}

ScreeningVerdict screen_record(const LlmConfig& cfg, const PromptBundle& bundle) {
    ScreeningVerdict verdict;
    verdict.record_id = bundle.record_id;
    verdict.moderation = Moderation::Pending;
    if (cfg.dry_run) {
        verdict.decision = Decision::Uncertain;
        return verdict;
    }
    verdict.raw_response = call_chat_endpoint(cfg, bundle.rendered);
    ParsedVerdict parsed = parse_verdict(verdict.raw_response);
    verdict.decision = parsed.decision;
    verdict.rationale = parsed.rationale;
    verdict.summary = parsed.summary;
    return verdict;
}

ScreeningVerdict summarise_record(const LlmConfig& cfg, const Record& record,
                                  const EligibilityCriteria& criteria) {
    PromptBundle bundle = render_prompt(record, criteria, "summary-v1");
    return screen_record(cfg, bundle);
}

ScreeningVerdict moderate(ScreeningVerdict verdict, Moderation status,
                          const std::string& moderator) {
    if (status == Moderation::Approved && moderator.empty())
        throw ConfigInvalid("approval requires a moderator name");
    verdict.moderation = status;
    if (!moderator.empty()) verdict.moderator = moderator;
    return verdict;
}

nlohmann::json ScreeningVerdict::to_json() const {
    nlohmann::json j;
    j["record_id"] = record_id;
    j["decision"] = decision_name(decision);
    j["rationale"] = rationale;
    j["summary"] = summary ? nlohmann::json(*summary) : nlohmann::json(nullptr);
    j["raw_response"] = raw_response;
    j["moderation"] = moderation_name(moderation);
    j["moderator"] = moderator ? nlohmann::json(*moderator) : nlohmann::json(nullptr);
    return j;
}

std::string verdicts_to_jsonl(const std::vector<ScreeningVerdict>& verdicts) {
    std::string out;
    for (const auto& v : verdicts) {
        out += dump_canonical(v.to_json());
        out += '\n';
    }
    return out;
}

}  // namespace lprisma
