#include "lprisma/manifest.hpp"

#include <filesystem>

#include "lprisma/errors.hpp"
#include "lprisma/hash.hpp"
#include "lprisma/jsonutil.hpp"

namespace lprisma {

namespace {

nlohmann::json manifest_to_json(const RunManifest& m, bool with_self_hash) {
    nlohmann::json j;
    j["tool_version"] = m.tool_version;
    j["created_at"] = m.created_at;
    nlohmann::json queries = nlohmann::json::array();
    for (const auto& q : m.queries) queries.push_back(q.to_json());
    j["queries"] = queries;
    nlohmann::json intent;
    intent["text"] = m.intent.text;
    nlohmann::json refinements = nlohmann::json::array();
    for (const auto& [tool, prompt, text] : m.intent.refinement_log)
        refinements.push_back({{"tool_name", tool}, {"prompt", prompt}, {"resulting_text", text}});
    intent["refinement_log"] = refinements;
    j["intent"] = intent;
    j["provider"] = m.provider.to_json();
    j["gmm"] = m.gmm.to_json();
    j["rule"] = rule_to_json(m.rule);
    j["cutoffs"] = m.cutoffs.to_json();
    j["triage_counts"] = {{"n_excluded", m.triage_counts.n_excluded},
                          {"n_genai", m.triage_counts.n_genai},
                          {"n_human", m.triage_counts.n_human}};
    j["llm"] = m.llm ? m.llm->to_json() : nlohmann::json(nullptr);
    j["prompt_template_hashes"] = m.prompt_template_hashes;
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& [name, hash] : m.input_hashes) hashes[name] = hash;
    j["input_hashes"] = hashes;
    j["master_seed"] = m.master_seed;
    if (with_self_hash) j["self_hash"] = m.self_hash;
    return j;
}

std::string compute_self_hash(const RunManifest& m) {
    return sha256_hex(dump_canonical(manifest_to_json(m, false)));
}

}  // namespace

std::string RunManifest::serialize() const {
    RunManifest copy = *this;
    copy.self_hash = compute_self_hash(copy);
    return dump_canonical(manifest_to_json(copy, true)) + "\n";
}

RunManifest RunManifest::deserialize(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.created_at = j.at("created_at").get<std::string>();
    for (const auto& q : j.at("queries")) m.queries.push_back(QuerySpec::from_json(q));
    m.intent.text = j.at("intent").at("text").get<std::string>();
    for (const auto& r : j.at("intent").at("refinement_log"))
        m.intent.refinement_log.emplace_back(r.at("tool_name").get<std::string>(),
                                             r.at("prompt").get<std::string>(),
                                             r.at("resulting_text").get<std::string>());
    m.provider = ProviderConfig::from_json(j.at("provider"));
    m.gmm = GmmParams::from_json(j.at("gmm"));
    m.rule = rule_from_json(j.at("rule"));
    m.cutoffs = Cutoffs::from_json(j.at("cutoffs"));
    m.triage_counts.n_excluded = j.at("triage_counts").at("n_excluded").get<std::uint64_t>();
    m.triage_counts.n_genai = j.at("triage_counts").at("n_genai").get<std::uint64_t>();
    m.triage_counts.n_human = j.at("triage_counts").at("n_human").get<std::uint64_t>();
    if (!j.at("llm").is_null()) m.llm = LlmConfig::from_json(j.at("llm"));
    m.prompt_template_hashes = j.at("prompt_template_hashes").get<std::vector<std::string>>();
    for (const auto& [name, hash] : j.at("input_hashes").items())
        m.input_hashes[name] = hash.get<std::string>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.self_hash = j.at("self_hash").get<std::string>();
    return m;
}

RunManifest build_manifest(const ManifestInputs& inputs) {
    if (inputs.intent.text.empty()) throw MissingStage("intent statement");
    if (inputs.gmm.weights.empty()) throw MissingStage("fit");
    RunManifest m;
    m.tool_version = inputs.tool_version;
    m.created_at = inputs.created_at;
    m.queries = inputs.queries;
    m.intent = inputs.intent;
    m.provider = inputs.provider;
    m.gmm = inputs.gmm;
    m.rule = inputs.rule;
    m.cutoffs = inputs.cutoffs;
    m.triage_counts = inputs.triage_counts;
    m.llm = inputs.llm;
    m.prompt_template_hashes = inputs.prompt_template_hashes;
    m.master_seed = inputs.master_seed;
    for (const auto& [name, path] : inputs.input_files) {
        if (!std::filesystem::exists(path)) throw MissingStage("input file missing: " + name);
        m.input_hashes[name] = sha256_file_hex(path);
    }
    m.self_hash = compute_self_hash(m);
    return m;
}

bool VerificationReport::all_pass() const {
    for (const auto& e : entries)
        if (e.status != "pass") return false;
    return true;
}

VerificationReport verify_manifest(const std::string& manifest_path,
                                   const std::string& artifact_dir) {
    namespace fs = std::filesystem;
    VerificationReport report;
    std::string text;
    try {
        text = read_file(manifest_path);
    } catch (const Error&) {
        report.entries.push_back({"manifest", "absent"});
        return report;
    }
    RunManifest m;
    try {
        m = RunManifest::deserialize(text);
    } catch (const std::exception&) {
        report.entries.push_back({"manifest", "fail"});
        return report;
    }
    report.entries.push_back(
        {"self_hash", compute_self_hash(m) == m.self_hash ? "pass" : "fail"});
    for (const auto& [name, expected] : m.input_hashes) {
        fs::path p = fs::path(artifact_dir) / name;
        if (!fs::exists(p)) {
            report.entries.push_back({name, "absent"});
            continue;
        }
        report.entries.push_back(
            {name, sha256_file_hex(p.string()) == expected ? "pass" : "fail"});
    }
    return report;
}

}  // namespace lprisma
