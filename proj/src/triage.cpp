#include "lprisma/triage.hpp"

#include <algorithm>

#include "lprisma/errors.hpp"
#include "lprisma/jsonutil.hpp"

namespace lprisma {

std::string bin_name(Bin b) {
    switch (b) {
        case Bin::Excluded: return "excluded";
        case Bin::GenAIReview: return "genai_review";
        case Bin::HumanReview: return "human_review";
    }
    return "excluded";
}

Bin bin_from_name(const std::string& name) {
    if (name == "excluded") return Bin::Excluded;
    if (name == "genai_review") return Bin::GenAIReview;
    if (name == "human_review") return Bin::HumanReview;
    throw ConfigInvalid("unknown bin: " + name);
}

Bin classify(double s, const Cutoffs& cutoffs) {
    if (s < cutoffs.lower) return Bin::Excluded;
    if (s > cutoffs.upper) return Bin::HumanReview;
    return Bin::GenAIReview;
}

namespace {

TriageCounts recount(const std::map<std::string, Bin>& assignments) {
    TriageCounts c;
    for (const auto& [id, bin] : assignments) {
        switch (bin) {
            case Bin::Excluded: ++c.n_excluded; break;
            case Bin::GenAIReview: ++c.n_genai; break;
            case Bin::HumanReview: ++c.n_human; break;
        }
    }
    return c;
}

}  // namespace

TriageResult partition(const std::vector<SimilarityScore>& scores, const Cutoffs& cutoffs) {
    if (scores.empty()) throw EmptyScores("partition: no scores");
    if (!(cutoffs.lower >= 0.0 && cutoffs.lower <= cutoffs.upper && cutoffs.upper <= 1.0))
        throw ConfigInvalid("invalid cutoffs");
    TriageResult result;
    result.cutoffs = cutoffs;
    for (const auto& sc : scores) {
        result.assignments[sc.record_id] = classify(sc.s, cutoffs);
        result.scores[sc.record_id] = sc.s;
    }
    result.counts = recount(result.assignments);
    return result;
}

TriageResult override_bin(TriageResult result, const std::string& record_id, Bin to_bin,
                          const std::string& reason, const std::string& reviewer) {
    auto it = result.assignments.find(record_id);
    if (it == result.assignments.end()) throw UnknownRecord("no such record: " + record_id);
    if (reason.empty()) throw EmptyReason("override reason must be non-empty");
    result.overrides.push_back({record_id, it->second, to_bin, reason, reviewer});
    it->second = to_bin;
    result.counts = recount(result.assignments);
    return result;
}

std::string triage_to_csv(const TriageResult& result) {
    std::string out = "record_id,s,bin,overridden\n";
    for (const auto& [id, bin] : result.assignments) {
        bool overridden = std::any_of(result.overrides.begin(), result.overrides.end(),
                                      [&](const Override& o) { return o.record_id == id; });
        out += id;
        out += ',';
        auto sit = result.scores.find(id);
        out += format_sig12(sit == result.scores.end() ? 0.0 : sit->second);
        out += ',';
        out += bin_name(bin);
        out += ',';
        out += overridden ? "true" : "false";
        out += '\n';
    }
    return out;
}

std::string overrides_to_jsonl(const std::vector<Override>& overrides) {
    std::string out;
    for (const auto& o : overrides) {
        nlohmann::json j = {{"record_id", o.record_id}, {"from_bin", bin_name(o.from_bin)},
                            {"to_bin", bin_name(o.to_bin)}, {"reason", o.reason},
                            {"reviewer", o.reviewer}};
        out += dump_canonical(j);
        out += '\n';
    }
    return out;
}

nlohmann::json TriageResult::to_json() const {
    nlohmann::json j;
    nlohmann::json assigns = nlohmann::json::object();
    for (const auto& [id, bin] : assignments) assigns[id] = bin_name(bin);
    j["assignments"] = assigns;
    nlohmann::json sc = nlohmann::json::object();
    for (const auto& [id, s] : scores) sc[id] = s;
    j["scores"] = sc;
    j["cutoffs"] = cutoffs.to_json();
    j["counts"] = {{"n_excluded", counts.n_excluded},
                   {"n_genai", counts.n_genai},
                   {"n_human", counts.n_human}};
    nlohmann::json ov = nlohmann::json::array();
    for (const auto& o : overrides)
        ov.push_back({{"record_id", o.record_id}, {"from_bin", bin_name(o.from_bin)},
                      {"to_bin", bin_name(o.to_bin)}, {"reason", o.reason},
                      {"reviewer", o.reviewer}});
    j["overrides"] = ov;
    return j;
}

TriageResult TriageResult::from_json(const nlohmann::json& j) {
    TriageResult r;
    for (const auto& [id, bin] : j.at("assignments").items())
        r.assignments[id] = bin_from_name(bin.get<std::string>());
    if (j.contains("scores"))
        for (const auto& [id, s] : j.at("scores").items()) r.scores[id] = s.get<double>();
    r.cutoffs = Cutoffs::from_json(j.at("cutoffs"));
    r.counts.n_excluded = j.at("counts").at("n_excluded").get<std::uint64_t>();
    r.counts.n_genai = j.at("counts").at("n_genai").get<std::uint64_t>();
    r.counts.n_human = j.at("counts").at("n_human").get<std::uint64_t>();
    for (const auto& o : j.at("overrides"))
        r.overrides.push_back({o.at("record_id").get<std::string>(),
                               bin_from_name(o.at("from_bin").get<std::string>()),
                               bin_from_name(o.at("to_bin").get<std::string>()),
                               o.at("reason").get<std::string>(),
                               o.at("reviewer").get<std::string>()});
    return r;
}

}  // namespace lprisma
