#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "lprisma/embed.hpp"
#include "lprisma/mixture.hpp"

namespace lprisma {

enum class Bin { Excluded, GenAIReview, HumanReview };

std::string bin_name(Bin b);
Bin bin_from_name(const std::string& name);

struct Override {
    std::string record_id;
    Bin from_bin;
    Bin to_bin;
    std::string reason;
    std::string reviewer;
};

struct TriageCounts {
    std::uint64_t n_excluded = 0;
    std::uint64_t n_genai = 0;
    std::uint64_t n_human = 0;
};

struct TriageResult {
    std::map<std::string, Bin> assignments;  // record_id -> bin
    std::map<std::string, double> scores;    // record_id -> s (for reporting)
    Cutoffs cutoffs;
    TriageCounts counts;
    std::vector<Override> overrides;

    nlohmann::json to_json() const;
    static TriageResult from_json(const nlohmann::json& j);
};

// s < lower -> Excluded; lower <= s <= upper -> GenAIReview; s > upper ->
// HumanReview. Boundary values land in the middle bin.
Bin classify(double s, const Cutoffs& cutoffs);

TriageResult partition(const std::vector<SimilarityScore>& scores, const Cutoffs& cutoffs);

TriageResult override_bin(TriageResult result, const std::string& record_id, Bin to_bin,
                          const std::string& reason, const std::string& reviewer);

// Triage file: CSV "record_id,s,bin,overridden(bool)".
std::string triage_to_csv(const TriageResult& result);
// Override log: JSON lines.
std::string overrides_to_jsonl(const std::vector<Override>& overrides);

}  // namespace lprisma
