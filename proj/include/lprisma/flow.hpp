#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "lprisma/mixture.hpp"
#include "lprisma/records.hpp"
#include "lprisma/triage.hpp"

namespace lprisma {

struct IdentificationEntry {
    std::string database;
    std::string scope_label;
    std::uint64_t count = 0;
};

struct ScreeningTallies {
    std::uint64_t manual_screened = 0;
    std::vector<std::pair<std::string, std::uint64_t>> manual_excluded;  // (reason, count)
    std::uint64_t genai_screened = 0;
    std::uint64_t reports_sought = 0;
    std::uint64_t reports_not_retrieved = 0;
    std::uint64_t included_human_studies = 0;
    std::uint64_t included_genai_studies = 0;

    nlohmann::json to_json() const;
    static ScreeningTallies from_json(const nlohmann::json& j);
};

struct FlowCounts {
    std::vector<IdentificationEntry> identification;
    std::uint64_t duplicates_removed = 0;
    // pre-screening
    std::uint64_t scored = 0;
    std::uint64_t excluded_by_threshold = 0;
    std::uint64_t genai_bin = 0;
    std::uint64_t human_bin = 0;
    // screening
    std::uint64_t manual_screened = 0;
    std::vector<std::pair<std::string, std::uint64_t>> manual_excluded;
    std::uint64_t genai_screened = 0;
    std::uint64_t reports_sought = 0;
    std::uint64_t reports_not_retrieved = 0;
    // included
    std::uint64_t included_human_studies = 0;
    std::uint64_t included_genai_studies = 0;

    nlohmann::json to_json() const;
    static FlowCounts from_json(const nlohmann::json& j);
};

// Assembles flow counts and checks every stage-to-stage conservation
// equation, throwing ReconciliationError naming the failing one.
FlowCounts build_flow(const std::vector<QuerySpec>& queries, const DuplicateReport& dup,
                      const TriageResult& triage, const ScreeningTallies& screening);

enum class FlowFormat { Mermaid, Dot, Text };
FlowFormat parse_flow_format(const std::string& name);

// Deterministic, byte-stable rendering of the four-phase flow diagram.
std::string render_flow(const FlowCounts& counts, FlowFormat format);

// Histogram CSV "bin_left,bin_right,density,pdf,lower_cutoff,upper_cutoff"
// with the fitted curve evaluated at bin midpoints.
std::string export_histogram(const std::vector<double>& scores, const GmmParams& params,
                             const Cutoffs& cutoffs, std::size_t bins);

}  // namespace lprisma
